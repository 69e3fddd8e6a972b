#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/matrix.hpp"
#include "brainmap/rng.hpp"
#include "brainmap/svd.hpp"

namespace brainmap {

struct DistillConfig {
  std::size_t k_remove = 3;            // columns dropped at each extreme
  double masking_rate = 0.2;           // target expected drop fraction knob
  bool first_component_only = false;   // loading: leading component vs sigma-weighted sum
};

struct DistillState {
  std::vector<std::size_t> kept_columns;  // sorted indices into the P input columns
  Matrix prototypes;                      // C x P', class-conditional means of kept rows
  std::size_t input_cols = 0;             // P
  std::string fitted_on;                  // training row description
  bool fitted = false;
};

/// Loading score per column: sigma_k-weighted absolute right-singular-vector
/// mass of the mean-centered rows, the PCA-loading analogue. Computed from
/// the Gram spectrum, which shares eigenvectors with the SVD's V.
inline std::vector<double> column_loading_scores(const Matrix& z, bool first_component_only) {
  const std::size_t p = z.cols();
  Matrix centered = z;
  Matrix mean = mean_rows(z);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < p; ++j) centered(i, j) -= mean(0, j);
  Matrix gram = matmul_tn(centered, centered);
  EigenResult eig = sym_eigen(gram);

  std::vector<double> score(p, 0.0);
  const std::size_t first = first_component_only ? p - 1 : 0;
  for (std::size_t k = first; k < p; ++k) {
    const double sigma = eig.values[k] > 0.0 ? std::sqrt(eig.values[k]) : 0.0;
    for (std::size_t j = 0; j < p; ++j) score[j] += sigma * std::fabs(eig.vectors(j, k));
  }
  return score;
}

/// Drops the k_remove highest- and lowest-loading columns of the stacked
/// training rows, then computes class prototypes on the survivors.
inline DistillState fit_distiller(const Matrix& z_train, const std::vector<int>& node_labels,
                                  int n_classes, const DistillConfig& cfg) {
  const std::size_t p = z_train.cols();
  if (p <= 2 * cfg.k_remove)
    throw ConfigError("fit_distiller: need P > 2*k_remove (P=" + std::to_string(p) +
                      ", k_remove=" + std::to_string(cfg.k_remove) + ")");
  if (z_train.rows() != node_labels.size())
    throw ShapeError("fit_distiller: rows and labels differ");

  std::vector<std::size_t> class_count(std::size_t(n_classes), 0);
  for (int y : node_labels) {
    if (y < 0 || y >= n_classes) throw LabelRangeError("fit_distiller: label out of range");
    class_count[std::size_t(y)]++;
  }
  for (int c = 0; c < n_classes; ++c)
    if (class_count[std::size_t(c)] == 0)
      throw Error("fit_distiller: class " + std::to_string(c) + " has no training rows");

  const std::vector<double> score = column_loading_scores(z_train, cfg.first_component_only);
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score[a] < score[b] || (score[a] == score[b] && a < b);
  });

  std::vector<bool> drop(p, false);
  for (std::size_t i = 0; i < cfg.k_remove; ++i) {
    drop[order[i]] = true;          // lowest loadings
    drop[order[p - 1 - i]] = true;  // highest loadings
  }

  DistillState state;
  state.input_cols = p;
  for (std::size_t j = 0; j < p; ++j)
    if (!drop[j]) state.kept_columns.push_back(j);

  const std::size_t kept = state.kept_columns.size();
  state.prototypes = Matrix(std::size_t(n_classes), kept);
  for (std::size_t i = 0; i < z_train.rows(); ++i) {
    const std::size_t c = std::size_t(node_labels[i]);
    for (std::size_t j = 0; j < kept; ++j)
      state.prototypes(c, j) += z_train(i, state.kept_columns[j]);
  }
  for (int c = 0; c < n_classes; ++c)
    for (std::size_t j = 0; j < kept; ++j)
      state.prototypes(std::size_t(c), j) /= double(class_count[std::size_t(c)]);

  state.fitted_on = std::to_string(z_train.rows()) + " rows x " + std::to_string(p) +
                    " cols, " + std::to_string(n_classes) + " classes";
  state.fitted = true;
  return state;
}

/// Column selection only: Z_cf = Z[:, kept].
inline Matrix distill_columns(const Matrix& z, const DistillState& state) {
  if (!state.fitted) throw ContractError("distill_columns: unfitted state");
  if (z.cols() != state.input_cols)
    throw ShapeError("distill_columns: column count differs from the fitted layout");
  return slice_cols(z, state.kept_columns);
}

/// Per-entry drop probabilities: row-max-normalised deviation from the class
/// prototype, scaled by the masking rate. A row equal to its prototype gets
/// all-zero probabilities.
inline Matrix drop_probabilities(const Matrix& z_cf, const std::vector<int>& labels,
                                 const DistillState& state, double masking_rate) {
  if (!state.fitted) throw ContractError("drop_probabilities: unfitted state");
  if (masking_rate < 0.0 || masking_rate >= 1.0)
    throw ConfigError("drop_probabilities: masking rate must be in [0, 1)");
  if (z_cf.cols() != state.kept_columns.size())
    throw ShapeError("drop_probabilities: expected distilled columns");
  if (z_cf.rows() != labels.size()) throw ShapeError("drop_probabilities: rows/labels differ");

  Matrix w(z_cf.rows(), z_cf.cols());
  for (std::size_t i = 0; i < z_cf.rows(); ++i) {
    const std::size_t c = std::size_t(labels[i]);
    double maxdev = 0.0;
    for (std::size_t j = 0; j < z_cf.cols(); ++j)
      maxdev = std::max(maxdev, std::fabs(z_cf(i, j) - state.prototypes(c, j)));
    if (maxdev == 0.0) continue;
    for (std::size_t j = 0; j < z_cf.cols(); ++j)
      w(i, j) = masking_rate * std::fabs(z_cf(i, j) - state.prototypes(c, j)) / maxdev;
  }
  return w;
}

/// Bernoulli masking for training epochs: z'_i = z_i .* (1 - delta_i).
/// Row r draws from rng.substream(r), so rows are order-independent.
inline Matrix apply_mask(const Matrix& z_cf, const std::vector<int>& labels,
                         const DistillState& state, double masking_rate, RngStream rng) {
  Matrix w = drop_probabilities(z_cf, labels, state, masking_rate);
  Matrix out = z_cf;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    RngStream row_rng = rng.substream(i);
    for (std::size_t j = 0; j < out.cols(); ++j)
      if (row_rng.uniform() < w(i, j)) out(i, j) = 0.0;
  }
  return out;
}

}  // namespace brainmap
