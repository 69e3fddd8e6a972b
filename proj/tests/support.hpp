#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "brainmap/autodiff.hpp"
#include "brainmap/matrix.hpp"
#include "brainmap/rng.hpp"

namespace testsupport {

using brainmap::Matrix;

inline Matrix random_matrix(std::size_t r, std::size_t c, brainmap::RngStream& rng,
                            double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

/// Independent triple-loop product oracle (deliberately naive).
inline Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

/// Central finite differences against the tape gradient of a scalar-valued
/// function of the given leaves. Returns the worst relative error across all
/// parameter entries (scale-normalised by max(1, |analytic|, |numeric|)).
inline double finite_diff_max_rel_err(
    const std::function<brainmap::ad::Var()>& forward,
    const std::vector<brainmap::ad::Var>& params, double h = 1e-5) {
  brainmap::ad::zero_grad(params);
  auto loss = forward();
  brainmap::ad::backward(loss);
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& v = params[pi]->value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double save = v.data()[i];
      v.data()[i] = save + h;
      const double up = forward()->value(0, 0);
      v.data()[i] = save - h;
      const double down = forward()->value(0, 0);
      v.data()[i] = save;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[pi].data()[i];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

/// Scratch directory under the system temp root, unique per tag.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("brainmap_test_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
