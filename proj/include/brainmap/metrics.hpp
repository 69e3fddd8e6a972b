#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/matrix.hpp"

namespace brainmap {

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ContractError("accuracy: size mismatch or empty");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
  return double(correct) / double(pred.size());
}

/// Rank-based (Mann-Whitney) AUC of one score column against a binary
/// positive mask, with average ranks on ties. Returns nullopt when either
/// class is absent.
inline std::optional<double> auc_binary(const std::vector<double>& score,
                                        const std::vector<bool>& positive) {
  const std::size_t n = score.size();
  std::size_t n_pos = 0;
  for (bool p : positive) n_pos += p;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score[a] < score[b] || (score[a] == score[b] && a < b);
  });

  // average ranks over tie groups (1-based ranks)
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
    const double avg = 0.5 * (double(i + 1) + double(j + 1));
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }

  double rank_sum_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (positive[k]) rank_sum_pos += rank[k];
  const double u = rank_sum_pos - 0.5 * double(n_pos) * double(n_pos + 1);
  return u / (double(n_pos) * double(n_neg));
}

/// Macro one-vs-rest AUC over per-class score columns; classes missing
/// either positives or negatives are skipped. Absent entirely -> nullopt.
inline std::optional<double> auc_macro_ovr(const Matrix& scores, const std::vector<int>& truth) {
  if (scores.rows() != truth.size()) throw ContractError("auc_macro_ovr: size mismatch");
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    std::vector<double> col(scores.rows());
    std::vector<bool> pos(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      col[i] = scores(i, c);
      pos[i] = truth[i] == int(c);
    }
    if (auto a = auc_binary(col, pos)) {
      total += *a;
      ++used;
    }
  }
  if (used == 0) return std::nullopt;
  return total / double(used);
}

inline Matrix confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                        int n_classes) {
  const auto n = std::size_t(n_classes);
  Matrix c(n, n);
  for (std::size_t i = 0; i < pred.size(); ++i)
    c(std::size_t(truth[i]), std::size_t(pred[i])) += 1.0;
  return c;
}

}  // namespace brainmap
