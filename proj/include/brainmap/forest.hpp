#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/matrix.hpp"
#include "brainmap/rng.hpp"

namespace brainmap {

struct RfConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 2;
  std::size_t features_per_split = 0;  // 0 -> floor(sqrt(D)), at least 1
};

namespace detail {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

inline double gini_from_counts(const std::vector<std::size_t>& counts, std::size_t total) {
  double g = 1.0;
  for (std::size_t c : counts) {
    const double p = double(c) / double(total);
    g -= p * p;
  }
  return g;
}

inline int majority_label(const std::vector<std::size_t>& counts) {
  std::size_t best = 0;
  int label = 0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > best) {  // ties keep the smallest class index
      best = counts[c];
      label = int(c);
    }
  return label;
}

}  // namespace detail

/// Single CART tree: Gini impurity, axis-aligned midpoint thresholds,
/// random feature subset per split. Fully deterministic given its stream.
class DecisionTree {
 public:
  void fit(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t> samples,
           int n_classes, const RfConfig& cfg, RngStream rng) {
    nodes_.clear();
    std::size_t mtry = cfg.features_per_split;
    if (mtry == 0) mtry = std::max<std::size_t>(1, std::size_t(std::sqrt(double(x.cols()))));
    mtry = std::min(mtry, x.cols());
    grow(x, y, std::move(samples), n_classes, cfg, mtry, rng, 0);
  }

  int predict_row(const double* row) const {
    int at = 0;
    while (nodes_[std::size_t(at)].feature >= 0) {
      const auto& n = nodes_[std::size_t(at)];
      at = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes_[std::size_t(at)].label;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  int grow(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t> samples,
           int n_classes, const RfConfig& cfg, std::size_t mtry, RngStream& rng,
           std::size_t depth) {
    std::vector<std::size_t> counts(std::size_t(n_classes), 0);
    for (std::size_t s : samples) counts[std::size_t(y[s])]++;
    const double node_gini = detail::gini_from_counts(counts, samples.size());

    const int node_id = int(nodes_.size());
    nodes_.push_back({});

    const bool stop = depth >= cfg.max_depth || samples.size() < 2 * cfg.min_leaf ||
                      node_gini == 0.0;
    if (!stop) {
      // sample mtry distinct features (partial Fisher-Yates)
      std::vector<std::size_t> feats(x.cols());
      std::iota(feats.begin(), feats.end(), std::size_t(0));
      for (std::size_t i = 0; i < mtry; ++i)
        std::swap(feats[i], feats[i + rng.below(feats.size() - i)]);
      feats.resize(mtry);

      double best_gain = 0.0;
      std::size_t best_feat = 0, best_pos = 0;
      double best_thr = 0.0;
      std::vector<std::size_t> sorted = samples, best_sorted;
      std::vector<std::size_t> lcounts(std::size_t(n_classes), 0);

      for (std::size_t f : feats) {
        std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
          const double va = x(a, f), vb = x(b, f);
          return va < vb || (va == vb && a < b);
        });
        std::fill(lcounts.begin(), lcounts.end(), 0);
        std::size_t nl = 0;
        const std::size_t n = sorted.size();
        for (std::size_t pos = 0; pos + 1 < n; ++pos) {
          lcounts[std::size_t(y[sorted[pos]])]++;
          ++nl;
          if (x(sorted[pos], f) == x(sorted[pos + 1], f)) continue;
          const std::size_t nr = n - nl;
          if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
          double gl = 1.0, gr = 1.0;
          for (std::size_t c = 0; c < lcounts.size(); ++c) {
            const double pl = double(lcounts[c]) / double(nl);
            const double pr = double(counts[c] - lcounts[c]) / double(nr);
            gl -= pl * pl;
            gr -= pr * pr;
          }
          const double gain =
              node_gini - (double(nl) / double(n)) * gl - (double(nr) / double(n)) * gr;
          if (gain > best_gain + 1e-15) {
            best_gain = gain;
            best_feat = f;
            best_pos = pos;
            best_thr = 0.5 * (x(sorted[pos], f) + x(sorted[pos + 1], f));
            best_sorted = sorted;
          }
        }
      }

      if (best_gain > 0.0) {
        std::vector<std::size_t> left(best_sorted.begin(),
                                      best_sorted.begin() + std::ptrdiff_t(best_pos) + 1);
        std::vector<std::size_t> right(best_sorted.begin() + std::ptrdiff_t(best_pos) + 1,
                                       best_sorted.end());
        const int l = grow(x, y, std::move(left), n_classes, cfg, mtry, rng, depth + 1);
        const int r = grow(x, y, std::move(right), n_classes, cfg, mtry, rng, depth + 1);
        nodes_[std::size_t(node_id)].feature = int(best_feat);
        nodes_[std::size_t(node_id)].threshold = best_thr;
        nodes_[std::size_t(node_id)].left = l;
        nodes_[std::size_t(node_id)].right = r;
        return node_id;
      }
    }

    nodes_[std::size_t(node_id)].label = detail::majority_label(counts);
    return node_id;
  }

  std::vector<detail::TreeNode> nodes_;
};

/// Bagged forest of CART trees with majority vote. Each tree draws from its
/// own substream keyed by tree index, so results do not depend on the order
/// trees are built in.
class RandomForest {
 public:
  static RandomForest fit(const Matrix& x, const std::vector<int>& y, int n_classes,
                          const RfConfig& cfg, const RngStream& rng) {
    if (x.rows() != y.size()) throw ShapeError("rf_fit: rows and labels differ");
    if (x.rows() == 0) throw ContractError("rf_fit: empty training set");
    RandomForest f;
    f.n_classes_ = n_classes;
    f.trees_.resize(cfg.n_trees);
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
      RngStream tree_rng = rng.substream(t);
      std::vector<std::size_t> bootstrap(x.rows());
      for (auto& s : bootstrap) s = tree_rng.below(x.rows());
      f.trees_[t].fit(x, y, std::move(bootstrap), n_classes, cfg, tree_rng);
    }
    return f;
  }

  int predict_one(const double* row) const {
    std::vector<std::size_t> votes(std::size_t(n_classes_), 0);
    for (const auto& t : trees_) votes[std::size_t(t.predict_row(row))]++;
    return detail::majority_label(votes);
  }

  std::vector<int> predict(const Matrix& x) const {
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_one(x.row_ptr(i));
    return out;
  }

  int n_classes() const { return n_classes_; }

 private:
  std::vector<DecisionTree> trees_;
  int n_classes_ = 0;
};

}  // namespace brainmap
