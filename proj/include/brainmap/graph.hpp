#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/matrix.hpp"

namespace brainmap {

/// One subject: paired functional (Pearson-correlation semantics) and
/// structural (cosine-similarity semantics) adjacency plus node features.
struct MultimodalSubject {
  std::string id;
  Matrix adj_f;   // N x N, symmetric, unit diagonal
  Matrix adj_s;   // N x N, symmetric
  Matrix feat_f;  // N x D
  Matrix feat_s;  // N x D
  int label = 0;
};

enum class Modality { functional, structural };

inline const Matrix& adjacency(const MultimodalSubject& s, Modality m) {
  return m == Modality::functional ? s.adj_f : s.adj_s;
}
inline const Matrix& features(const MultimodalSubject& s, Modality m) {
  return m == Modality::functional ? s.feat_f : s.feat_s;
}
inline char modality_tag(Modality m) { return m == Modality::functional ? 'f' : 's'; }

struct Dataset {
  std::vector<MultimodalSubject> subjects;
  std::size_t n_nodes = 0;
  std::size_t feat_dim = 0;
  int n_classes = 0;

  std::size_t size() const { return subjects.size(); }
  std::vector<int> labels() const {
    std::vector<int> y(subjects.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) y[i] = subjects[i].label;
    return y;
  }
};

/// Named ROI subsets over the common node set; mask 0 is always "all".
struct AtlasMask {
  std::string name;
  std::vector<std::size_t> roi;  // sorted, unique
};

struct AtlasMaskLibrary {
  std::vector<AtlasMask> masks;

  std::size_t size() const { return masks.size(); }
  const AtlasMask& operator[](std::size_t k) const { return masks[k]; }

  const AtlasMask* find(const std::string& name) const {
    for (const auto& m : masks)
      if (m.name == name) return &m;
    return nullptr;
  }

  /// Checks the library contract against a node count: mask 0 named "all"
  /// covering every node, later masks strict subsets with valid indices.
  void validate(std::size_t n_nodes) const {
    if (masks.empty() || masks[0].name != "all")
      throw ContractError("atlas: mask 0 must be named \"all\"");
    if (masks[0].roi.size() != n_nodes)
      throw ContractError("atlas: mask \"all\" must cover every node");
    for (std::size_t j = 0; j < n_nodes; ++j)
      if (masks[0].roi[j] != j) throw ContractError("atlas: mask \"all\" must be 0..N-1");
    for (std::size_t k = 1; k < masks.size(); ++k) {
      const auto& roi = masks[k].roi;
      if (roi.empty()) throw ContractError("atlas: mask \"" + masks[k].name + "\" is empty");
      if (roi.size() >= n_nodes)
        throw ContractError("atlas: mask \"" + masks[k].name + "\" is not a strict subset");
      for (std::size_t j = 0; j < roi.size(); ++j) {
        if (roi[j] >= n_nodes)
          throw ContractError("atlas: mask \"" + masks[k].name + "\" index out of range");
        if (j > 0 && roi[j] <= roi[j - 1])
          throw ContractError("atlas: mask \"" + masks[k].name + "\" not sorted unique");
      }
    }
  }
};

constexpr double kSymmetryTol = 1e-9;

/// Structural validation of one subject (shape, symmetry, diagonal, range).
inline void validate_subject(const MultimodalSubject& s, std::size_t n_nodes,
                             std::size_t feat_dim) {
  auto check_adj = [&](const Matrix& a, const char* which, bool unit_diag) {
    if (a.rows() != n_nodes || a.cols() != n_nodes)
      throw ShapeError(s.id + ": " + which + " adjacency is " + std::to_string(a.rows()) +
                       "x" + std::to_string(a.cols()) + ", expected " +
                       std::to_string(n_nodes) + "x" + std::to_string(n_nodes));
    for (std::size_t i = 0; i < n_nodes; ++i)
      for (std::size_t j = i + 1; j < n_nodes; ++j)
        if (std::fabs(a(i, j) - a(j, i)) > kSymmetryTol)
          throw AsymmetryError(s.id + ": " + which + " adjacency asymmetric at (" +
                               std::to_string(i) + "," + std::to_string(j) + "): " +
                               std::to_string(a(i, j)) + " vs " + std::to_string(a(j, i)));
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::fabs(a.data()[i]) > 1.0 + kSymmetryTol)
        throw Error(s.id + ": " + which + " adjacency entry outside [-1, 1]");
    if (unit_diag)
      for (std::size_t i = 0; i < n_nodes; ++i)
        if (std::fabs(a(i, i) - 1.0) > kSymmetryTol)
          throw Error(s.id + ": functional adjacency diagonal not 1 at node " +
                      std::to_string(i));
  };
  check_adj(s.adj_f, "functional", true);
  check_adj(s.adj_s, "structural", false);
  if (s.feat_f.rows() != n_nodes || s.feat_s.rows() != n_nodes)
    throw ShapeError(s.id + ": feature row count differs from node count");
  if (s.feat_f.cols() != feat_dim || s.feat_s.cols() != feat_dim)
    throw ShapeError(s.id + ": feature dim differs across subjects");
  if (s.label < 0) throw LabelRangeError(s.id + ": negative label");
}

/// Restricts adjacency to mask x mask and feature rows to the mask, order
/// preserved as given in the mask.
inline MultimodalSubject induce_subgraph(const MultimodalSubject& s,
                                         const std::vector<std::size_t>& mask) {
  if (mask.empty()) throw ContractError("induce_subgraph: empty mask");
  const std::size_t n = s.adj_f.rows();
  for (std::size_t v : mask)
    if (v >= n) throw ContractError("induce_subgraph: index out of range");
  MultimodalSubject out;
  out.id = s.id;
  out.label = s.label;
  const std::size_t m = mask.size();
  out.adj_f = Matrix(m, m);
  out.adj_s = Matrix(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      out.adj_f(i, j) = s.adj_f(mask[i], mask[j]);
      out.adj_s(i, j) = s.adj_s(mask[i], mask[j]);
    }
  out.feat_f = slice_rows(s.feat_f, mask);
  out.feat_s = slice_rows(s.feat_s, mask);
  return out;
}

inline Dataset induce_dataset(const Dataset& d, const std::vector<std::size_t>& mask) {
  Dataset out;
  out.n_nodes = mask.size();
  out.feat_dim = d.feat_dim;
  out.n_classes = d.n_classes;
  out.subjects.reserve(d.subjects.size());
  for (const auto& s : d.subjects) out.subjects.push_back(induce_subgraph(s, mask));
  return out;
}

enum class FeaturePolicy { adjacency_row, file };

/// Default node features: each node's own adjacency row (D = N). The file
/// policy keeps externally supplied features untouched.
inline Matrix default_feature_policy(const MultimodalSubject& s, Modality m) {
  return adjacency(s, m);  // feat[i,:] == adj[i,:]
}

inline void apply_feature_policy(Dataset& d, FeaturePolicy policy) {
  if (policy == FeaturePolicy::file) {
    if (d.subjects.empty()) return;
    d.feat_dim = d.subjects.front().feat_f.cols();
    return;
  }
  for (auto& s : d.subjects) {
    s.feat_f = default_feature_policy(s, Modality::functional);
    s.feat_s = default_feature_policy(s, Modality::structural);
  }
  d.feat_dim = d.n_nodes;
}

}  // namespace brainmap
