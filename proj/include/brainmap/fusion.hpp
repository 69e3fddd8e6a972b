#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "brainmap/autodiff.hpp"
#include "brainmap/errors.hpp"
#include "brainmap/matrix.hpp"
#include "brainmap/rng.hpp"

namespace brainmap {

namespace detail {

inline Matrix uniform_init(std::size_t rows, std::size_t cols, double bound, RngStream rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

}  // namespace detail

/// Cross-node attention weights: queries and keys in a shared H-dimensional
/// space, values kept at full feature width.
struct CnaParams {
  ad::Var w_q;  // D x H
  ad::Var w_k;  // D x H
  ad::Var w_v;  // D x D
  std::size_t attention_dim = 0;

  static CnaParams init(std::size_t feat_dim, std::size_t attention_dim, RngStream rng) {
    if (attention_dim < 1) throw ConfigError("cna: attention dim must be >= 1");
    const double bound = 1.0 / std::sqrt(double(feat_dim));
    CnaParams p;
    p.attention_dim = attention_dim;
    p.w_q = ad::leaf(detail::uniform_init(feat_dim, attention_dim, bound, rng.substream(0)));
    p.w_k = ad::leaf(detail::uniform_init(feat_dim, attention_dim, bound, rng.substream(1)));
    p.w_v = ad::leaf(detail::uniform_init(feat_dim, feat_dim, bound, rng.substream(2)));
    return p;
  }

  std::vector<ad::Var> parameters() const { return {w_q, w_k, w_v}; }
};

/// Scalar gate per node over the concatenated functional/structural pair.
struct GiacParams {
  ad::Var w_g;  // 1 x 2D
  ad::Var b_g;  // 1 x 1

  static GiacParams init(std::size_t feat_dim, RngStream rng) {
    const double bound = 1.0 / std::sqrt(double(feat_dim));
    GiacParams p;
    p.w_g = ad::leaf(detail::uniform_init(1, 2 * feat_dim, bound, rng.substream(0)));
    p.b_g = ad::leaf(Matrix(1, 1, 0.0));
    return p;
  }

  std::vector<ad::Var> parameters() const { return {w_g, b_g}; }
};

struct CnaOutput {
  ad::Var summary;    // G~: N'_f x D, parcel-specific structural fusion
  ad::Var attention;  // A: N'_f x N'_s, rows sum to 1
};

/// A = row_softmax(F Wq (S Wk)^T / sqrt(H)), G~ = A (S Wv). Rectangular A is
/// fine: nothing assumes N'_f == N'_s.
inline CnaOutput cross_node_attention(const ad::Var& f, const ad::Var& s,
                                      const CnaParams& p) {
  const std::size_t d = f->value.cols();
  require_shape(s->value.cols() == d, "cross_node_attention: feature dims differ");
  require_shape(p.w_q->value.rows() == d, "cross_node_attention: weight dims differ");
  auto q = ad::matmul(f, p.w_q);
  auto k = ad::matmul(s, p.w_k);
  auto scores = ad::affine(ad::matmul_nt(q, k), 1.0 / std::sqrt(double(p.attention_dim)), 0.0);
  CnaOutput out;
  out.attention = ad::row_softmax(scores);
  out.summary = ad::matmul(out.attention, ad::matmul(s, p.w_v));
  return out;
}

/// Per-node 5D-wide embedding [f; g~; p; d; m] with block views into the
/// concatenated value.
struct FusedEmbedding {
  ad::Var z;     // N'_f x 5D
  ad::Var gate;  // N'_f x 1, strictly in (0, 1)
  std::size_t feat_dim = 0;

  Matrix block(std::size_t which) const {
    std::vector<std::size_t> idx(feat_dim);
    for (std::size_t j = 0; j < feat_dim; ++j) idx[j] = which * feat_dim + j;
    return slice_cols(z->value, idx);
  }
  Matrix functional() const { return block(0); }
  Matrix structural_summary() const { return block(1); }
  Matrix agreement() const { return block(2); }
  Matrix disparity() const { return block(3); }
  Matrix mixture() const { return block(4); }
};

/// p = F .* G~, d = |F - G~|, g = sigma(Wg [f; g~] + bg),
/// m = g .* f + (1 - g) .* g~, Z = [F G~ p d m].
inline FusedEmbedding gated_interaction(const ad::Var& f, const ad::Var& gtilde,
                                        const GiacParams& params) {
  require_shape(f->value.same_shape(gtilde->value), "gated_interaction: shapes differ");
  const std::size_t d = f->value.cols();
  require_shape(params.w_g->value.cols() == 2 * d, "gated_interaction: gate width mismatch");

  auto agreement = ad::hadamard(f, gtilde);
  auto disparity = ad::abs_elems(ad::sub(f, gtilde));
  auto pair = ad::concat_cols({f, gtilde});
  auto gate = ad::sigmoid(ad::add_rowvec(ad::matmul_nt(pair, params.w_g), params.b_g));
  auto mixture = ad::add(ad::rowscale(f, gate), ad::rowscale(gtilde, ad::affine(gate, -1.0, 1.0)));

  FusedEmbedding out;
  out.feat_dim = d;
  out.gate = gate;
  out.z = ad::concat_cols({f, gtilde, agreement, disparity, mixture});
  assert_finite(out.z->value, "gated_interaction");
  return out;
}

/// CNA then GIAC over one subject's reduced feature matrices.
inline FusedEmbedding fuse_subject(const Matrix& reduced_f, const Matrix& reduced_s,
                                   const CnaParams& cna, const GiacParams& giac) {
  auto f = ad::constant(reduced_f);
  auto s = ad::constant(reduced_s);
  return gated_interaction(f, cross_node_attention(f, s, cna).summary, giac);
}

}  // namespace brainmap
