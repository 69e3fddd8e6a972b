#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/matrix.hpp"
#include "brainmap/rng.hpp"

namespace brainmap::ad {

/// One recorded operation. Holds the forward value, a gradient slot of the
/// same shape, and a pull-back that scatters this node's gradient into its
/// parents. Recording is single-threaded per model instance.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> pullback;  // empty for leaves/constants
};

using Var = std::shared_ptr<Node>;

inline Var constant(Matrix v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

/// Trainable leaf; gradient slot starts at zero with the value's shape.
inline Var leaf(Matrix v) {
  auto n = std::make_shared<Node>();
  n->grad = Matrix(v.rows(), v.cols());
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

namespace detail {

inline Var make_op(Matrix value, std::vector<Var> parents,
                   std::function<void(Node&)> pullback) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad |= p->requires_grad;
  if (n->requires_grad) {
    n->grad = Matrix(n->value.rows(), n->value.cols());
    n->parents = std::move(parents);
    n->pullback = std::move(pullback);
  }
  return n;
}

inline void accumulate(Node& target, const Matrix& g) {
  if (!target.requires_grad) return;
  for (std::size_t i = 0; i < g.size(); ++i) target.grad.data()[i] += g.data()[i];
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  return detail::make_op(brainmap::matmul(a->value, b->value), {a, b}, [a, b](Node& n) {
    detail::accumulate(*a, matmul_nt(n.grad, b->value));
    detail::accumulate(*b, matmul_tn(a->value, n.grad));
  });
}

/// a * b^T recorded as one node.
inline Var matmul_nt(const Var& a, const Var& b) {
  return detail::make_op(brainmap::matmul_nt(a->value, b->value), {a, b}, [a, b](Node& n) {
    detail::accumulate(*a, brainmap::matmul(n.grad, b->value));
    detail::accumulate(*b, matmul_tn(n.grad, a->value));
  });
}

inline Var add(const Var& a, const Var& b) {
  return detail::make_op(brainmap::add(a->value, b->value), {a, b}, [a, b](Node& n) {
    detail::accumulate(*a, n.grad);
    detail::accumulate(*b, n.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::make_op(brainmap::sub(a->value, b->value), {a, b}, [a, b](Node& n) {
    detail::accumulate(*a, n.grad);
    detail::accumulate(*b, scale(n.grad, -1.0));
  });
}

inline Var hadamard(const Var& a, const Var& b) {
  return detail::make_op(brainmap::hadamard(a->value, b->value), {a, b}, [a, b](Node& n) {
    detail::accumulate(*a, brainmap::hadamard(n.grad, b->value));
    detail::accumulate(*b, brainmap::hadamard(n.grad, a->value));
  });
}

/// alpha * a + beta, elementwise.
inline Var affine(const Var& a, double alpha, double beta) {
  Matrix v = scale(a->value, alpha);
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] += beta;
  return detail::make_op(std::move(v), {a}, [a, alpha](Node& n) {
    detail::accumulate(*a, scale(n.grad, alpha));
  });
}

inline Var add_rowvec(const Var& a, const Var& v) {
  return detail::make_op(brainmap::add_rowvec(a->value, v->value), {a, v}, [a, v](Node& n) {
    detail::accumulate(*a, n.grad);
    Matrix colsum(1, n.grad.cols());
    for (std::size_t i = 0; i < n.grad.rows(); ++i)
      for (std::size_t j = 0; j < n.grad.cols(); ++j) colsum(0, j) += n.grad(i, j);
    detail::accumulate(*v, colsum);
  });
}

inline Var row_softmax(const Var& a) {
  return detail::make_op(brainmap::row_softmax(a->value), {a}, [a](Node& n) {
    // dx_i = y_i .* (g_i - <g_i, y_i>)
    Matrix dx(n.value.rows(), n.value.cols());
    for (std::size_t i = 0; i < n.value.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n.value.cols(); ++j) dot += n.grad(i, j) * n.value(i, j);
      for (std::size_t j = 0; j < n.value.cols(); ++j)
        dx(i, j) = n.value(i, j) * (n.grad(i, j) - dot);
    }
    detail::accumulate(*a, dx);
  });
}

inline Var sigmoid(const Var& a) {
  return detail::make_op(brainmap::sigmoid(a->value), {a}, [a](Node& n) {
    Matrix dx = n.grad;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double y = n.value.data()[i];
      dx.data()[i] *= y * (1.0 - y);
    }
    detail::accumulate(*a, dx);
  });
}

inline Var relu(const Var& a) {
  return detail::make_op(brainmap::relu(a->value), {a}, [a](Node& n) {
    Matrix dx = n.grad;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (a->value.data()[i] <= 0.0) dx.data()[i] = 0.0;
    detail::accumulate(*a, dx);
  });
}

inline Var abs_elems(const Var& a) {
  return detail::make_op(brainmap::abs_elems(a->value), {a}, [a](Node& n) {
    Matrix dx = n.grad;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double x = a->value.data()[i];
      dx.data()[i] *= (x > 0.0) - (x < 0.0);
    }
    detail::accumulate(*a, dx);
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  std::vector<Matrix> vals;
  vals.reserve(parts.size());
  for (const auto& p : parts) vals.push_back(p->value);
  std::vector<Var> parents(parts.begin(), parts.end());
  return detail::make_op(brainmap::concat_cols(vals), parents, [parents](Node& n) {
    std::size_t off = 0;
    for (const auto& p : parents) {
      if (p->requires_grad) {
        Matrix g(p->value.rows(), p->value.cols());
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) = n.grad(i, off + j);
        detail::accumulate(*p, g);
      }
      off += p->value.cols();
    }
  });
}

inline Var slice_cols(const Var& a, std::vector<std::size_t> idx) {
  return detail::make_op(brainmap::slice_cols(a->value, idx), {a}, [a, idx](Node& n) {
    Matrix g(a->value.rows(), a->value.cols());
    for (std::size_t i = 0; i < n.grad.rows(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) g(i, idx[j]) += n.grad(i, j);
    detail::accumulate(*a, g);
  });
}

/// Scales row i of a by the scalar g(i, 0).
inline Var rowscale(const Var& a, const Var& g) {
  require_shape(g->value.cols() == 1 && g->value.rows() == a->value.rows(),
                "rowscale: gate must be rows x 1");
  Matrix v = a->value;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    const double s = g->value(i, 0);
    for (std::size_t j = 0; j < v.cols(); ++j) v(i, j) *= s;
  }
  return detail::make_op(std::move(v), {a, g}, [a, g](Node& n) {
    Matrix da = n.grad;
    Matrix dg(g->value.rows(), 1);
    for (std::size_t i = 0; i < da.rows(); ++i) {
      const double s = g->value(i, 0);
      double dot = 0.0;
      for (std::size_t j = 0; j < da.cols(); ++j) {
        dot += n.grad(i, j) * a->value(i, j);
        da(i, j) *= s;
      }
      dg(i, 0) = dot;
    }
    detail::accumulate(*a, da);
    detail::accumulate(*g, dg);
  });
}

inline Var mean_rows(const Var& a) {
  return detail::make_op(brainmap::mean_rows(a->value), {a}, [a](Node& n) {
    const double inv = 1.0 / double(a->value.rows());
    Matrix g(a->value.rows(), a->value.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) = n.grad(0, j) * inv;
    detail::accumulate(*a, g);
  });
}

/// Column-wise max over rows; gradient routes to the first argmax row.
inline Var max_rows(const Var& a) {
  const Matrix& x = a->value;
  Matrix v(1, x.cols());
  std::vector<std::size_t> arg(x.cols(), 0);
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double best = x(0, j);
    for (std::size_t i = 1; i < x.rows(); ++i)
      if (x(i, j) > best) {
        best = x(i, j);
        arg[j] = i;
      }
    v(0, j) = best;
  }
  return detail::make_op(std::move(v), {a}, [a, arg](Node& n) {
    Matrix g(a->value.rows(), a->value.cols());
    for (std::size_t j = 0; j < g.cols(); ++j) g(arg[j], j) = n.grad(0, j);
    detail::accumulate(*a, g);
  });
}

inline Var sum_to_scalar(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = sum_elems(a->value);
  return detail::make_op(std::move(v), {a}, [a](Node& n) {
    Matrix g(a->value.rows(), a->value.cols(), n.grad(0, 0));
    detail::accumulate(*a, g);
  });
}

/// Inverted dropout: scales surviving entries by 1/(1-rate). Identity when
/// not training or rate == 0. The mask is a constant of the recording.
inline Var dropout(const Var& a, double rate, RngStream& rng, bool training) {
  if (!training || rate <= 0.0) return a;
  Matrix mask(a->value.rows(), a->value.cols());
  const double keep = 1.0 - rate;
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  return hadamard(a, constant(std::move(mask)));
}

/// Cross-entropy of a 1 x C logit row against an integer label, as a scalar
/// node. Stable log-sum-exp form.
inline Var softmax_cross_entropy(const Var& logits, std::size_t label) {
  const Matrix& x = logits->value;
  require_shape(x.rows() == 1, "softmax_cross_entropy: logits must be 1 x C");
  if (label >= x.cols()) throw ContractError("softmax_cross_entropy: label out of range");
  double mx = x(0, 0);
  for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(0, j));
  double lse = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) lse += std::exp(x(0, j) - mx);
  lse = std::log(lse) + mx;
  Matrix v(1, 1);
  v(0, 0) = lse - x(0, label);
  return detail::make_op(std::move(v), {logits}, [logits, label](Node& n) {
    Matrix p = brainmap::row_softmax(logits->value);
    p(0, label) -= 1.0;
    detail::accumulate(*logits, scale(p, n.grad(0, 0)));
  });
}

/// Reverse sweep from a scalar loss. Gradients accumulate into leaf grad
/// slots; callers zero them between optimiser steps.
inline void backward(const Var& loss) {
  if (loss->value.rows() != 1 || loss->value.cols() != 1)
    throw ContractError("backward: loss must be scalar (1 x 1)");
  if (!loss->requires_grad) return;

  // iterative postorder over parents
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->pullback) (*it)->pullback(**it);
}

inline void zero_grad(const std::vector<Var>& params) {
  for (const auto& p : params)
    p->grad = Matrix(p->value.rows(), p->value.cols());
}

}  // namespace brainmap::ad
