#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/matrix.hpp"

namespace brainmap {

struct SvdOptions {
  double tol = 1e-10;   // convergence threshold on off-diagonal column coherence
  int max_sweeps = 60;  // iteration cap before NumericalError
};

struct SvdResult {
  Matrix u;                // m x r, orthonormal columns (zero column iff sigma == 0)
  std::vector<double> s;   // r singular values, nonincreasing, nonnegative
  Matrix vt;               // r x n, orthonormal rows
};

namespace detail {

// One-sided Jacobi on the columns of a copy of A (m x n, m >= n assumed
// by the caller). Rotations zero out pairwise column inner products.
inline SvdResult jacobi_svd_tall(const Matrix& a, const SvdOptions& opt) {
  const std::size_t m = a.rows(), n = a.cols();
  Matrix w = a;
  Matrix v = Matrix::identity(n);

  int sweep = 0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          alpha += wp * wp;
          beta += wq * wq;
          gamma += wp * wq;
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        const double coherence = std::fabs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, coherence);
        if (coherence <= opt.tol) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (off <= opt.tol) break;
  }
  if (sweep >= opt.max_sweeps)
    throw NumericalError("thin_svd: no convergence after " + std::to_string(opt.max_sweeps) +
                         " sweeps on " + std::to_string(m) + "x" + std::to_string(n) +
                         " matrix (tol " + std::to_string(opt.tol) + ")");

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) norm2 += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(norm2);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult r;
  r.u = Matrix(m, n);
  r.vt = Matrix(n, n);
  r.s.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    r.s[j] = sigma[src];
    const double inv = sigma[src] > 0.0 ? 1.0 / sigma[src] : 0.0;
    for (std::size_t i = 0; i < m; ++i) r.u(i, j) = w(i, src) * inv;
    for (std::size_t i = 0; i < n; ++i) r.vt(j, i) = v(i, src);
  }
  return r;
}

}  // namespace detail

/// Thin SVD via one-sided Jacobi: A = U diag(S) Vt with r = min(rows, cols).
inline SvdResult thin_svd(const Matrix& a, const SvdOptions& opt = {}) {
  if (a.rows() == 0 || a.cols() == 0) throw ContractError("thin_svd: empty matrix");
  if (a.rows() >= a.cols()) return detail::jacobi_svd_tall(a, opt);
  // wide case: factor A^T and swap the roles of U and V
  SvdResult t = detail::jacobi_svd_tall(transpose(a), opt);
  SvdResult r;
  r.u = transpose(t.vt);
  r.s = std::move(t.s);
  r.vt = transpose(t.u);
  return r;
}

struct EigenResult {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j pairs with values[j]; orthonormal
};

/// Eigendecomposition of a symmetric matrix: Householder tridiagonalisation
/// followed by implicit-shift QL, eigenvalues ascending.
inline EigenResult sym_eigen(const Matrix& a) {
  require_shape(a.rows() == a.cols(), "sym_eigen: matrix not square");
  const std::size_t n = a.rows();
  Matrix z = a;
  std::vector<double> d(n, 0.0), e(n, 0.0);

  // tred2
  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (std::size_t k = 0; k <= l; ++k) scale += std::fabs(z(i, k));
      if (scale == 0.0) {
        e[i] = z(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          z(i, k) /= scale;
          h += z(i, k) * z(i, k);
        }
        double f = z(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          z(j, i) = z(i, j) / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
          e[j] = g / h;
          f += e[j] * z(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = z(i, j);
          e[j] = g = e[j] - hh * f;
          for (std::size_t k = 0; k <= j; ++k) z(j, k) -= f * e[k] + g * z(i, k);
        }
      }
    } else {
      e[i] = z(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] != 0.0) {
      for (std::size_t j = 0; j < i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k < i; ++k) g += z(i, k) * z(k, j);
        for (std::size_t k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
      }
    }
    d[i] = z(i, i);
    z(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) z(j, i) = z(i, j) = 0.0;
  }

  // tql2
  auto pythag = [](double x, double y) { return std::hypot(x, y); };
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= 1e-300 + std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m != l) {
        if (++iter > 50)
          throw NumericalError("sym_eigen: QL failed to converge after 50 iterations");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = pythag(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0 ? std::fabs(r) : -std::fabs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = pythag(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (std::size_t k = 0; k < n; ++k) {
            f = z(k, i + 1);
            z(k, i + 1) = s * z(k, i) + c * f;
            z(k, i) = c * z(k, i) - s * f;
          }
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
  EigenResult res;
  res.values.resize(n);
  res.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    res.values[j] = d[order[j]];
    for (std::size_t i = 0; i < n; ++i) res.vectors(i, j) = z(i, order[j]);
  }
  return res;
}

}  // namespace brainmap
