#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "brainmap/errors.hpp"

namespace brainmap {

/// Tracks live and peak bytes held by Matrix storage. Single high-water
/// counter shared by the whole process; reset at stage boundaries by the
/// bench harness.
struct AllocTracker {
  static std::atomic<std::uint64_t>& live() {
    static std::atomic<std::uint64_t> v{0};
    return v;
  }
  static std::atomic<std::uint64_t>& peak() {
    static std::atomic<std::uint64_t> v{0};
    return v;
  }
  static void add(std::uint64_t bytes) {
    std::uint64_t now = live().fetch_add(bytes) + bytes;
    std::uint64_t p = peak().load();
    while (now > p && !peak().compare_exchange_weak(p, now)) {
    }
  }
  static void sub(std::uint64_t bytes) { live().fetch_sub(bytes); }
  static void reset_peak() { peak().store(live().load()); }
};

/// Dense row-major matrix of 64-bit reals. Value type: copy is deep,
/// instances are immutable by convention once published to other threads.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {
    AllocTracker::add(bytes());
  }

  Matrix(const Matrix& o) : rows_(o.rows_), cols_(o.cols_), d_(o.d_) {
    AllocTracker::add(bytes());
  }

  Matrix(Matrix&& o) noexcept
      : rows_(o.rows_), cols_(o.cols_), d_(std::move(o.d_)) {
    o.rows_ = o.cols_ = 0;
  }

  Matrix& operator=(const Matrix& o) {
    if (this != &o) {
      AllocTracker::sub(bytes());
      rows_ = o.rows_;
      cols_ = o.cols_;
      d_ = o.d_;
      AllocTracker::add(bytes());
    }
    return *this;
  }

  Matrix& operator=(Matrix&& o) noexcept {
    if (this != &o) {
      AllocTracker::sub(bytes());
      rows_ = o.rows_;
      cols_ = o.cols_;
      d_ = std::move(o.d_);
      o.rows_ = o.cols_ = 0;
    }
    return *this;
  }

  ~Matrix() { AllocTracker::sub(bytes()); }

  /// Build from nested braces, e.g. Matrix::from_rows({{1,2},{3,4}}).
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("from_rows: ragged rows");
      std::copy(row.begin(), row.end(), m.row_ptr(i));
      ++i;
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return d_.size(); }
  bool empty() const { return d_.empty(); }
  std::uint64_t bytes() const { return std::uint64_t(d_.capacity()) * sizeof(double); }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return d_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return d_[i * cols_ + j];
  }

  double* row_ptr(std::size_t i) { return d_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return d_.data() + i * cols_; }
  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> d_;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

/// a * b, cache-friendly ikj order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.row_ptr(i);
    const double* arow = a.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b.row_ptr(p);
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

/// a * b^T without materialising the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  Matrix out(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row_ptr(j);
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      out(i, j) = s;
    }
  }
  return out;
}

/// a^T * b without materialising the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require_shape(a.rows() == b.rows(), "matmul_tn: inner dimensions differ");
  Matrix out(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* arow = a.row_ptr(p);
    const double* brow = b.row_ptr(p);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double* orow = out.row_ptr(i);
      const double aip = arow[i];
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  require_shape(a.same_shape(b), "add: shapes differ");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  require_shape(a.same_shape(b), "sub: shapes differ");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_shape(a.same_shape(b), "hadamard: shapes differ");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

inline Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
  return out;
}

/// Adds a 1 x cols row vector to every row.
inline Matrix add_rowvec(const Matrix& a, const Matrix& v) {
  require_shape(v.rows() == 1 && v.cols() == a.cols(), "add_rowvec: bad vector shape");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.row_ptr(i);
    const double* vr = v.row_ptr(0);
    for (std::size_t j = 0; j < a.cols(); ++j) orow[j] += vr[j];
  }
  return out;
}

/// Numerically stable softmax over each row (per-row max subtraction).
inline Matrix row_softmax(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* in = m.row_ptr(i);
    double* o = out.row_ptr(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m.cols(); ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < m.cols(); ++j) o[j] /= sum;
  }
  return out;
}

inline Matrix sigmoid(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out.data()[i];
    // split on sign so exp never overflows
    out.data()[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                           : std::exp(x) / (1.0 + std::exp(x));
  }
  return out;
}

inline Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(0.0, out.data()[i]);
  return out;
}

inline Matrix abs_elems(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::fabs(out.data()[i]);
  return out;
}

inline Matrix concat_cols(const std::vector<Matrix>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  std::size_t rows = parts.front().rows(), cols = 0;
  for (const auto& p : parts) {
    require_shape(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double* orow = out.row_ptr(i);
    for (const auto& p : parts) {
      const double* prow = p.row_ptr(i);
      orow = std::copy(prow, prow + p.cols(), orow);
    }
  }
  return out;
}

inline Matrix slice_cols(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(m.rows(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j)
    if (idx[j] >= m.cols()) throw ShapeError("slice_cols: index out of range");
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = m(i, idx[j]);
  return out;
}

inline Matrix slice_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= m.rows()) throw ShapeError("slice_rows: index out of range");
    std::copy(m.row_ptr(idx[i]), m.row_ptr(idx[i]) + m.cols(), out.row_ptr(i));
  }
  return out;
}

/// 1 x cols row of column means.
inline Matrix mean_rows(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* r = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += r[j];
  }
  if (m.rows() > 0)
    for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) /= double(m.rows());
  return out;
}

inline double sum_elems(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i];
  return s;
}

inline double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
  return std::sqrt(s);
}

inline double max_abs(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s = std::max(s, std::fabs(m.data()[i]));
  return s;
}

inline bool is_finite(const Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!std::isfinite(m.data()[i])) return false;
  return true;
}

inline void assert_finite(const Matrix& m, const char* what) {
  if (!is_finite(m)) throw NumericalError(std::string(what) + ": non-finite entries");
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_shape(a.same_shape(b), "max_abs_diff: shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s = std::max(s, std::fabs(a.data()[i] - b.data()[i]));
  return s;
}

}  // namespace brainmap
