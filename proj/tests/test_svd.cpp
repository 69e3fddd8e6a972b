#include <catch_amalgamated.hpp>

#include "brainmap/matrix.hpp"
#include "brainmap/rng.hpp"
#include "brainmap/svd.hpp"
#include "support.hpp"

using namespace brainmap;
using testsupport::random_matrix;

namespace {

Matrix reconstruct(const SvdResult& r) {
  Matrix us = r.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= r.s[j];
  return matmul(us, r.vt);
}

}  // namespace

TEST_CASE("thin_svd of a diagonal matrix returns its entries") {
  Matrix m = Matrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  auto r = thin_svd(m);
  REQUIRE(r.s.size() == 3);
  REQUIRE(r.s[0] == Catch::Approx(3.0).margin(1e-12));
  REQUIRE(r.s[1] == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(r.s[2] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("rank-1 outer product has a single nonzero singular value") {
  RngStream rng(4);
  Matrix u = random_matrix(6, 1, rng);
  Matrix v = random_matrix(1, 4, rng);
  Matrix m = matmul(u, v);
  auto r = thin_svd(m);
  const double expected = frobenius_norm(u) * frobenius_norm(v);
  REQUIRE(r.s[0] == Catch::Approx(expected).margin(1e-10));
  for (std::size_t k = 1; k < r.s.size(); ++k) REQUIRE(r.s[k] < 1e-10);
}

TEST_CASE("thin_svd reconstruction on wide and tall random matrices") {
  RngStream rng(8);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{10, 15}, {15, 10}, {12, 12}}) {
    Matrix m = random_matrix(rows, cols, rng);
    auto r = thin_svd(m);
    const double rel = frobenius_norm(sub(reconstruct(r), m)) / frobenius_norm(m);
    REQUIRE(rel < 1e-8);
    for (std::size_t k = 1; k < r.s.size(); ++k) {
      REQUIRE(r.s[k] >= 0.0);
      REQUIRE(r.s[k] <= r.s[k - 1] + 1e-12);
    }
  }
}

TEST_CASE("thin_svd factors are orthonormal") {
  RngStream rng(21);
  Matrix m = random_matrix(9, 6, rng);
  auto r = thin_svd(m);
  Matrix utu = matmul_tn(r.u, r.u);
  Matrix vvt = matmul_nt(r.vt, r.vt);
  REQUIRE(max_abs_diff(utu, Matrix::identity(6)) < 1e-8);
  REQUIRE(max_abs_diff(vvt, Matrix::identity(6)) < 1e-8);
}

TEST_CASE("thin_svd respects the iteration cap") {
  RngStream rng(3);
  Matrix m = random_matrix(8, 8, rng);
  SvdOptions opt;
  opt.max_sweeps = 0;
  REQUIRE_THROWS_AS(thin_svd(m, opt), NumericalError);
}

TEST_CASE("sym_eigen recovers a known spectrum") {
  // eigenvalues of [[2,1],[1,2]] are 1 and 3
  Matrix m = Matrix::from_rows({{2, 1}, {1, 2}});
  auto e = sym_eigen(m);
  REQUIRE(e.values[0] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(e.values[1] == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("sym_eigen reconstructs random symmetric matrices") {
  RngStream rng(12);
  for (std::size_t n : {1, 2, 5, 17}) {
    Matrix a = random_matrix(n, n, rng);
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = 0.5 * (a(i, j) + a(j, i));
    auto e = sym_eigen(m);
    // V diag(w) V^T == M and V^T V == I
    Matrix vw = e.vectors;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) vw(i, j) *= e.values[j];
    REQUIRE(max_abs_diff(matmul_nt(vw, e.vectors), m) < 1e-9);
    REQUIRE(max_abs_diff(matmul_tn(e.vectors, e.vectors), Matrix::identity(n)) < 1e-9);
    for (std::size_t k = 1; k < n; ++k) REQUIRE(e.values[k] >= e.values[k - 1] - 1e-12);
  }
}
