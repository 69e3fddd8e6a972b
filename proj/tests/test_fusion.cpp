#include <catch_amalgamated.hpp>

#include "brainmap/fusion.hpp"
#include "support.hpp"

using namespace brainmap;
namespace ad = brainmap::ad;
using testsupport::finite_diff_max_rel_err;
using testsupport::random_matrix;

namespace {

CnaParams small_cna(std::size_t d, std::size_t h, std::uint64_t seed) {
  return CnaParams::init(d, h, RngStream(seed));
}

}  // namespace

TEST_CASE("a single structural node receives all attention") {
  RngStream rng(1);
  auto cna = small_cna(4, 3, 2);
  Matrix f = random_matrix(5, 4, rng);
  Matrix s = random_matrix(1, 4, rng);
  auto out = cross_node_attention(ad::constant(f), ad::constant(s), cna);
  Matrix v = matmul(s, cna.w_v->value);
  for (std::size_t i = 0; i < 5; ++i) {
    REQUIRE(out.attention->value(i, 0) == 1.0);
    for (std::size_t j = 0; j < 4; ++j)
      REQUIRE(out.summary->value(i, j) == Catch::Approx(v(0, j)).margin(1e-14));
  }
}

TEST_CASE("zero queries give uniform attention and the mean value vector") {
  RngStream rng(3);
  auto cna = small_cna(4, 2, 5);
  cna.w_q->value = Matrix(4, 2, 0.0);
  Matrix f = random_matrix(3, 4, rng);
  Matrix s = random_matrix(7, 4, rng);
  auto out = cross_node_attention(ad::constant(f), ad::constant(s), cna);
  Matrix v = matmul(s, cna.w_v->value);
  Matrix vbar = mean_rows(v);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 7; ++j)
      REQUIRE(out.attention->value(i, j) == Catch::Approx(1.0 / 7).margin(1e-12));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      REQUIRE(out.summary->value(i, j) == Catch::Approx(vbar(0, j)).margin(1e-12));
}

TEST_CASE("attention matches a direct per-element exp/sum oracle") {
  auto cna = small_cna(2, 2, 7);
  cna.w_q->value = Matrix::from_rows({{0.3, -0.2}, {0.5, 0.1}});
  cna.w_k->value = Matrix::from_rows({{-0.4, 0.2}, {0.6, 0.7}});
  cna.w_v->value = Matrix::from_rows({{1.0, 0.5}, {-0.5, 0.25}});
  Matrix f = Matrix::from_rows({{1.0, 2.0}, {0.5, -1.0}, {-2.0, 0.3}});
  Matrix s = Matrix::from_rows({{0.2, 0.9}, {1.5, -0.3}});

  auto out = cross_node_attention(ad::constant(f), ad::constant(s), cna);

  Matrix q = testsupport::matmul_oracle(f, cna.w_q->value);
  Matrix k = testsupport::matmul_oracle(s, cna.w_k->value);
  Matrix v = testsupport::matmul_oracle(s, cna.w_v->value);
  const double inv_sqrt_h = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < 3; ++i) {
    double denom = 0.0;
    std::vector<double> numer(2);
    for (std::size_t j = 0; j < 2; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < 2; ++t) dot += q(i, t) * k(j, t);
      numer[j] = std::exp(inv_sqrt_h * dot);
      denom += numer[j];
    }
    double gsum0 = 0.0, gsum1 = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      const double alpha = numer[j] / denom;
      REQUIRE(std::fabs(out.attention->value(i, j) - alpha) < 1e-12);
      gsum0 += alpha * v(j, 0);
      gsum1 += alpha * v(j, 1);
    }
    REQUIRE(std::fabs(out.summary->value(i, 0) - gsum0) < 1e-12);
    REQUIRE(std::fabs(out.summary->value(i, 1) - gsum1) < 1e-12);
  }
}

TEST_CASE("attention rejects mismatched feature dims") {
  auto cna = small_cna(4, 2, 9);
  RngStream rng(4);
  auto f = ad::constant(random_matrix(3, 4, rng));
  auto s = ad::constant(random_matrix(3, 5, rng));
  REQUIRE_THROWS_AS(cross_node_attention(f, s, cna), ShapeError);
}

TEST_CASE("zero gate parameters average the two modalities") {
  RngStream rng(5);
  GiacParams giac;
  giac.w_g = ad::leaf(Matrix(1, 8, 0.0));
  giac.b_g = ad::leaf(Matrix(1, 1, 0.0));
  Matrix f = random_matrix(6, 4, rng);
  Matrix g = random_matrix(6, 4, rng);
  auto fused = gated_interaction(ad::constant(f), ad::constant(g), giac);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(fused.gate->value(i, 0) == 0.5);
    for (std::size_t j = 0; j < 4; ++j)
      REQUIRE(fused.mixture()(i, j) == Catch::Approx(0.5 * (f(i, j) + g(i, j))).margin(1e-14));
  }
}

TEST_CASE("equal modalities zero the disparity and fix the mixture") {
  RngStream rng(6);
  auto giac = GiacParams::init(4, RngStream(11));
  Matrix f = random_matrix(5, 4, rng);
  auto fused = gated_interaction(ad::constant(f), ad::constant(f), giac);
  REQUIRE(max_abs(fused.disparity()) == 0.0);
  REQUIRE(max_abs_diff(fused.mixture(), f) < 1e-14);
}

TEST_CASE("a saturated gate passes the functional side through") {
  RngStream rng(7);
  GiacParams giac;
  giac.w_g = ad::leaf(Matrix(1, 6, 0.0));
  giac.b_g = ad::leaf(Matrix(1, 1, 20.0));
  Matrix f = random_matrix(4, 3, rng);
  Matrix g = random_matrix(4, 3, rng);
  auto fused = gated_interaction(ad::constant(f), ad::constant(g), giac);
  REQUIRE(max_abs_diff(fused.mixture(), f) < 1e-8);
}

TEST_CASE("fuse_subject equals the manual composition of the two stages") {
  RngStream rng(8);
  auto cna = small_cna(4, 3, 21);
  auto giac = GiacParams::init(4, RngStream(22));
  Matrix f = random_matrix(4, 4, rng);
  Matrix s = random_matrix(6, 4, rng);
  auto fused = fuse_subject(f, s, cna, giac);
  auto manual = gated_interaction(
      ad::constant(f),
      cross_node_attention(ad::constant(f), ad::constant(s), cna).summary, giac);
  REQUIRE(max_abs_diff(fused.z->value, manual.z->value) == 0.0);
  REQUIRE(fused.z->value.cols() == 5 * 4);
}

TEST_CASE("permuting structural rows leaves the fused summary unchanged") {
  RngStream rng(9);
  auto cna = small_cna(5, 4, 31);
  Matrix f = random_matrix(4, 5, rng);
  Matrix s = random_matrix(7, 5, rng);
  auto base = cross_node_attention(ad::constant(f), ad::constant(s), cna);

  std::vector<std::size_t> perm{3, 0, 6, 2, 5, 1, 4};
  Matrix s_perm = slice_rows(s, perm);
  auto permuted = cross_node_attention(ad::constant(f), ad::constant(s_perm), cna);
  REQUIRE(max_abs_diff(base.summary->value, permuted.summary->value) < 1e-12);
  // attention columns permute along with the rows of S
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 7; ++j)
      REQUIRE(permuted.attention->value(i, j) ==
              Catch::Approx(base.attention->value(i, perm[j])).margin(1e-14));
}

TEST_CASE("zero structural features collapse the blocks as expected") {
  RngStream rng(10);
  auto cna = small_cna(3, 2, 41);
  auto giac = GiacParams::init(3, RngStream(42));
  Matrix f = random_matrix(5, 3, rng);
  Matrix s(4, 3, 0.0);
  auto fused = fuse_subject(f, s, cna, giac);
  REQUIRE(max_abs(fused.structural_summary()) == 0.0);
  REQUIRE(max_abs(fused.agreement()) == 0.0);
  REQUIRE(max_abs_diff(fused.disparity(), abs_elems(f)) < 1e-14);
  Matrix expected_m = f;
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = 0; j < f.cols(); ++j) expected_m(i, j) *= fused.gate->value(i, 0);
  REQUIRE(max_abs_diff(fused.mixture(), expected_m) < 1e-14);
}

TEST_CASE("fusion invariants hold on random inputs") {
  RngStream rng(11);
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    auto cna = small_cna(6, 4, 100 + trial);
    auto giac = GiacParams::init(6, RngStream(200 + trial));
    Matrix f = random_matrix(5, 6, rng, -2.0, 2.0);
    Matrix s = random_matrix(8, 6, rng, -2.0, 2.0);
    auto att = cross_node_attention(ad::constant(f), ad::constant(s), cna);
    // rows of A sum to one, entries nonnegative
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        REQUIRE(att.attention->value(i, j) >= 0.0);
        sum += att.attention->value(i, j);
      }
      REQUIRE(std::fabs(sum - 1.0) < 1e-9);
    }
    // each summary row lies in the componentwise hull of the value rows
    Matrix v = matmul(s, cna.w_v->value);
    for (std::size_t j = 0; j < 6; ++j) {
      double lo = v(0, j), hi = v(0, j);
      for (std::size_t r = 1; r < 8; ++r) {
        lo = std::min(lo, v(r, j));
        hi = std::max(hi, v(r, j));
      }
      for (std::size_t i = 0; i < 5; ++i) {
        REQUIRE(att.summary->value(i, j) >= lo - 1e-12);
        REQUIRE(att.summary->value(i, j) <= hi + 1e-12);
      }
    }
    auto fused = gated_interaction(ad::constant(f), att.summary, giac);
    REQUIRE(fused.z->value.cols() == 5 * 6);
    for (std::size_t i = 0; i < 5; ++i) {
      REQUIRE(fused.gate->value(i, 0) > 0.0);
      REQUIRE(fused.gate->value(i, 0) < 1.0);
    }
    // block identities: p = f .* g~ and d = |f - g~| and m in the segment [f, g~]
    Matrix fb = fused.functional(), gb = fused.structural_summary();
    REQUIRE(max_abs_diff(fused.agreement(), hadamard(fb, gb)) < 1e-12);
    REQUIRE(max_abs_diff(fused.disparity(), abs_elems(sub(fb, gb))) < 1e-12);
    Matrix mb = fused.mixture();
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        const double lo = std::min(fb(i, j), gb(i, j)) - 1e-12;
        const double hi = std::max(fb(i, j), gb(i, j)) + 1e-12;
        REQUIRE(mb(i, j) >= lo);
        REQUIRE(mb(i, j) <= hi);
      }
  }
}

TEST_CASE("all fusion parameters pass the finite-difference check") {
  RngStream rng(12);
  auto cna = small_cna(4, 3, 51);
  auto giac = GiacParams::init(4, RngStream(52));
  Matrix f = random_matrix(3, 4, rng);
  Matrix s = random_matrix(5, 4, rng);
  Matrix readout = random_matrix(1, 20, rng);

  std::vector<ad::Var> params{cna.w_q, cna.w_k, cna.w_v, giac.w_g, giac.b_g};
  auto forward = [&]() {
    auto fused = fuse_subject(f, s, cna, giac);
    // scalar readout over Z
    return ad::sum_to_scalar(ad::hadamard(ad::mean_rows(fused.z), ad::constant(readout)));
  };
  REQUIRE(finite_diff_max_rel_err(forward, params) < 1e-4);
}
