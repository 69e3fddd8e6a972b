#include <catch_amalgamated.hpp>

#include "brainmap/forest.hpp"
#include "support.hpp"

using namespace brainmap;
using testsupport::random_matrix;

TEST_CASE("threshold-separable 1D data trains to perfect accuracy") {
  RngStream rng(1);
  Matrix x(40, 1);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = i < 20 ? 0 : 1;
    x(i, 0) = (y[i] == 0 ? -1.0 : 1.0) + rng.uniform(-0.3, 0.3);
  }
  RfConfig cfg;
  cfg.n_trees = 25;
  auto f = RandomForest::fit(x, y, 2, cfg, RngStream(7));
  auto pred = f.predict(x);
  for (std::size_t i = 0; i < 40; ++i) REQUIRE(pred[i] == y[i]);
}

TEST_CASE("XOR needs depth two and gets above 90 percent") {
  // replicated 4-point XOR with slight jitter
  RngStream rng(2);
  const std::size_t reps = 30;
  Matrix x(4 * reps, 2);
  std::vector<int> y(4 * reps);
  const double pts[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (std::size_t i = 0; i < 4 * reps; ++i) {
    const std::size_t p = i % 4;
    x(i, 0) = pts[p][0] + rng.uniform(-0.05, 0.05);
    x(i, 1) = pts[p][1] + rng.uniform(-0.05, 0.05);
    y[i] = int(pts[p][0]) ^ int(pts[p][1]);
  }
  RfConfig cfg;
  cfg.n_trees = 50;
  cfg.max_depth = 4;
  cfg.features_per_split = 2;
  auto f = RandomForest::fit(x, y, 2, cfg, RngStream(11));
  auto pred = f.predict(x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
  REQUIRE(double(correct) / double(y.size()) > 0.9);
}

TEST_CASE("a deep enough forest memorises distinct training points") {
  RngStream rng(3);
  Matrix x = random_matrix(30, 5, rng);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = int(i % 3);
  RfConfig cfg;
  cfg.n_trees = 60;
  cfg.max_depth = 20;
  cfg.min_leaf = 1;
  cfg.features_per_split = 5;
  auto f = RandomForest::fit(x, y, 3, cfg, RngStream(13));
  auto pred = f.predict(x);
  for (std::size_t i = 0; i < 30; ++i) REQUIRE(pred[i] == y[i]);
}

TEST_CASE("single-class training yields a constant classifier") {
  RngStream rng(4);
  Matrix x = random_matrix(10, 3, rng);
  std::vector<int> y(10, 1);
  auto f = RandomForest::fit(x, y, 2, {}, RngStream(5));
  Matrix probe = random_matrix(6, 3, rng);
  for (std::size_t i = 0; i < probe.rows(); ++i) REQUIRE(f.predict_one(probe.row_ptr(i)) == 1);
}

TEST_CASE("fit is deterministic for a fixed stream") {
  RngStream rng(6);
  Matrix x = random_matrix(50, 8, rng);
  std::vector<int> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = int(rng.below(3));
  auto f1 = RandomForest::fit(x, y, 3, {}, RngStream(21, 4));
  auto f2 = RandomForest::fit(x, y, 3, {}, RngStream(21, 4));
  Matrix probe = random_matrix(20, 8, rng);
  for (std::size_t i = 0; i < probe.rows(); ++i)
    REQUIRE(f1.predict_one(probe.row_ptr(i)) == f2.predict_one(probe.row_ptr(i)));
}
