#include <catch_amalgamated.hpp>

#include <fstream>

#include "brainmap/datagen.hpp"
#include "brainmap/graph.hpp"
#include "brainmap/io.hpp"
#include "support.hpp"

using namespace brainmap;
using testsupport::random_matrix;
using testsupport::scratch_dir;

namespace {

MultimodalSubject toy_subject(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  MultimodalSubject s;
  s.id = "toy";
  s.adj_f = Matrix(n, n);
  s.adj_s = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double vf = i == j ? 1.0 : rng.uniform(-0.8, 0.8);
      const double vs = i == j ? 1.0 : rng.uniform(-0.8, 0.8);
      s.adj_f(i, j) = s.adj_f(j, i) = vf;
      s.adj_s(i, j) = s.adj_s(j, i) = vs;
    }
  s.feat_f = default_feature_policy(s, Modality::functional);
  s.feat_s = default_feature_policy(s, Modality::structural);
  return s;
}

}  // namespace

TEST_CASE("induce_subgraph with the full mask is identity") {
  auto s = toy_subject(5, 1);
  auto out = induce_subgraph(s, {0, 1, 2, 3, 4});
  REQUIRE(max_abs_diff(out.adj_f, s.adj_f) == 0.0);
  REQUIRE(max_abs_diff(out.feat_s, s.feat_s) == 0.0);
}

TEST_CASE("induce_subgraph picks the mask-indexed entries") {
  auto s = toy_subject(4, 2);
  auto out = induce_subgraph(s, {1, 3});
  REQUIRE(out.adj_f.rows() == 2);
  REQUIRE(out.adj_f(0, 0) == s.adj_f(1, 1));
  REQUIRE(out.adj_f(0, 1) == s.adj_f(1, 3));
  REQUIRE(out.adj_f(1, 0) == s.adj_f(3, 1));
  REQUIRE(out.adj_f(1, 1) == s.adj_f(3, 3));
  REQUIRE(out.feat_f(0, 2) == s.feat_f(1, 2));
}

TEST_CASE("induce_subgraph singleton mask") {
  auto s = toy_subject(4, 3);
  auto out = induce_subgraph(s, {2});
  REQUIRE(out.adj_f.rows() == 1);
  REQUIRE(out.adj_f(0, 0) == s.adj_f(2, 2));
}

TEST_CASE("induce_subgraph rejects an empty mask") {
  auto s = toy_subject(3, 4);
  REQUIRE_THROWS_AS(induce_subgraph(s, {}), ContractError);
}

TEST_CASE("nested induction equals direct induction") {
  auto s = toy_subject(7, 5);
  std::vector<std::size_t> mask_a{0, 2, 3, 5, 6};
  std::vector<std::size_t> mask_b{2, 5, 6};  // subset of mask_a
  // positions of mask_b inside mask_a
  std::vector<std::size_t> rel{1, 3, 4};
  auto direct = induce_subgraph(s, mask_b);
  auto nested = induce_subgraph(induce_subgraph(s, mask_a), rel);
  REQUIRE(max_abs_diff(direct.adj_f, nested.adj_f) == 0.0);
  REQUIRE(max_abs_diff(direct.adj_s, nested.adj_s) == 0.0);
  REQUIRE(max_abs_diff(direct.feat_f, nested.feat_f) == 0.0);
}

TEST_CASE("default feature policy equals adjacency rows") {
  auto s = toy_subject(6, 6);
  Matrix f = default_feature_policy(s, Modality::functional);
  REQUIRE(max_abs_diff(f, s.adj_f) == 0.0);
  MultimodalSubject ident;
  ident.adj_f = Matrix::identity(4);
  REQUIRE(max_abs_diff(default_feature_policy(ident, Modality::functional),
                       Matrix::identity(4)) == 0.0);
}

TEST_CASE("matrix file round trips are bit exact") {
  auto dir = scratch_dir("io");
  RngStream rng(7);
  Matrix m = random_matrix(5, 3, rng, -1.0, 1.0);
  m(0, 0) = 0.1 + 0.2;  // not exactly representable decimal
  write_matrix_csv(m, dir / "m.csv");
  write_matrix_bmap(m, dir / "m.bmap");
  REQUIRE(max_abs_diff(read_matrix_csv(dir / "m.csv"), m) == 0.0);
  REQUIRE(max_abs_diff(read_matrix_bmap(dir / "m.bmap"), m) == 0.0);
}

TEST_CASE("load_dataset round trips a generated toy directory") {
  auto dir = scratch_dir("load");
  AtlasMaskLibrary atlas = load_atlas(fs::path(BRAINMAP_DATA_DIR) / "aal90_subsystems.json");
  GenSpec spec;
  spec.n_subjects = 2;
  spec.seed = 9;
  auto [d, truth] = generate(spec, atlas);
  export_dataset(d, dir);
  Dataset back = load_dataset(dir);
  REQUIRE(back.size() == 2);
  REQUIRE(back.n_nodes == 90);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(back.subjects[i].label == d.subjects[i].label);
    REQUIRE(max_abs_diff(back.subjects[i].adj_f, d.subjects[i].adj_f) == 0.0);
    REQUIRE(max_abs_diff(back.subjects[i].adj_s, d.subjects[i].adj_s) == 0.0);
  }
}

TEST_CASE("load_dataset distinguishes its error cases") {
  auto dir = scratch_dir("loaderr");
  // missing file
  write_text(dir / "manifest.json",
             R"([{"id":"a","label":0,"adj_f":"gone.csv","adj_s":"gone.csv"}])");
  REQUIRE_THROWS_AS(load_dataset(dir), MissingFileError);

  // asymmetric adjacency
  Matrix bad(2, 2, 0.2);
  bad(0, 0) = bad(1, 1) = 1.0;
  bad(0, 1) = 0.9;
  bad(1, 0) = 0.2;
  write_matrix_csv(bad, dir / "bad.csv");
  Matrix good = Matrix::from_rows({{1.0, 0.3}, {0.3, 1.0}});
  write_matrix_csv(good, dir / "good.csv");
  write_text(dir / "manifest.json",
             R"([{"id":"a","label":0,"adj_f":"bad.csv","adj_s":"good.csv"}])");
  REQUIRE_THROWS_AS(load_dataset(dir), AsymmetryError);

  // shape mismatch across subjects
  Matrix small = Matrix::from_rows({{1.0}});
  write_matrix_csv(small, dir / "small.csv");
  write_text(dir / "manifest.json", R"([
    {"id":"a","label":0,"adj_f":"good.csv","adj_s":"good.csv"},
    {"id":"b","label":1,"adj_f":"small.csv","adj_s":"small.csv"}
  ])");
  REQUIRE_THROWS_AS(load_dataset(dir), ShapeError);

  // label out of range
  write_text(dir / "manifest.json",
             R"([{"id":"a","label":-1,"adj_f":"good.csv","adj_s":"good.csv"}])");
  REQUIRE_THROWS_AS(load_dataset(dir), LabelRangeError);
}

TEST_CASE("external feature files override the adjacency-row default") {
  auto dir = scratch_dir("featfile");
  Matrix adj = Matrix::from_rows({{1.0, 0.5}, {0.5, 1.0}});
  write_matrix_csv(adj, dir / "adj.csv");
  RngStream rng(3);
  Matrix feat = random_matrix(2, 16, rng);
  write_matrix_csv(feat, dir / "feat.csv");
  write_text(dir / "manifest.json", R"([
    {"id":"a","label":0,"adj_f":"adj.csv","adj_s":"adj.csv",
     "feat_f":"feat.csv","feat_s":"feat.csv"}
  ])");
  Dataset d = load_dataset(dir, "manifest.json", FeaturePolicy::file);
  REQUIRE(d.feat_dim == 16);
  REQUIRE(max_abs_diff(d.subjects[0].feat_f, feat) == 0.0);
}

TEST_CASE("atlas library loads, validates, and keeps all at index 0") {
  AtlasMaskLibrary atlas = load_atlas(fs::path(BRAINMAP_DATA_DIR) / "aal90_subsystems.json");
  REQUIRE(atlas.masks[0].name == "all");
  REQUIRE(atlas.masks[0].roi.size() == 90);
  REQUIRE(atlas.size() == 10);
  REQUIRE_NOTHROW(atlas.validate(90));
  REQUIRE_THROWS_AS(atlas.validate(50), ContractError);
  // the nine subsystems partition the 90 nodes
  std::vector<int> cover(90, 0);
  for (std::size_t k = 1; k < atlas.size(); ++k)
    for (auto v : atlas[k].roi) cover[v]++;
  for (int c : cover) REQUIRE(c == 1);
}
