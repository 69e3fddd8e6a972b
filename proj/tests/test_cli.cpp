#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <string>

#include "brainmap/checkpoint.hpp"
#include "brainmap/datagen.hpp"
#include "brainmap/io.hpp"
#include "brainmap/model.hpp"
#include "support.hpp"

using namespace brainmap;
using testsupport::scratch_dir;

namespace {

const std::string kCli = BRAINMAP_CLI_PATH;
const std::string kAtlas = std::string(BRAINMAP_DATA_DIR) + "/aal90_subsystems.json";

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path write_small_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path p = dir / "cfg.txt";
  write_text(p, R"(
gen_subjects = 24
gen_signal = 4.0
epochs = 4
folds = 2
rf_trees = 15
filter_repeats = 3
cna_dim = 8
giac_dim = 8
hidden_width = 16
batch_size = 8
)" + extra);
  return p;
}

/// Strips wall-time and memory readings so reports can be compared bytewise.
void strip_timing(Json& j) {
  if (j.is_object()) {
    j.erase("epoch_time_s");
    j.erase("peak_mem_bytes");
    j.erase("epoch_time_s_mean");
    for (auto& [k, v] : j.items()) strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timing(v);
  }
}

}  // namespace

TEST_CASE("gen then filter recovers the planted union through the CLI") {
  auto dir = scratch_dir("cli_genfilter");
  auto cfg = write_small_config(dir, "gen_subjects = 60\n");
  REQUIRE(run("gen --out " + (dir / "data").string() + " --seed 5 --config " + cfg.string() +
                  " --atlas " + kAtlas,
              dir / "gen.log") == 0);
  REQUIRE(fs::exists(dir / "data" / "manifest.json"));
  REQUIRE(fs::exists(dir / "data" / "ground_truth.json"));

  REQUIRE(run("filter --data " + (dir / "data").string() + " --out " +
                  (dir / "filter.json").string() + " --modality f --seed 5 --config " +
                  cfg.string() + " --atlas " + kAtlas,
              dir / "filter.log") == 0);
  Json report = Json::parse(read_text(dir / "filter.json"));
  auto truth = load_ground_truth(dir / "data" / "ground_truth.json");
  auto unioned = report.at("reports")[0].at("union").get<std::vector<std::size_t>>();
  // the selected union must cover the planted node set
  for (std::size_t v : truth.planted_nodes)
    REQUIRE(std::find(unioned.begin(), unioned.end(), v) != unioned.end());
  // resolved config, seed, version, and input hashes are embedded
  REQUIRE(report.at("version").get<std::string>() == kVersion);
  REQUIRE(report.at("seed").get<std::uint64_t>() == 5);
  REQUIRE(report.contains("config"));
  REQUIRE(report.at("input_hashes").contains("manifest"));
  // ranked region importance is part of the report
  REQUIRE(report.at("reports")[0].at("ranking").size() == 9);
}

TEST_CASE("zero-epoch training writes the initialization checkpoint") {
  auto dir = scratch_dir("cli_zeroepoch");
  auto cfg = write_small_config(dir, "epochs = 0\nuse_filter = false\n");
  REQUIRE(run("gen --out " + (dir / "data").string() + " --seed 7 --config " + cfg.string() +
                  " --atlas " + kAtlas,
              dir / "gen.log") == 0);
  REQUIRE(run("train --data " + (dir / "data").string() + " --out " + (dir / "run").string() +
                  " --seed 7 --config " + cfg.string() + " --atlas " + kAtlas,
              dir / "train.log") == 0);

  // reproduce the initialization in-process and compare checkpoint bytes
  RunConfig rc;
  rc.apply_file(cfg);
  rc.seed = 7;
  Dataset d = load_dataset(dir / "data");
  AtlasMaskLibrary atlas = load_atlas(kAtlas);
  auto out = train(d, atlas, rc);
  save_checkpoint(out.folds[0].model, dir / "ref.ckpt");
  REQUIRE(read_text(dir / "ref.ckpt") == read_text(dir / "run" / "fold_0.ckpt"));
}

TEST_CASE("eval twice produces byte-identical reports") {
  auto dir = scratch_dir("cli_evaltwice");
  auto cfg = write_small_config(dir);
  REQUIRE(run("gen --out " + (dir / "data").string() + " --seed 9 --config " + cfg.string() +
                  " --atlas " + kAtlas,
              dir / "gen.log") == 0);
  REQUIRE(run("train --data " + (dir / "data").string() + " --out " + (dir / "run").string() +
                  " --seed 9 --config " + cfg.string() + " --atlas " + kAtlas,
              dir / "train.log") == 0);
  for (int i = 0; i < 2; ++i)
    REQUIRE(run("eval --model " + (dir / "run" / "fold_0.ckpt").string() + " --data " +
                    (dir / "data").string() + " --out " + (dir / ("eval" + std::to_string(i) + ".json")).string() +
                    " --atlas " + kAtlas,
                dir / "eval.log") == 0);
  REQUIRE(read_text(dir / "eval0.json") == read_text(dir / "eval1.json"));
}

TEST_CASE("training twice with one thread is byte-identical apart from timing") {
  auto dir = scratch_dir("cli_determinism");
  auto cfg = write_small_config(dir);
  REQUIRE(run("gen --out " + (dir / "data").string() + " --seed 11 --config " + cfg.string() +
                  " --atlas " + kAtlas,
              dir / "gen.log") == 0);
  for (int i = 0; i < 2; ++i)
    REQUIRE(run("train --data " + (dir / "data").string() + " --out " +
                    (dir / ("run" + std::to_string(i))).string() + " --seed 11 --threads 1 --config " +
                    cfg.string() + " --atlas " + kAtlas,
                dir / "train.log") == 0);
  REQUIRE(read_text(dir / "run0" / "fold_0.ckpt") == read_text(dir / "run1" / "fold_0.ckpt"));
  REQUIRE(read_text(dir / "run0" / "fold_1.ckpt") == read_text(dir / "run1" / "fold_1.ckpt"));
  Json a = Json::parse(read_text(dir / "run0" / "metrics.json"));
  Json b = Json::parse(read_text(dir / "run1" / "metrics.json"));
  strip_timing(a);
  strip_timing(b);
  REQUIRE(a.dump() == b.dump());
}

TEST_CASE("bench emits monotone CNA timings and nonzero memory") {
  auto dir = scratch_dir("cli_bench");
  write_text(dir / "cfg.txt", R"(
bench_grid = 16,64
bench_reps = 3
bench_epochs = 1
gen_subjects = 16
epochs = 1
folds = 2
rf_trees = 5
filter_repeats = 2
cna_dim = 8
giac_dim = 8
hidden_width = 16
batch_size = 8
)");
  REQUIRE(run("bench --out " + (dir / "bench").string() + " --seed 3 --config " +
                  (dir / "cfg.txt").string() + " --atlas " + kAtlas,
              dir / "bench.log") == 0);
  Json j = Json::parse(read_text(dir / "bench" / "bench.json"));
  const auto& rows = j.at("bench").at("rows");
  double t16 = 0, t64 = 0;
  std::uint64_t m16 = 0, m64 = 0;
  for (const auto& row : rows) {
    if (row.at("stage") == "cna" && row.at("n_nodes") == 16) {
      t16 = row.at("seconds").get<double>();
      m16 = row.at("peak_bytes").get<std::uint64_t>();
    }
    if (row.at("stage") == "cna" && row.at("n_nodes") == 64) {
      t64 = row.at("seconds").get<double>();
      m64 = row.at("peak_bytes").get<std::uint64_t>();
    }
  }
  REQUIRE(t16 > 0.0);
  REQUIRE(t64 > t16);
  REQUIRE(m16 > 0);
  REQUIRE(m64 > m16);
  REQUIRE(j.at("bench").at("epoch_time_ratio").get<double>() > 0.0);
  REQUIRE(fs::exists(dir / "bench" / "bench.csv"));
}

TEST_CASE("a single-point sweep reproduces the train result") {
  auto dir = scratch_dir("cli_sweep");
  auto cfg = write_small_config(dir, "sweep_values = 16\nuse_filter = false\n");
  REQUIRE(run("gen --out " + (dir / "data").string() + " --seed 13 --config " + cfg.string() +
                  " --atlas " + kAtlas,
              dir / "gen.log") == 0);
  REQUIRE(run("train --data " + (dir / "data").string() + " --out " + (dir / "run").string() +
                  " --seed 13 --config " + cfg.string() + " --atlas " + kAtlas,
              dir / "train.log") == 0);
  REQUIRE(run("sweep --axis neurons --out " + (dir / "sweep").string() + " --seed 13 --config " +
                  cfg.string() + " --atlas " + kAtlas,
              dir / "sweep.log") == 0);
  Json metrics = Json::parse(read_text(dir / "run" / "metrics.json"));
  Json sweep = Json::parse(read_text(dir / "sweep" / "sweep.json"));
  REQUIRE(sweep.at("results").size() == 1);
  REQUIRE(sweep.at("results")[0].at("acc").get<double>() ==
          metrics.at("summary").at("acc_mean").get<double>());
}

TEST_CASE("the cna_giac sweep runs every grid pair") {
  auto dir = scratch_dir("cli_sweepgrid");
  auto cfg = write_small_config(dir,
                                "sweep_values = 4,8\nuse_filter = false\ngen_subjects = 16\n"
                                "epochs = 2\n");
  REQUIRE(run("sweep --axis cna_giac --out " + (dir / "sweep").string() + " --seed 15 --config " +
                  cfg.string() + " --atlas " + kAtlas,
              dir / "sweep.log") == 0);
  Json sweep = Json::parse(read_text(dir / "sweep" / "sweep.json"));
  REQUIRE(sweep.at("results").size() == 4);  // |grid| rows
}

TEST_CASE("cli failure modes use distinct exit codes and machine-readable errors") {
  auto dir = scratch_dir("cli_errors");
  // unknown sweep axis
  REQUIRE(run("sweep --axis widgets --out " + (dir / "s").string() + " --atlas " + kAtlas,
              dir / "axis.log") == 2);
  // config parse errors list the offending keys
  write_text(dir / "bad.txt", "seed = 1\nmystery_knob = 4\n");
  const int code = run("gen --out " + (dir / "d").string() + " --config " +
                           (dir / "bad.txt").string() + " --atlas " + kAtlas,
                       dir / "badcfg.log");
  REQUIRE(code == 2);
  const std::string log = read_text(dir / "badcfg.log");
  REQUIRE(log.find("mystery_knob") != std::string::npos);
  // missing data directory is a runtime error
  REQUIRE(run("train --data " + (dir / "nope").string() + " --out " + (dir / "r").string() +
                  " --atlas " + kAtlas,
              dir / "miss.log") == 1);
}
