#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "brainmap/config.hpp"
#include "brainmap/datagen.hpp"
#include "brainmap/fusion.hpp"
#include "brainmap/model.hpp"

namespace brainmap {

/// Median wall time of fn over reps runs (one warmup).
inline double time_median_s(const std::function<void()>& fn, std::size_t reps) {
  fn();
  std::vector<double> times;
  times.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    times.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct BenchRow {
  std::string stage;
  std::size_t n_nodes = 0;
  double seconds = 0.0;
  std::uint64_t peak_bytes = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double cna_loglog_slope = 0.0;
  double filtered_epoch_s = 0.0;
  double unfiltered_epoch_s = 0.0;
  double epoch_time_ratio = 0.0;
  std::size_t filtered_nodes = 0;
  std::size_t unfiltered_nodes = 0;
  std::string memory_method = "matrix-allocator-highwater";
};

/// Per-stage wall time and allocator high-water mark over the node grid,
/// plus a filtered-vs-unfiltered per-epoch comparison on planted synthetic
/// data.
inline BenchReport run_bench(const RunConfig& cfg, const AtlasMaskLibrary& atlas) {
  BenchReport report;
  const std::size_t d_feat = 90;
  RngStream rng(cfg.seed, 0xbe7cULL);

  std::vector<double> grid_x, cna_times;
  for (std::size_t n : cfg.bench_grid) {
    Matrix f(n, d_feat), s(n, d_feat);
    for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-1.0, 1.0);
    CnaParams cna = CnaParams::init(d_feat, cfg.cna_dim, rng.substream(n));
    GiacParams giac = GiacParams::init(d_feat, rng.substream(n + 1));

    const std::uint64_t live0 = AllocTracker::live().load();
    AllocTracker::reset_peak();
    const double t_cna = time_median_s(
        [&]() { cross_node_attention(ad::constant(f), ad::constant(s), cna); },
        cfg.bench_reps);
    report.rows.push_back({"cna", n, t_cna, AllocTracker::peak().load() - live0});
    grid_x.push_back(double(n));
    cna_times.push_back(t_cna);

    AllocTracker::reset_peak();
    const double t_fuse = time_median_s(
        [&]() { fuse_subject(f, s, cna, giac); }, cfg.bench_reps);
    report.rows.push_back({"fusion", n, t_fuse, AllocTracker::peak().load() - live0});

    Matrix z = fuse_subject(f, s, cna, giac).z->value;
    AllocTracker::reset_peak();
    const double t_graph =
        time_median_s([&]() { build_graph(z, cfg.sparsify_degree); }, cfg.bench_reps);
    report.rows.push_back({"graph", n, t_graph, AllocTracker::peak().load() - live0});

    SubjectGraph g = build_graph(z, cfg.sparsify_degree);
    AllocTracker::reset_peak();
    const double t_pe =
        time_median_s([&]() { laplacian_pe(g, cfg.pe_dim); }, cfg.bench_reps);
    report.rows.push_back({"laplacian_pe", n, t_pe, AllocTracker::peak().load() - live0});
  }
  report.cna_loglog_slope = loglog_slope(grid_x, cna_times);

  // filtered vs unfiltered per-epoch time on the same planted dataset
  GenSpec spec;
  spec.n_subjects = cfg.gen_subjects;
  spec.n_nodes = cfg.gen_nodes;
  spec.n_classes = int(cfg.gen_classes);
  spec.planted_masks = cfg.gen_planted;
  spec.signal_strength = cfg.gen_signal;
  spec.noise_sigma = cfg.gen_noise_sigma;
  spec.coupling = cfg.gen_coupling;
  spec.structural_signal_sign = cfg.gen_structural_sign;
  spec.noise_rank = int(cfg.gen_noise_rank);
  spec.factor_mean = cfg.gen_factor_mean;
  spec.iid_noise_frac = cfg.gen_iid_frac;
  spec.seed = cfg.seed;
  auto [data, truth] = generate(spec, atlas);

  RunConfig run = cfg;
  run.epochs = cfg.bench_epochs;
  run.patience = cfg.bench_epochs + 1;
  run.folds = 2;

  run.use_filter = true;
  auto filtered = train(data, atlas, run);
  run.use_filter = false;
  auto unfiltered = train(data, atlas, run);

  report.filtered_epoch_s = filtered.mean_epoch_time_s();
  report.unfiltered_epoch_s = unfiltered.mean_epoch_time_s();
  report.epoch_time_ratio = report.filtered_epoch_s / report.unfiltered_epoch_s;
  report.filtered_nodes = filtered.folds[0].model.union_f.size();
  report.unfiltered_nodes = data.n_nodes;
  report.rows.push_back({"epoch_filtered", report.filtered_nodes, report.filtered_epoch_s, 0});
  report.rows.push_back(
      {"epoch_unfiltered", report.unfiltered_nodes, report.unfiltered_epoch_s, 0});
  return report;
}

inline std::string bench_csv(const BenchReport& r) {
  std::string out = "stage,n_nodes,seconds,peak_bytes\n";
  for (const auto& row : r.rows)
    out += row.stage + "," + std::to_string(row.n_nodes) + "," + format_double(row.seconds) +
           "," + std::to_string(row.peak_bytes) + "\n";
  return out;
}

inline Json bench_json(const BenchReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"stage", row.stage},
                    {"n_nodes", row.n_nodes},
                    {"seconds", row.seconds},
                    {"peak_bytes", row.peak_bytes}});
  Json j;
  j["rows"] = rows;
  j["cna_loglog_slope"] = r.cna_loglog_slope;
  j["filtered_epoch_s"] = r.filtered_epoch_s;
  j["unfiltered_epoch_s"] = r.unfiltered_epoch_s;
  j["epoch_time_ratio"] = r.epoch_time_ratio;
  j["filtered_nodes"] = r.filtered_nodes;
  j["unfiltered_nodes"] = r.unfiltered_nodes;
  j["memory_method"] = r.memory_method;
  return j;
}

}  // namespace brainmap
