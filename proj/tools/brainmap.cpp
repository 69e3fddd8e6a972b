// Command-line front end: data generation, atlas-guided filtering, training,
// evaluation, benchmarking, and hyperparameter sweeps over the same library
// the tests exercise.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brainmap/bench.hpp"
#include "brainmap/checkpoint.hpp"
#include "brainmap/config.hpp"
#include "brainmap/datagen.hpp"
#include "brainmap/filter.hpp"
#include "brainmap/io.hpp"
#include "brainmap/model.hpp"

using namespace brainmap;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string atlas_path = "data/aal90_subsystems.json";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "key=value config file");
  cmd->add_option("--preset", o.preset, "named preset (adni-profile, ppmi-profile)");
  cmd->add_option("--seed", o.seed, "overrides the config seed");
  cmd->add_option("--threads", o.threads, "worker threads for fold-level parallelism");
  cmd->add_option("--atlas", o.atlas_path, "atlas mask library (JSON)");
}

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg;
  if (!o.preset.empty()) cfg.apply_preset(o.preset);
  if (!o.config_path.empty()) cfg.apply_file(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  cfg.validate();
  return cfg;
}

GenSpec gen_spec_from(const RunConfig& cfg) {
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
  return spec;
}

Json envelope(const std::string& command, const RunConfig& cfg,
              const std::vector<std::pair<std::string, fs::path>>& inputs) {
  Json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = cfg.seed;
  j["config"] = cfg.to_json();
  Json hashes = Json::object();
  for (const auto& [name, path] : inputs)
    if (fs::exists(path)) hashes[name] = fnv1a_file(path);
  j["input_hashes"] = hashes;
  return j;
}

Json fold_metrics_json(const FoldMetrics& m) {
  Json j;
  j["acc"] = m.acc;
  if (m.auc)
    j["auc"] = *m.auc;
  else
    j["auc"] = nullptr;
  Json conf = Json::array();
  for (std::size_t i = 0; i < m.confusion_matrix.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t k = 0; k < m.confusion_matrix.cols(); ++k)
      row.push_back(m.confusion_matrix(i, k));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  j["epochs_run"] = m.epochs_run;
  j["epoch_time_s"] = m.epoch_time_s;
  j["peak_mem_bytes"] = m.peak_mem_bytes;
  return j;
}

void write_report(const Json& j, const fs::path& path) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  write_text(path, j.dump(2) + "\n");
}

int cmd_gen(const CommonOpts& opts, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opts);
  AtlasMaskLibrary atlas = load_atlas(opts.atlas_path);
  auto [dataset, truth] = generate(gen_spec_from(cfg), atlas);
  fs::create_directories(out_dir);
  export_dataset(dataset, out_dir,
                 cfg.gen_format == "binary" ? ExportFormat::binary : ExportFormat::csv);
  save_ground_truth(truth, fs::path(out_dir) / "ground_truth.json");
  save_atlas(atlas, fs::path(out_dir) / "atlas.json");

  Json j = envelope("gen", cfg, {{"atlas", opts.atlas_path}});
  j["subjects"] = dataset.size();
  j["n_nodes"] = dataset.n_nodes;
  j["n_classes"] = dataset.n_classes;
  j["planted_nodes"] = truth.planted_nodes;
  j["out"] = out_dir;
  write_report(j, fs::path(out_dir) / "gen_report.json");
  std::printf("generated %zu subjects over %zu nodes -> %s\n", dataset.size(),
              dataset.n_nodes, out_dir.c_str());
  return 0;
}

int cmd_filter(const CommonOpts& opts, const std::string& data_dir, const std::string& out_path,
               const std::string& modality, const std::string& export_reduced) {
  RunConfig cfg = resolve_config(opts);
  AtlasMaskLibrary atlas = load_atlas(opts.atlas_path);
  Dataset d = load_dataset(data_dir, "manifest.json",
                           cfg.features == "file" ? FeaturePolicy::file
                                                  : FeaturePolicy::adjacency_row);

  std::vector<Modality> mods;
  if (modality == "f")
    mods = {Modality::functional};
  else if (modality == "s")
    mods = {Modality::structural};
  else if (modality == "both")
    mods = {Modality::functional, Modality::structural};
  else
    throw ConfigError("modality must be f, s, or both");

  Json j = envelope("filter", cfg, {{"manifest", fs::path(data_dir) / "manifest.json"},
                                    {"atlas", opts.atlas_path}});
  Json reports = Json::array();
  for (Modality m : mods) {
    auto res = filter_subgraphs(d, atlas, m, cfg.filter_repeats, RngStream(cfg.seed),
                                cfg.rf_config());
    Json r = res.report.to_json();
    // region importance: per-mask score against the whole-brain baseline
    Json ranking = Json::array();
    std::vector<std::size_t> order;
    for (std::size_t k = 1; k < atlas.size(); ++k) order.push_back(k);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return res.report.acc[a] > res.report.acc[b];
    });
    for (std::size_t k : order)
      ranking.push_back({{"mask", atlas[k].name},
                         {"acc", res.report.acc[k]},
                         {"delta_vs_baseline", res.report.acc[k] - res.report.baseline}});
    r["ranking"] = ranking;
    reports.push_back(r);
    std::printf("modality %c: baseline %.4f, union %zu nodes, selected %zu masks\n",
                modality_tag(m), res.report.baseline, res.report.unioned.size(),
                res.report.selected.size());
    if (!export_reduced.empty()) {
      export_dataset(res.reduced, fs::path(export_reduced) / std::string(1, modality_tag(m)),
                     cfg.gen_format == "binary" ? ExportFormat::binary : ExportFormat::csv);
    }
  }
  j["reports"] = reports;
  write_report(j, out_path);
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opts);
  AtlasMaskLibrary atlas = load_atlas(opts.atlas_path);
  Dataset d = load_dataset(data_dir, "manifest.json",
                           cfg.features == "file" ? FeaturePolicy::file
                                                  : FeaturePolicy::adjacency_row);
  TrainOutput out = train(d, atlas, cfg);

  fs::create_directories(out_dir);
  Json j = envelope("train", cfg, {{"manifest", fs::path(data_dir) / "manifest.json"},
                                   {"atlas", opts.atlas_path}});
  Json folds = Json::object();
  for (const auto& f : out.folds) {
    const std::string ckpt = "fold_" + std::to_string(f.metrics.fold) + ".ckpt";
    save_checkpoint(f.model, fs::path(out_dir) / ckpt);
    Json fj = fold_metrics_json(f.metrics);
    fj["checkpoint"] = ckpt;
    fj["union_f"] = f.model.union_f;
    fj["union_s"] = f.model.union_s;
    if (cfg.use_filter) {
      fj["filter_f"] = f.metrics.filter_f.to_json();
      fj["filter_s"] = f.metrics.filter_s.to_json();
    }
    folds["fold_" + std::to_string(f.metrics.fold)] = fj;
  }
  j["folds"] = folds;
  Json summary;
  summary["acc_mean"] = out.mean_acc();
  if (out.mean_auc())
    summary["auc_mean"] = *out.mean_auc();
  else
    summary["auc_mean"] = nullptr;
  summary["epoch_time_s_mean"] = out.mean_epoch_time_s();
  j["summary"] = summary;
  write_report(j, fs::path(out_dir) / "metrics.json");

  std::printf("%-6s %-8s %-8s %-10s %-12s\n", "fold", "acc", "auc", "epochs", "epoch_s");
  for (const auto& f : out.folds)
    std::printf("%-6zu %-8.4f %-8.4f %-10zu %-12.4f\n", f.metrics.fold, f.metrics.acc,
                f.metrics.auc ? *f.metrics.auc : std::nan(""), f.metrics.epochs_run,
                f.metrics.epoch_time_s);
  std::printf("mean   %-8.4f %-8.4f\n", out.mean_acc(),
              out.mean_auc() ? *out.mean_auc() : std::nan(""));
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& model_path, const std::string& data_dir,
             const std::string& out_path) {
  TrainedModel model = load_checkpoint(model_path);
  RunConfig cfg = model.config;
  if (opts.threads) cfg.threads = *opts.threads;
  Dataset d = load_dataset(data_dir, "manifest.json",
                           cfg.features == "file" ? FeaturePolicy::file
                                                  : FeaturePolicy::adjacency_row);
  EvalResult ev = evaluate(model, d.subjects);

  Json j = envelope("eval", cfg, {{"manifest", fs::path(data_dir) / "manifest.json"},
                                  {"model", model_path}});
  j["acc"] = ev.acc;
  if (ev.auc)
    j["auc"] = *ev.auc;
  else
    j["auc"] = nullptr;
  Json conf = Json::array();
  for (std::size_t i = 0; i < ev.confusion_matrix.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t k = 0; k < ev.confusion_matrix.cols(); ++k)
      row.push_back(ev.confusion_matrix(i, k));
    conf.push_back(row);
  }
  j["confusion"] = conf;

  // region importance: mean attention mass received by each atlas mask
  if (model.config.fusion_mode == "agif" && fs::exists(opts.atlas_path)) {
    AtlasMaskLibrary atlas = load_atlas(opts.atlas_path);
    std::vector<double> node_mass(model.n_nodes, 0.0);
    for (const auto& s : d.subjects) {
      Matrix f = slice_rows(s.feat_f, model.union_f);
      Matrix st = slice_rows(s.feat_s, model.union_s);
      auto att = cross_node_attention(ad::constant(f), ad::constant(st), model.params.cna)
                     .attention->value;
      for (std::size_t c = 0; c < att.cols(); ++c) {
        double mass = 0.0;
        for (std::size_t r = 0; r < att.rows(); ++r) mass += att(r, c);
        node_mass[model.union_s[c]] += mass / double(att.rows());
      }
    }
    for (auto& v : node_mass) v /= double(d.subjects.size());
    Json ranking = Json::array();
    std::vector<std::pair<double, std::string>> masses;
    for (std::size_t k = 1; k < atlas.size(); ++k) {
      double m = 0.0;
      for (std::size_t v : atlas[k].roi) m += node_mass[v];
      masses.emplace_back(m / double(atlas[k].roi.size()), atlas[k].name);
    }
    std::stable_sort(masses.begin(), masses.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [m, name] : masses)
      ranking.push_back({{"mask", name}, {"attention_mass", m}});
    j["region_importance"] = ranking;
  }

  write_report(j, out_path);
  std::printf("acc %.4f  auc %s  (%zu subjects)\n", ev.acc,
              ev.auc ? format_double(*ev.auc).c_str() : "n/a", d.subjects.size());
  return 0;
}

int cmd_bench(const CommonOpts& opts, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opts);
  AtlasMaskLibrary atlas = load_atlas(opts.atlas_path);
  BenchReport report = run_bench(cfg, atlas);

  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "bench.csv", bench_csv(report));
  Json j = envelope("bench", cfg, {{"atlas", opts.atlas_path}});
  j["bench"] = bench_json(report);
  write_report(j, fs::path(out_dir) / "bench.json");

  std::printf("%-18s %-8s %-12s %-12s\n", "stage", "nodes", "seconds", "peak_bytes");
  for (const auto& row : report.rows)
    std::printf("%-18s %-8zu %-12.6f %-12llu\n", row.stage.c_str(), row.n_nodes, row.seconds,
                static_cast<unsigned long long>(row.peak_bytes));
  std::printf("cna log-log slope: %.3f\n", report.cna_loglog_slope);
  std::printf("epoch time filtered/unfiltered: %.3f (%zu vs %zu nodes)\n",
              report.epoch_time_ratio, report.filtered_nodes, report.unfiltered_nodes);
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& axis, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opts);
  if (axis != "cna_giac" && axis != "neurons") throw ConfigError("unknown sweep axis: " + axis);
  AtlasMaskLibrary atlas = load_atlas(opts.atlas_path);
  auto [data, truth] = generate(gen_spec_from(cfg), atlas);

  struct Row {
    std::size_t cna, giac, neurons;
    double acc;
    std::optional<double> auc;
  };
  std::vector<Row> rows;
  if (axis == "neurons") {
    for (std::size_t width : cfg.sweep_values) {
      RunConfig run = cfg;
      run.hidden_width = width;
      auto out = train(data, atlas, run);
      rows.push_back({run.cna_dim, run.giac_dim, width, out.mean_acc(), out.mean_auc()});
    }
  } else {
    for (std::size_t c : cfg.sweep_values)
      for (std::size_t g : cfg.sweep_values) {
        RunConfig run = cfg;
        run.cna_dim = c;
        run.giac_dim = g;
        auto out = train(data, atlas, run);
        rows.push_back({c, g, run.hidden_width, out.mean_acc(), out.mean_auc()});
      }
  }

  fs::create_directories(out_dir);
  std::string csv = "cna_dim,giac_dim,hidden_width,acc,auc\n";
  Json jrows = Json::array();
  for (const auto& r : rows) {
    csv += std::to_string(r.cna) + "," + std::to_string(r.giac) + "," +
           std::to_string(r.neurons) + "," + format_double(r.acc) + "," +
           (r.auc ? format_double(*r.auc) : "") + "\n";
    Json jr;
    jr["cna_dim"] = r.cna;
    jr["giac_dim"] = r.giac;
    jr["hidden_width"] = r.neurons;
    jr["acc"] = r.acc;
    if (r.auc)
      jr["auc"] = *r.auc;
    else
      jr["auc"] = nullptr;
    jrows.push_back(jr);
  }
  write_text(fs::path(out_dir) / "sweep.csv", csv);
  Json j = envelope("sweep", cfg, {{"atlas", opts.atlas_path}});
  j["axis"] = axis;
  j["results"] = jrows;
  write_report(j, fs::path(out_dir) / "sweep.json");

  std::printf("%-8s %-8s %-8s %-8s %-8s\n", "cna", "giac", "width", "acc", "auc");
  for (const auto& r : rows)
    std::printf("%-8zu %-8zu %-8zu %-8.4f %-8.4f\n", r.cna, r.giac, r.neurons, r.acc,
                r.auc ? *r.auc : std::nan(""));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal brain-graph pipeline: atlas-guided filtering, attention-gated "
               "fusion, feature distillation, GCN classification"};
  app.require_subcommand(1);

  CommonOpts gen_opts, filter_opts, train_opts, eval_opts, bench_opts, sweep_opts;
  std::string gen_out, filter_data, filter_out, filter_modality = "both", filter_export;
  std::string train_data, train_out, eval_model, eval_data, eval_out, bench_out;
  std::string sweep_axis, sweep_out;

  auto* gen = app.add_subcommand("gen", "generate a synthetic multimodal dataset");
  add_common(gen, gen_opts);
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* filter = app.add_subcommand("filter", "atlas-guided subgraph filtering");
  add_common(filter, filter_opts);
  filter->add_option("--data", filter_data, "dataset directory (manifest.json)")->required();
  filter->add_option("--out", filter_out, "report path (JSON)")->required();
  filter->add_option("--modality", filter_modality, "f, s, or both");
  filter->add_option("--export-reduced", filter_export, "directory for the reduced dataset");

  auto* tr = app.add_subcommand("train", "k-fold training with per-fold checkpoints");
  add_common(tr, train_opts);
  tr->add_option("--data", train_data, "dataset directory (manifest.json)")->required();
  tr->add_option("--out", train_out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(ev, eval_opts);
  ev->add_option("--model", eval_model, "checkpoint path")->required();
  ev->add_option("--data", eval_data, "dataset directory (manifest.json)")->required();
  ev->add_option("--out", eval_out, "report path (JSON)")->required();

  auto* be = app.add_subcommand("bench", "stage timing and memory benchmarks");
  add_common(be, bench_opts);
  be->add_option("--out", bench_out, "output directory")->required();

  auto* sw = app.add_subcommand("sweep", "hyperparameter sweep on synthetic data");
  add_common(sw, sweep_opts);
  sw->add_option("--axis", sweep_axis, "cna_giac or neurons")->required();
  sw->add_option("--out", sweep_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_opts, gen_out);
    if (filter->parsed())
      return cmd_filter(filter_opts, filter_data, filter_out, filter_modality, filter_export);
    if (tr->parsed()) return cmd_train(train_opts, train_data, train_out);
    if (ev->parsed()) return cmd_eval(eval_opts, eval_model, eval_data, eval_out);
    if (be->parsed()) return cmd_bench(bench_opts, bench_out);
    if (sw->parsed()) return cmd_sweep(sweep_opts, sweep_axis, sweep_out);
  } catch (const ConfigError& e) {
    Json err;
    err["error"] = e.what();
    err["type"] = "config";
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    Json err;
    err["error"] = e.what();
    err["type"] = "runtime";
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
