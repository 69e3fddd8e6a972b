#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/forest.hpp"
#include "brainmap/io.hpp"

namespace brainmap {

inline constexpr const char* kVersion = "brainmap 0.1.0";

/// One flat key=value document driving every stage. Unknown keys are
/// rejected; every run embeds the resolved form in its outputs.
struct RunConfig {
  // run
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t folds = 5;
  std::string features = "adjacency-row";  // or "file"

  // atlas-guided filtering
  bool use_filter = true;
  std::size_t filter_repeats = 10;
  std::size_t rf_trees = 100;
  std::size_t rf_max_depth = 8;
  std::size_t rf_min_leaf = 2;
  std::size_t rf_features_per_split = 0;  // 0 -> sqrt(D)

  // fusion
  std::string fusion_mode = "agif";  // or "product" (ablation)
  std::size_t cna_dim = 64;          // attention space H
  std::size_t giac_dim = 32;         // fusion projection width (first pointwise layer)

  // distillation
  std::size_t k_remove = 3;
  double masking_rate = 0.2;
  std::string loading_mode = "sigma-weighted";  // or "first-component"

  // graph + classifier
  std::size_t hidden_width = 128;  // later pointwise layers, GCN width ("neurons")
  std::size_t pointwise_layers = 2;
  std::size_t pe_dim = 8;
  bool pe_after_pointwise = false;
  double dropout = 0.1;
  std::string readout = "mean";  // or "max"
  std::size_t sparsify_degree = 0;  // 0 keeps the cosine graph dense

  // optimiser
  double lr = 0.003;
  double weight_decay = 0.0005;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::size_t patience = 20;
  double val_fraction = 0.15;

  // numerics
  double svd_tol = 1e-10;
  std::size_t svd_max_sweeps = 60;

  // synthetic data generation
  std::size_t gen_subjects = 200;
  std::size_t gen_nodes = 90;
  std::size_t gen_classes = 2;
  std::vector<std::string> gen_planted = {"limbic", "subcortical"};
  double gen_signal = 3.0;
  double gen_noise_sigma = 0.12;
  double gen_coupling = 0.3;
  double gen_structural_sign = 1.0;
  std::size_t gen_noise_rank = 3;
  double gen_factor_mean = 1.0;
  double gen_iid_frac = 0.25;
  std::string gen_format = "csv";  // or "binary"

  // bench / sweep harness
  std::vector<std::size_t> bench_grid = {32, 64, 128, 256};
  std::size_t bench_reps = 5;
  std::size_t bench_epochs = 3;
  std::vector<std::size_t> sweep_values = {16, 32, 64, 128};

  RfConfig rf_config() const {
    RfConfig c;
    c.n_trees = rf_trees;
    c.max_depth = rf_max_depth;
    c.min_leaf = rf_min_leaf;
    c.features_per_split = rf_features_per_split;
    return c;
  }

  void validate() const {
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (masking_rate < 0.0 || masking_rate >= 1.0)
      throw ConfigError("masking_rate must be in [0, 1)");
    if (pointwise_layers < 1) throw ConfigError("pointwise_layers must be >= 1");
    if (cna_dim < 1 || giac_dim < 1 || hidden_width < 1)
      throw ConfigError("layer widths must be positive");
    if (lr < 0.0) throw ConfigError("lr must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (fusion_mode != "agif" && fusion_mode != "product")
      throw ConfigError("fusion_mode must be agif or product");
    if (readout != "mean" && readout != "max")
      throw ConfigError("readout must be mean or max");
    if (features != "adjacency-row" && features != "file")
      throw ConfigError("features must be adjacency-row or file");
    if (loading_mode != "sigma-weighted" && loading_mode != "first-component")
      throw ConfigError("loading_mode must be sigma-weighted or first-component");
    if (val_fraction <= 0.0 || val_fraction >= 0.5)
      throw ConfigError("val_fraction must be in (0, 0.5)");
  }

  /// Named hyperparameter presets.
  void apply_preset(const std::string& name) {
    if (name == "adni-profile") {
      cna_dim = 64;
      giac_dim = 32;
      hidden_width = 128;
    } else if (name == "ppmi-profile") {
      cna_dim = 128;
      giac_dim = 128;
      hidden_width = 32;
    } else {
      throw ConfigError("unknown preset: " + name + " (adni-profile, ppmi-profile)");
    }
  }

  void set(const std::string& key, const std::string& raw);
  void apply_text(const std::string& text);
  void apply_file(const fs::path& path) { apply_text(read_text(path)); }
  Json to_json() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline std::string strip_quotes(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got \"" + v + "\"");
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const auto out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got \"" + v + "\"");
  }
}

inline double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got \"" + v + "\"");
  }
}

inline std::vector<std::string> parse_string_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(strip_quotes(v));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  for (const auto& s : parse_string_list(v)) out.push_back(parse_u64(s, key));
  return out;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = strip_quotes(trim(raw));
  if (key == "seed") seed = parse_u64(v, key);
  else if (key == "threads") threads = parse_u64(v, key);
  else if (key == "folds") folds = parse_u64(v, key);
  else if (key == "features") features = v;
  else if (key == "use_filter") use_filter = parse_bool(v, key);
  else if (key == "filter_repeats") filter_repeats = parse_u64(v, key);
  else if (key == "rf_trees") rf_trees = parse_u64(v, key);
  else if (key == "rf_max_depth") rf_max_depth = parse_u64(v, key);
  else if (key == "rf_min_leaf") rf_min_leaf = parse_u64(v, key);
  else if (key == "rf_features_per_split") rf_features_per_split = parse_u64(v, key);
  else if (key == "fusion_mode") fusion_mode = v;
  else if (key == "cna_dim") cna_dim = parse_u64(v, key);
  else if (key == "giac_dim") giac_dim = parse_u64(v, key);
  else if (key == "k_remove") k_remove = parse_u64(v, key);
  else if (key == "masking_rate") masking_rate = parse_double(v, key);
  else if (key == "loading_mode") loading_mode = v;
  else if (key == "hidden_width") hidden_width = parse_u64(v, key);
  else if (key == "pointwise_layers") pointwise_layers = parse_u64(v, key);
  else if (key == "pe_dim") pe_dim = parse_u64(v, key);
  else if (key == "pe_after_pointwise") pe_after_pointwise = parse_bool(v, key);
  else if (key == "dropout") dropout = parse_double(v, key);
  else if (key == "readout") readout = v;
  else if (key == "sparsify_degree") sparsify_degree = parse_u64(v, key);
  else if (key == "lr") lr = parse_double(v, key);
  else if (key == "weight_decay") weight_decay = parse_double(v, key);
  else if (key == "batch_size") batch_size = parse_u64(v, key);
  else if (key == "epochs") epochs = parse_u64(v, key);
  else if (key == "patience") patience = parse_u64(v, key);
  else if (key == "val_fraction") val_fraction = parse_double(v, key);
  else if (key == "svd_tol") svd_tol = parse_double(v, key);
  else if (key == "svd_max_sweeps") svd_max_sweeps = parse_u64(v, key);
  else if (key == "gen_subjects") gen_subjects = parse_u64(v, key);
  else if (key == "gen_nodes") gen_nodes = parse_u64(v, key);
  else if (key == "gen_classes") gen_classes = parse_u64(v, key);
  else if (key == "gen_planted") gen_planted = parse_string_list(v);
  else if (key == "gen_signal") gen_signal = parse_double(v, key);
  else if (key == "gen_noise_sigma") gen_noise_sigma = parse_double(v, key);
  else if (key == "gen_coupling") gen_coupling = parse_double(v, key);
  else if (key == "gen_structural_sign") gen_structural_sign = parse_double(v, key);
  else if (key == "gen_noise_rank") gen_noise_rank = parse_u64(v, key);
  else if (key == "gen_factor_mean") gen_factor_mean = parse_double(v, key);
  else if (key == "gen_iid_frac") gen_iid_frac = parse_double(v, key);
  else if (key == "gen_format") gen_format = v;
  else if (key == "bench_grid") bench_grid = parse_size_list(v, key);
  else if (key == "bench_reps") bench_reps = parse_u64(v, key);
  else if (key == "bench_epochs") bench_epochs = parse_u64(v, key);
  else if (key == "sweep_values") sweep_values = parse_size_list(v, key);
  else if (key == "preset") apply_preset(v);
  else throw ConfigError("unknown config key: " + key);
}

inline void RunConfig::apply_text(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  std::vector<std::string> bad;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bad.push_back("line " + std::to_string(lineno) + ": missing '='");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    try {
      set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      bad.push_back(e.what());
    }
  }
  if (!bad.empty()) {
    std::string msg = "config errors:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
  validate();
}

inline Json RunConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["folds"] = folds;
  j["features"] = features;
  j["use_filter"] = use_filter;
  j["filter_repeats"] = filter_repeats;
  j["rf_trees"] = rf_trees;
  j["rf_max_depth"] = rf_max_depth;
  j["rf_min_leaf"] = rf_min_leaf;
  j["rf_features_per_split"] = rf_features_per_split;
  j["fusion_mode"] = fusion_mode;
  j["cna_dim"] = cna_dim;
  j["giac_dim"] = giac_dim;
  j["k_remove"] = k_remove;
  j["masking_rate"] = masking_rate;
  j["loading_mode"] = loading_mode;
  j["hidden_width"] = hidden_width;
  j["pointwise_layers"] = pointwise_layers;
  j["pe_dim"] = pe_dim;
  j["pe_after_pointwise"] = pe_after_pointwise;
  j["dropout"] = dropout;
  j["readout"] = readout;
  j["sparsify_degree"] = sparsify_degree;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["patience"] = patience;
  j["val_fraction"] = val_fraction;
  j["svd_tol"] = svd_tol;
  j["svd_max_sweeps"] = svd_max_sweeps;
  j["gen_subjects"] = gen_subjects;
  j["gen_nodes"] = gen_nodes;
  j["gen_classes"] = gen_classes;
  j["gen_planted"] = gen_planted;
  j["gen_signal"] = gen_signal;
  j["gen_noise_sigma"] = gen_noise_sigma;
  j["gen_coupling"] = gen_coupling;
  j["gen_structural_sign"] = gen_structural_sign;
  j["gen_noise_rank"] = gen_noise_rank;
  j["gen_factor_mean"] = gen_factor_mean;
  j["gen_iid_frac"] = gen_iid_frac;
  j["gen_format"] = gen_format;
  j["bench_grid"] = bench_grid;
  j["bench_reps"] = bench_reps;
  j["bench_epochs"] = bench_epochs;
  j["sweep_values"] = sweep_values;
  return j;
}

}  // namespace brainmap
