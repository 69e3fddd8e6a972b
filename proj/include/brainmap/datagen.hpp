#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/graph.hpp"
#include "brainmap/io.hpp"
#include "brainmap/matrix.hpp"
#include "brainmap/rng.hpp"

namespace brainmap {

/// Parameters for the synthetic multimodal connectome generator. Class
/// signal is an additive shift of signal_strength * noise_sigma on edges
/// inside the planted node set, so signal_strength reads as an effect size
/// in noise units.
struct GenSpec {
  std::size_t n_subjects = 200;
  std::size_t n_nodes = 90;
  int n_classes = 2;
  std::vector<std::string> planted_masks;
  double signal_strength = 3.0;        // delta
  double noise_sigma = 0.12;
  double coupling = 0.3;               // rho: structural = rho*functional + (1-rho)*own
  double structural_signal_sign = 1.0; // -1 plants opposite-sign structural shifts
  int noise_rank = 3;                  // low-rank subject noise factors; 0 -> iid only
  double factor_mean = 1.0;            // coherent factor loading: survives row pooling
  double iid_noise_frac = 0.25;        // iid perturbation, relative to noise_sigma
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<std::size_t> planted_nodes;  // sorted union of planted masks
  std::vector<std::string> planted_masks;
};

namespace detail {

/// Block-constant community backbone from the atlas subsystems: elevated
/// connectivity within a subsystem, weak background across them.
inline Matrix community_base(std::size_t n, const AtlasMaskLibrary& atlas) {
  constexpr double kWithin = 0.30, kAcross = 0.05;
  std::vector<int> group(n, -1);
  for (std::size_t k = 1; k < atlas.size(); ++k)
    for (std::size_t v : atlas[k].roi)
      if (group[v] < 0) group[v] = int(k);
  Matrix base(n, n, kAcross);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (group[i] >= 0 && group[i] == group[j]) base(i, j) = kWithin;
  for (std::size_t i = 0; i < n; ++i) base(i, i) = 1.0;
  return base;
}

inline void add_subject_noise(Matrix& a, const GenSpec& spec, RngStream& rng) {
  const std::size_t n = a.rows();
  if (spec.noise_rank > 0) {
    const double amp = spec.noise_sigma / std::sqrt(double(spec.noise_rank));
    std::vector<double> u(n);
    for (int t = 0; t < spec.noise_rank; ++t) {
      // sign-coherent loadings: the factor's contribution keeps a nonzero
      // mean over any node subset, so regional pooling cannot average the
      // subject-level variation away
      for (auto& v : u) v = spec.factor_mean + rng.normal();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const double e = amp * (u[i] * u[j] - spec.factor_mean * spec.factor_mean);
          a(i, j) += e;
          a(j, i) += e;
        }
    }
  }
  const double iid = spec.noise_sigma * (spec.noise_rank > 0 ? spec.iid_noise_frac : 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double e = iid * rng.normal();
      a(i, j) += e;
      a(j, i) += e;
    }
}

inline void add_planted_shift(Matrix& a, const std::vector<std::size_t>& planted,
                              double shift) {
  for (std::size_t pi : planted)
    for (std::size_t pj : planted)
      if (pi != pj) a(pi, pj) += shift;
}

inline void clamp_unit(Matrix& a) {
  for (std::size_t i = 0; i < a.size(); ++i)
    a.data()[i] = std::clamp(a.data()[i], -1.0, 1.0);
}

}  // namespace detail

/// Builds a dataset of paired functional/structural graphs with a planted
/// disease subnetwork, plus the ground truth needed to score localization.
inline std::pair<Dataset, GroundTruth> generate(const GenSpec& spec,
                                                const AtlasMaskLibrary& atlas) {
  atlas.validate(spec.n_nodes);
  if (spec.n_classes < 2) throw ConfigError("generate: need at least two classes");

  GroundTruth truth;
  truth.planted_masks = spec.planted_masks;
  for (const auto& name : spec.planted_masks) {
    const AtlasMask* m = atlas.find(name);
    if (!m) throw ConfigError("generate: planted mask \"" + name + "\" not in atlas");
    truth.planted_nodes.insert(truth.planted_nodes.end(), m->roi.begin(), m->roi.end());
  }
  std::sort(truth.planted_nodes.begin(), truth.planted_nodes.end());
  truth.planted_nodes.erase(
      std::unique(truth.planted_nodes.begin(), truth.planted_nodes.end()),
      truth.planted_nodes.end());

  const Matrix base = detail::community_base(spec.n_nodes, atlas);
  RngStream root(spec.seed, 0xdadaULL);

  Dataset d;
  d.n_nodes = spec.n_nodes;
  d.n_classes = spec.n_classes;
  d.subjects.resize(spec.n_subjects);
  for (std::size_t i = 0; i < spec.n_subjects; ++i) {
    MultimodalSubject& s = d.subjects[i];
    s.id = "sub" + std::to_string(i);
    s.label = int(i % std::size_t(spec.n_classes));  // balanced by construction
    RngStream sub_rng = root.substream(i);
    RngStream f_rng = sub_rng.substream(1);
    RngStream s_rng = sub_rng.substream(2);

    const double shift_f = double(s.label) * spec.signal_strength * spec.noise_sigma;
    const double shift_s = spec.structural_signal_sign * shift_f;

    Matrix af = base;
    detail::add_planted_shift(af, truth.planted_nodes, shift_f);
    detail::add_subject_noise(af, spec, f_rng);
    for (std::size_t v = 0; v < spec.n_nodes; ++v) af(v, v) = 1.0;
    detail::clamp_unit(af);

    Matrix own = base;
    detail::add_planted_shift(own, truth.planted_nodes, shift_s);
    detail::add_subject_noise(own, spec, s_rng);
    for (std::size_t v = 0; v < spec.n_nodes; ++v) own(v, v) = 1.0;
    detail::clamp_unit(own);

    Matrix as(spec.n_nodes, spec.n_nodes);
    for (std::size_t j = 0; j < as.size(); ++j)
      as.data()[j] = spec.coupling * af.data()[j] + (1.0 - spec.coupling) * own.data()[j];
    detail::clamp_unit(as);

    s.adj_f = std::move(af);
    s.adj_s = std::move(as);
    s.feat_f = default_feature_policy(s, Modality::functional);
    s.feat_s = default_feature_policy(s, Modality::structural);
  }
  d.feat_dim = spec.n_nodes;
  return {std::move(d), std::move(truth)};
}

enum class ExportFormat { csv, binary };

/// Writes a dataset in the manifest layout load_dataset reads back; the
/// round trip is bit-exact.
inline void export_dataset(const Dataset& d, const fs::path& dir,
                           ExportFormat fmt = ExportFormat::csv) {
  fs::create_directories(dir);
  const char* ext = fmt == ExportFormat::csv ? ".csv" : ".bmap";
  Json manifest = Json::array();
  for (const auto& s : d.subjects) {
    const std::string f = s.id + "_adj_f" + ext;
    const std::string g = s.id + "_adj_s" + ext;
    write_matrix(s.adj_f, dir / f);
    write_matrix(s.adj_s, dir / g);
    manifest.push_back({{"id", s.id}, {"label", s.label}, {"adj_f", f}, {"adj_s", g}});
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline void save_ground_truth(const GroundTruth& t, const fs::path& path) {
  Json j;
  j["planted_nodes"] = t.planted_nodes;
  j["planted_masks"] = t.planted_masks;
  write_text(path, j.dump(2) + "\n");
}

inline GroundTruth load_ground_truth(const fs::path& path) {
  Json j = Json::parse(read_text(path));
  GroundTruth t;
  for (const auto& v : j.at("planted_nodes")) t.planted_nodes.push_back(v.get<std::size_t>());
  for (const auto& v : j.at("planted_masks")) t.planted_masks.push_back(v.get<std::string>());
  return t;
}

}  // namespace brainmap
