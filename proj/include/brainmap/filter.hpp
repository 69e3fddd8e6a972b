#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/forest.hpp"
#include "brainmap/graph.hpp"
#include "brainmap/io.hpp"
#include "brainmap/matrix.hpp"
#include "brainmap/rng.hpp"

namespace brainmap {

/// Pools feature rows over an ROI mask: row i of the result is the mean of
/// subject i's selected feature rows, a static regional descriptor.
inline Matrix pool_region(const Dataset& d, const std::vector<std::size_t>& mask,
                          Modality modality) {
  if (mask.empty()) throw ContractError("pool_region: empty mask");
  Matrix out(d.subjects.size(), d.feat_dim);
  const double inv = 1.0 / double(mask.size());
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    const Matrix& x = features(d.subjects[i], modality);
    double* orow = out.row_ptr(i);
    for (std::size_t v : mask) {
      if (v >= x.rows()) throw ContractError("pool_region: mask index out of range");
      const double* xr = x.row_ptr(v);
      for (std::size_t j = 0; j < d.feat_dim; ++j) orow[j] += xr[j];
    }
    for (std::size_t j = 0; j < d.feat_dim; ++j) orow[j] *= inv;
  }
  return out;
}

namespace detail {

/// Stratified train/test split; every class keeps at least one training
/// sample. Returns (train, test) index lists.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& y, int n_classes, double train_fraction, RngStream& rng) {
  std::vector<std::vector<std::size_t>> per_class;
  per_class.resize(std::size_t(n_classes));
  for (std::size_t i = 0; i < y.size(); ++i) per_class[std::size_t(y[i])].push_back(i);
  std::vector<std::size_t> train, test;
  for (auto& idx : per_class) {
    if (idx.empty()) continue;
    rng.shuffle(idx);
    std::size_t n_train = std::size_t(std::llround(train_fraction * double(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, std::max<std::size_t>(1, idx.size() - 1));
    if (idx.size() == 1) n_train = 1;
    train.insert(train.end(), idx.begin(), idx.begin() + std::ptrdiff_t(n_train));
    test.insert(test.end(), idx.begin() + std::ptrdiff_t(n_train), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

}  // namespace detail

/// Mean held-out accuracy of a Random Forest over `repeats` independent
/// stratified 80/20 splits, each repeat with a fresh forest seed.
inline double rf_score(const Matrix& descriptors, const std::vector<int>& y, int n_classes,
                       std::size_t repeats, RngStream rng, const RfConfig& rf_cfg = {}) {
  if (descriptors.rows() != y.size()) throw ShapeError("rf_score: rows and labels differ");
  if (y.size() < 2 * std::size_t(n_classes))
    throw ContractError("rf_score: need at least 2 samples per class");
  if (repeats < 1) throw ContractError("rf_score: repeats must be >= 1");

  double total = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::vector<std::size_t> train, test;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      RngStream split_rng = rng.substream(2 * r).substream(std::uint64_t(attempt));
      std::tie(train, test) = detail::stratified_split(y, n_classes, 0.8, split_rng);
      std::vector<bool> present(std::size_t(n_classes), false);
      for (std::size_t i : train) present[std::size_t(y[i])] = true;
      ok = true;
      for (int c = 0; c < n_classes; ++c) {
        bool class_exists = false;
        for (int v : y)
          if (v == c) class_exists = true;
        if (class_exists && !present[std::size_t(c)]) ok = false;
      }
    }
    if (!ok) throw ContractError("rf_score: could not keep every class in the training split");
    if (test.empty()) throw ContractError("rf_score: empty test split");

    Matrix xtrain = slice_rows(descriptors, train);
    std::vector<int> ytrain(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) ytrain[i] = y[train[i]];
    RandomForest forest =
        RandomForest::fit(xtrain, ytrain, n_classes, rf_cfg, rng.substream(2 * r + 1));

    std::size_t correct = 0;
    for (std::size_t i : test)
      if (forest.predict_one(descriptors.row_ptr(i)) == y[i]) ++correct;
    total += double(correct) / double(test.size());
  }
  return total / double(repeats);
}

/// Selection rule: masks k > 0 whose score strictly beats the whole-set
/// baseline at index 0.
inline std::vector<std::size_t> select_outperforming(const std::vector<double>& acc) {
  std::vector<std::size_t> s;
  for (std::size_t k = 1; k < acc.size(); ++k)
    if (acc[k] > acc[0]) s.push_back(k);
  return s;
}

struct FilterReport {
  std::string modality;             // "f" or "s"
  std::vector<double> acc;          // ACC_k for k = 0..K
  double baseline = 0.0;            // ACC_0
  std::vector<std::string> selected;
  std::vector<std::size_t> unioned; // U, sorted node indices
  std::size_t repeats = 0;
  std::uint64_t seed = 0;

  Json to_json() const {
    Json j;
    j["modality"] = modality;
    j["acc"] = acc;
    j["baseline"] = baseline;
    j["selected"] = selected;
    j["union"] = unioned;
    j["repeats"] = repeats;
    j["seed"] = seed;
    return j;
  }

  static FilterReport from_json(const Json& j) {
    FilterReport r;
    r.modality = j.at("modality").get<std::string>();
    r.acc = j.at("acc").get<std::vector<double>>();
    r.baseline = j.at("baseline").get<double>();
    r.selected = j.at("selected").get<std::vector<std::string>>();
    r.unioned = j.at("union").get<std::vector<std::size_t>>();
    r.repeats = j.at("repeats").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  }
};

struct FilterResult {
  FilterReport report;
  Dataset reduced;  // induced on the union U across both modalities
};

/// Per-mask regional pooling, repeated Random-Forest scoring with common
/// splits and forest seeds across masks, outperforming-mask union, and
/// dataset reduction. When `train_subset` is given, scores are computed on
/// those subjects only (leakage control); the reduction always applies to
/// the full dataset.
inline FilterResult filter_subgraphs(const Dataset& d, const AtlasMaskLibrary& atlas,
                                     Modality modality, std::size_t repeats, RngStream rng,
                                     const RfConfig& rf_cfg = {},
                                     const std::vector<std::size_t>* train_subset = nullptr) {
  atlas.validate(d.n_nodes);

  const Dataset* scored = &d;
  Dataset subset;
  if (train_subset) {
    for (std::size_t i : *train_subset)
      if (i >= d.subjects.size()) throw ContractError("filter_subgraphs: bad training index");
    subset.n_nodes = d.n_nodes;
    subset.feat_dim = d.feat_dim;
    subset.n_classes = d.n_classes;
    for (std::size_t i : *train_subset) subset.subjects.push_back(d.subjects[i]);
    scored = &subset;
  }
  const std::vector<int> y = scored->labels();

  FilterReport report;
  report.modality = std::string(1, modality_tag(modality));
  report.repeats = repeats;
  report.seed = rng.seed();

  // identical scoring stream for every mask: paired comparison against the
  // baseline instead of independent split luck per mask
  RngStream score_rng = rng.substream(0x5c02eULL);
  report.acc.resize(atlas.size());
  for (std::size_t k = 0; k < atlas.size(); ++k) {
    Matrix desc = pool_region(*scored, atlas[k].roi, modality);
    report.acc[k] = rf_score(desc, y, scored->n_classes, repeats, score_rng, rf_cfg);
  }
  report.baseline = report.acc[0];

  std::set<std::size_t> u;
  for (std::size_t k : select_outperforming(report.acc)) {
    report.selected.push_back(atlas[k].name);
    u.insert(atlas[k].roi.begin(), atlas[k].roi.end());
  }
  if (u.empty())
    report.unioned = atlas[0].roi;  // fall back to all nodes
  else
    report.unioned.assign(u.begin(), u.end());

  FilterResult result;
  result.reduced = induce_dataset(d, report.unioned);
  result.report = std::move(report);
  return result;
}

}  // namespace brainmap
