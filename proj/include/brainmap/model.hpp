#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "brainmap/autodiff.hpp"
#include "brainmap/config.hpp"
#include "brainmap/distill.hpp"
#include "brainmap/errors.hpp"
#include "brainmap/filter.hpp"
#include "brainmap/fusion.hpp"
#include "brainmap/graph.hpp"
#include "brainmap/matrix.hpp"
#include "brainmap/metrics.hpp"
#include "brainmap/optim.hpp"
#include "brainmap/rng.hpp"
#include "brainmap/svd.hpp"

namespace brainmap {

// ---------------------------------------------------------------------------
// subject-level graph construction
// ---------------------------------------------------------------------------

struct SubjectGraph {
  Matrix adj;       // cosine similarities with unit diagonal
  Matrix norm_adj;  // D^{-1/2} adj D^{-1/2}
  Matrix pe;        // N x pe_dim Laplacian positional encodings (may be empty)
};

/// Fully connected cosine-similarity graph over embedding rows. Zero rows
/// get similarity 0 by convention; the diagonal is always 1. An optional
/// top-d-per-node sparsification keeps the strongest neighbours (plus the
/// diagonal) and re-symmetrises.
inline SubjectGraph build_graph(const Matrix& z, std::size_t sparsify_degree = 0) {
  const std::size_t n = z.rows();
  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* row = z.row_ptr(i);
    for (std::size_t j = 0; j < z.cols(); ++j) s += row[j] * row[j];
    norm[i] = std::sqrt(s);
  }
  SubjectGraph g;
  g.adj = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    g.adj(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double sim = 0.0;
      if (norm[i] > 0.0 && norm[j] > 0.0) {
        const double* a = z.row_ptr(i);
        const double* b = z.row_ptr(j);
        double dot = 0.0;
        for (std::size_t k = 0; k < z.cols(); ++k) dot += a[k] * b[k];
        sim = dot / (norm[i] * norm[j]);
      }
      g.adj(i, j) = g.adj(j, i) = sim;
    }
  }

  if (sparsify_degree > 0 && sparsify_degree + 1 < n) {
    Matrix kept(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      kept(i, i) = 1.0;
      std::vector<std::size_t> order;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) order.push_back(j);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(g.adj(i, a)) > std::fabs(g.adj(i, b));
      });
      for (std::size_t k = 0; k < sparsify_degree; ++k) kept(i, order[k]) = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (kept(i, j) == 0.0 && kept(j, i) == 0.0) g.adj(i, j) = 0.0;
  }

  g.norm_adj = Matrix(n, n);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    // degrees over absolute similarities: cosine entries can be negative,
    // and the unit diagonal keeps every degree >= 1
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += std::fabs(g.adj(i, j));
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g.norm_adj(i, j) = g.adj(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return g;
}

/// Eigenvectors of the symmetric normalised Laplacian I - norm_adj for the
/// pe_dim smallest nontrivial eigenvalues; each column's sign is fixed so
/// its largest-magnitude entry is positive.
inline Matrix laplacian_pe(const SubjectGraph& g, std::size_t pe_dim) {
  const std::size_t n = g.norm_adj.rows();
  if (pe_dim >= n) throw ConfigError("laplacian_pe: pe_dim must be < node count");
  Matrix lap(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      lap(i, j) = (i == j ? 1.0 : 0.0) - g.norm_adj(i, j);
  EigenResult eig = sym_eigen(lap);
  Matrix pe(n, pe_dim);
  for (std::size_t k = 0; k < pe_dim; ++k) {
    const std::size_t col = k + 1;  // skip the trivial smallest eigenvalue
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::fabs(eig.vectors(i, col)) > best) {
        best = std::fabs(eig.vectors(i, col));
        arg = i;
      }
    const double sign = eig.vectors(arg, col) >= 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) pe(i, k) = sign * eig.vectors(i, col);
  }
  return pe;
}

// ---------------------------------------------------------------------------
// model parameters and forward pass
// ---------------------------------------------------------------------------

struct ModelParams {
  CnaParams cna;
  GiacParams giac;
  ad::Var proj_f, proj_s;  // product-fusion ablation projections
  std::vector<ad::Var> pw_w, pw_b;
  ad::Var gcn_w;
  ad::Var out_w, out_b;

  std::vector<ad::Var> all() const {
    std::vector<ad::Var> v;
    if (cna.w_q) {
      v.push_back(cna.w_q);
      v.push_back(cna.w_k);
      v.push_back(cna.w_v);
      v.push_back(giac.w_g);
      v.push_back(giac.b_g);
    }
    if (proj_f) {
      v.push_back(proj_f);
      v.push_back(proj_s);
    }
    for (const auto& w : pw_w) v.push_back(w);
    for (const auto& b : pw_b) v.push_back(b);
    v.push_back(gcn_w);
    v.push_back(out_w);
    v.push_back(out_b);
    return v;
  }
};

/// A trained (or freshly initialised) pipeline instance: fusion weights,
/// distilled-column state, classifier weights, the node unions chosen by
/// filtering, and the resolved config + seed for reproducibility.
struct TrainedModel {
  RunConfig config;
  std::uint64_t seed = 0;
  std::size_t n_nodes = 0;   // full node count the model expects
  std::size_t feat_dim = 0;  // D
  int n_classes = 0;
  std::vector<std::size_t> union_f, union_s;
  ModelParams params;
  DistillState distill;

  std::size_t fused_cols() const {
    return config.fusion_mode == "agif" ? 5 * feat_dim : feat_dim;
  }
};

inline TrainedModel init_model(const RunConfig& cfg, std::size_t n_nodes,
                               std::size_t feat_dim, int n_classes,
                               std::vector<std::size_t> union_f,
                               std::vector<std::size_t> union_s, RngStream rng) {
  TrainedModel m;
  m.config = cfg;
  m.seed = cfg.seed;
  m.n_nodes = n_nodes;
  m.feat_dim = feat_dim;
  m.n_classes = n_classes;
  m.union_f = std::move(union_f);
  m.union_s = std::move(union_s);

  if (cfg.fusion_mode == "agif") {
    m.params.cna = CnaParams::init(feat_dim, cfg.cna_dim, rng.substream(1));
    m.params.giac = GiacParams::init(feat_dim, rng.substream(2));
  } else {
    const double bound = 1.0 / std::sqrt(double(feat_dim));
    m.params.proj_f = ad::leaf(detail::uniform_init(feat_dim, feat_dim, bound, rng.substream(3)));
    m.params.proj_s = ad::leaf(detail::uniform_init(feat_dim, feat_dim, bound, rng.substream(4)));
  }

  const std::size_t p_prime = m.fused_cols() - 2 * cfg.k_remove;
  std::size_t in = p_prime + (cfg.pe_after_pointwise ? 0 : cfg.pe_dim);
  for (std::size_t l = 0; l < cfg.pointwise_layers; ++l) {
    const std::size_t out = l == 0 ? cfg.giac_dim : cfg.hidden_width;
    const double bound = 1.0 / std::sqrt(double(in));
    m.params.pw_w.push_back(ad::leaf(detail::uniform_init(in, out, bound, rng.substream(10 + 2 * l))));
    m.params.pw_b.push_back(ad::leaf(Matrix(1, out, 0.0)));
    in = out;
  }
  if (cfg.pe_after_pointwise) in += cfg.pe_dim;
  {
    const double bound = 1.0 / std::sqrt(double(in));
    m.params.gcn_w = ad::leaf(detail::uniform_init(in, cfg.hidden_width, bound, rng.substream(50)));
  }
  {
    const double bound = 1.0 / std::sqrt(double(cfg.hidden_width));
    m.params.out_w = ad::leaf(
        detail::uniform_init(cfg.hidden_width, std::size_t(n_classes), bound, rng.substream(51)));
    m.params.out_b = ad::leaf(Matrix(1, std::size_t(n_classes), 0.0));
  }
  return m;
}

/// Fused embedding for one subject under the model's stored node unions.
/// agif: CNA + GIAC (N'_f x 5D). product: elementwise product of linearly
/// projected functional rows and the projected mean structural row.
inline ad::Var fuse_embed(const TrainedModel& m, const MultimodalSubject& s) {
  if (s.adj_f.rows() != m.n_nodes)
    throw ContractError("forward: subject has " + std::to_string(s.adj_f.rows()) +
                        " nodes but the model metadata expects " + std::to_string(m.n_nodes));
  Matrix f = slice_rows(s.feat_f, m.union_f);
  Matrix st = slice_rows(s.feat_s, m.union_s);
  if (m.config.fusion_mode == "agif")
    return fuse_subject(f, st, m.params.cna, m.params.giac).z;
  auto zf = ad::matmul(ad::constant(f), m.params.proj_f);
  auto srow = ad::mean_rows(ad::matmul(ad::constant(st), m.params.proj_s));
  auto ones = ad::constant(Matrix(f.rows(), 1, 1.0));
  return ad::hadamard(zf, ad::matmul(ones, srow));
}

/// Distilled embedding: kept columns, plus Bernoulli masking during
/// training. Every node row inherits the subject's label for the
/// prototype-deviation probabilities.
inline ad::Var distill_embed(const TrainedModel& m, const ad::Var& z,
                             const MultimodalSubject& s, bool training, RngStream rng) {
  auto z_cf = ad::slice_cols(z, m.distill.kept_columns);
  if (!training || m.config.masking_rate <= 0.0) return z_cf;
  std::vector<int> node_labels(z_cf->value.rows(), s.label);
  Matrix w = drop_probabilities(z_cf->value, node_labels, m.distill, m.config.masking_rate);
  Matrix keep(w.rows(), w.cols(), 1.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    RngStream row_rng = rng.substream(i);
    for (std::size_t j = 0; j < w.cols(); ++j)
      if (row_rng.uniform() < w(i, j)) keep(i, j) = 0.0;
  }
  return ad::hadamard(z_cf, ad::constant(std::move(keep)));
}

/// Graph + positional encodings from the current embedding values. The
/// graph is a constant of the recording: gradients flow through node
/// features, not through edge weights or eigenvectors.
inline SubjectGraph subject_graph(const TrainedModel& m, const Matrix& z_prime) {
  SubjectGraph g = build_graph(z_prime, m.config.sparsify_degree);
  g.pe = laplacian_pe(g, m.config.pe_dim);
  return g;
}

/// Pointwise stack, one GCN layer, readout. Returns 1 x C logits.
inline ad::Var decode(const TrainedModel& m, const ad::Var& z_prime, const SubjectGraph& g,
                      bool training, RngStream& rng) {
  auto x = z_prime;
  if (!m.config.pe_after_pointwise) x = ad::concat_cols({x, ad::constant(g.pe)});
  for (std::size_t l = 0; l < m.params.pw_w.size(); ++l)
    x = ad::relu(ad::add_rowvec(ad::matmul(x, m.params.pw_w[l]), m.params.pw_b[l]));
  if (m.config.pe_after_pointwise) x = ad::concat_cols({x, ad::constant(g.pe)});
  x = ad::relu(ad::matmul(ad::constant(g.norm_adj), ad::matmul(x, m.params.gcn_w)));
  x = ad::dropout(x, m.config.dropout, rng, training);
  auto pooled = m.config.readout == "max" ? ad::max_rows(x) : ad::mean_rows(x);
  return ad::add_rowvec(ad::matmul(pooled, m.params.out_w), m.params.out_b);
}

inline ad::Var model_forward(const TrainedModel& m, const MultimodalSubject& s,
                             bool training, RngStream rng) {
  auto z = fuse_embed(m, s);
  auto z_prime = distill_embed(m, z, s, training, rng.substream(1));
  SubjectGraph g = subject_graph(m, z_prime->value);
  RngStream dropout_rng = rng.substream(2);
  return decode(m, z_prime, g, training, dropout_rng);
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
  double acc = 0.0;
  std::optional<double> auc;
  Matrix confusion_matrix;
  Matrix scores;  // M x C softmax probabilities
  std::vector<int> predictions;
};

/// Deterministic evaluation: no masking, no dropout.
inline EvalResult evaluate(const TrainedModel& m,
                           const std::vector<MultimodalSubject>& subjects) {
  if (subjects.empty()) throw ContractError("evaluate: no subjects");
  EvalResult r;
  r.scores = Matrix(subjects.size(), std::size_t(m.n_classes));
  r.predictions.resize(subjects.size());
  std::vector<int> truth(subjects.size());
  RngStream unused(0);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    auto logits = model_forward(m, subjects[i], false, unused);
    Matrix probs = row_softmax(logits->value);
    int best = 0;
    for (int c = 1; c < m.n_classes; ++c)
      if (probs(0, std::size_t(c)) > probs(0, std::size_t(best))) best = c;
    r.predictions[i] = best;
    truth[i] = subjects[i].label;
    for (int c = 0; c < m.n_classes; ++c) r.scores(i, std::size_t(c)) = probs(0, std::size_t(c));
  }
  r.acc = accuracy(r.predictions, truth);
  r.auc = auc_macro_ovr(r.scores, truth);
  r.confusion_matrix = confusion(r.predictions, truth, m.n_classes);
  return r;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct FoldMetrics {
  std::size_t fold = 0;
  double acc = 0.0;
  std::optional<double> auc;
  Matrix confusion_matrix;
  std::size_t epochs_run = 0;
  double epoch_time_s = 0.0;
  std::uint64_t peak_mem_bytes = 0;
  std::vector<double> train_loss, val_loss;
  FilterReport filter_f, filter_s;  // empty when filtering is off
};

struct FoldResult {
  TrainedModel model;
  FoldMetrics metrics;
  std::vector<std::size_t> test_indices;
};

/// Stratified k-fold assignment: shuffled within class, dealt round-robin.
inline std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& y,
                                                              std::size_t k, RngStream rng) {
  std::vector<std::vector<std::size_t>> folds(k);
  int n_classes = 0;
  for (int v : y) n_classes = std::max(n_classes, v + 1);
  std::size_t dealt = 0;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) idx.push_back(i);
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) folds[(dealt + i) % k].push_back(idx[i]);
    dealt += idx.size();
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

namespace detail {

inline std::vector<Matrix> snapshot(const std::vector<ad::Var>& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p->value);
  return out;
}

inline void restore(const std::vector<ad::Var>& params, const std::vector<Matrix>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

}  // namespace detail

/// Trains one fold: atlas filtering on the non-test subjects, distiller fit
/// on the training rows, Adam over cross-entropy with early stopping on
/// validation loss, final metrics on the held-out fold.
inline FoldResult train_fold(const Dataset& d, const AtlasMaskLibrary& atlas,
                             const RunConfig& cfg, std::size_t fold,
                             const std::vector<std::size_t>& test_idx) {
  RngStream fold_rng(cfg.seed, 0xf01dULL + fold);
  const std::uint64_t mem_floor = AllocTracker::live().load();
  AllocTracker::reset_peak();

  std::vector<std::size_t> trainval;
  {
    std::vector<bool> is_test(d.size(), false);
    for (std::size_t i : test_idx) is_test[i] = true;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!is_test[i]) trainval.push_back(i);
  }

  FoldResult out;
  out.test_indices = test_idx;
  out.metrics.fold = fold;

  // 1) atlas-guided filtering per modality, scored on non-test subjects only
  std::vector<std::size_t> union_f = atlas[0].roi, union_s = atlas[0].roi;
  if (cfg.use_filter) {
    auto rf = filter_subgraphs(d, atlas, Modality::functional, cfg.filter_repeats,
                               fold_rng.substream(1), cfg.rf_config(), &trainval);
    auto rs = filter_subgraphs(d, atlas, Modality::structural, cfg.filter_repeats,
                               fold_rng.substream(2), cfg.rf_config(), &trainval);
    union_f = rf.report.unioned;
    union_s = rs.report.unioned;
    out.metrics.filter_f = rf.report;
    out.metrics.filter_s = rs.report;
  }

  // 2) train / validation split of the non-test subjects
  std::vector<int> trainval_labels;
  for (std::size_t i : trainval) trainval_labels.push_back(d.subjects[i].label);
  RngStream split_rng = fold_rng.substream(3);
  auto [train_rel, val_rel] = detail::stratified_split(trainval_labels, d.n_classes,
                                                       1.0 - cfg.val_fraction, split_rng);
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t r : train_rel) train_idx.push_back(trainval[r]);
  for (std::size_t r : val_rel) val_idx.push_back(trainval[r]);

  // 3) model init and distiller fit on the training rows under the initial
  //    fusion weights; the column layout then stays fixed for the run
  TrainedModel model = init_model(cfg, d.n_nodes, d.feat_dim, d.n_classes, union_f, union_s,
                                  fold_rng.substream(4));
  {
    std::size_t total_rows = 0;
    std::vector<Matrix> zs;
    std::vector<int> row_labels;
    zs.reserve(train_idx.size());
    for (std::size_t i : train_idx) {
      zs.push_back(fuse_embed(model, d.subjects[i])->value);
      total_rows += zs.back().rows();
    }
    Matrix z_train(total_rows, model.fused_cols());
    std::size_t at = 0;
    for (std::size_t k = 0; k < zs.size(); ++k) {
      for (std::size_t r = 0; r < zs[k].rows(); ++r, ++at) {
        std::copy(zs[k].row_ptr(r), zs[k].row_ptr(r) + zs[k].cols(), z_train.row_ptr(at));
        row_labels.push_back(d.subjects[train_idx[k]].label);
      }
    }
    DistillConfig dc;
    dc.k_remove = cfg.k_remove;
    dc.masking_rate = cfg.masking_rate;
    dc.first_component_only = cfg.loading_mode == "first-component";
    model.distill = fit_distiller(z_train, row_labels, d.n_classes, dc);
  }

  // 4) Adam over cross-entropy with early stopping on validation loss
  std::vector<ad::Var> params = model.params.all();
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;
  Adam adam(params, adam_cfg);
  ad::zero_grad(params);

  auto mean_loss = [&](const std::vector<std::size_t>& idx) {
    double total = 0.0;
    RngStream unused(0);
    for (std::size_t i : idx) {
      auto logits = model_forward(model, d.subjects[i], false, unused);
      total += ad::softmax_cross_entropy(logits, std::size_t(d.subjects[i].label))->value(0, 0);
    }
    return total / double(idx.size());
  };

  std::vector<Matrix> best = detail::snapshot(params);
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  double epoch_seconds_total = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream epoch_rng = fold_rng.substream(1000 + epoch);
    std::vector<std::size_t> order = train_idx;
    epoch_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        auto logits = model_forward(model, d.subjects[i], true, epoch_rng.substream(i));
        auto loss = ad::softmax_cross_entropy(logits, std::size_t(d.subjects[i].label));
        epoch_loss += loss->value(0, 0);
        ad::backward(loss);
      }
      const double inv = 1.0 / double(stop - start);
      for (const auto& p : params)
        for (std::size_t j = 0; j < p->grad.size(); ++j) p->grad.data()[j] *= inv;
      adam.step(params);
      ad::zero_grad(params);
    }
    epoch_loss /= double(order.size());
    if (!std::isfinite(epoch_loss))
      throw NumericalError("train: loss diverged (non-finite) at fold " +
                           std::to_string(fold) + ", epoch " + std::to_string(epoch));
    out.metrics.train_loss.push_back(epoch_loss);

    const double val = mean_loss(val_idx);
    out.metrics.val_loss.push_back(val);
    epoch_seconds_total +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++out.metrics.epochs_run;

    if (val < best_val - 1e-12) {
      best_val = val;
      best = detail::snapshot(params);
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  detail::restore(params, best);

  // 5) held-out metrics
  std::vector<MultimodalSubject> test_subjects;
  for (std::size_t i : test_idx) test_subjects.push_back(d.subjects[i]);
  EvalResult ev = evaluate(model, test_subjects);
  out.metrics.acc = ev.acc;
  out.metrics.auc = ev.auc;
  out.metrics.confusion_matrix = ev.confusion_matrix;
  out.metrics.epoch_time_s =
      out.metrics.epochs_run > 0 ? epoch_seconds_total / double(out.metrics.epochs_run) : 0.0;
  const std::uint64_t peak = AllocTracker::peak().load();
  out.metrics.peak_mem_bytes = peak > mem_floor ? peak - mem_floor : 0;
  out.model = std::move(model);
  return out;
}

struct TrainOutput {
  std::vector<FoldResult> folds;

  double mean_acc() const {
    double s = 0.0;
    for (const auto& f : folds) s += f.metrics.acc;
    return s / double(folds.size());
  }
  std::optional<double> mean_auc() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& f : folds)
      if (f.metrics.auc) {
        s += *f.metrics.auc;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return s / double(n);
  }
  double mean_epoch_time_s() const {
    double s = 0.0;
    for (const auto& f : folds) s += f.metrics.epoch_time_s;
    return s / double(folds.size());
  }
};

/// Stratified k-fold cross-validation; folds are independent model
/// instances and may run on worker threads (results do not depend on the
/// schedule because all randomness is fold-keyed).
inline TrainOutput train(const Dataset& d, const AtlasMaskLibrary& atlas,
                         const RunConfig& cfg) {
  cfg.validate();
  atlas.validate(d.n_nodes);
  const auto folds = stratified_folds(d.labels(), cfg.folds, RngStream(cfg.seed, 0xf01d5ULL));
  TrainOutput out;
  out.folds.resize(folds.size());

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, folds.size()));
  if (workers == 1) {
    for (std::size_t f = 0; f < folds.size(); ++f)
      out.folds[f] = train_fold(d, atlas, cfg, f, folds[f]);
    return out;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(folds.size());
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (std::size_t f = next.fetch_add(1); f < folds.size(); f = next.fetch_add(1)) {
        try {
          out.folds[f] = train_fold(d, atlas, cfg, f, folds[f]);
        } catch (const std::exception& e) {
          errors[f] = e.what();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw Error("train: fold failed: " + e);
  return out;
}

}  // namespace brainmap
