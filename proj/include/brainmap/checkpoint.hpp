#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "brainmap/errors.hpp"
#include "brainmap/io.hpp"
#include "brainmap/model.hpp"

namespace brainmap {

// Checkpoint container: 8-byte magic, u64 header length, JSON header
// (version, config, shapes, distill state), then raw little-endian f64
// blobs in the order the header lists them. Round-trips bit-exact.

constexpr char kCheckpointMagic[8] = {'B', 'M', 'C', 'K', 'P', 'T', '1', '\n'};

namespace detail {

struct BlobRef {
  std::string name;
  const Matrix* data;
};

inline std::vector<std::pair<std::string, const Matrix*>> checkpoint_blobs(
    const TrainedModel& m) {
  std::vector<std::pair<std::string, const Matrix*>> blobs;
  if (m.params.cna.w_q) {
    blobs.emplace_back("cna.w_q", &m.params.cna.w_q->value);
    blobs.emplace_back("cna.w_k", &m.params.cna.w_k->value);
    blobs.emplace_back("cna.w_v", &m.params.cna.w_v->value);
    blobs.emplace_back("giac.w_g", &m.params.giac.w_g->value);
    blobs.emplace_back("giac.b_g", &m.params.giac.b_g->value);
  }
  if (m.params.proj_f) {
    blobs.emplace_back("proj.f", &m.params.proj_f->value);
    blobs.emplace_back("proj.s", &m.params.proj_s->value);
  }
  for (std::size_t l = 0; l < m.params.pw_w.size(); ++l) {
    blobs.emplace_back("pw." + std::to_string(l) + ".w", &m.params.pw_w[l]->value);
    blobs.emplace_back("pw." + std::to_string(l) + ".b", &m.params.pw_b[l]->value);
  }
  blobs.emplace_back("gcn.w", &m.params.gcn_w->value);
  blobs.emplace_back("out.w", &m.params.out_w->value);
  blobs.emplace_back("out.b", &m.params.out_b->value);
  blobs.emplace_back("distill.prototypes", &m.distill.prototypes);
  return blobs;
}

}  // namespace detail

inline void save_checkpoint(const TrainedModel& m, const fs::path& path) {
  const auto blobs = detail::checkpoint_blobs(m);
  Json header;
  header["version"] = 1;
  header["tool"] = kVersion;
  header["config"] = m.config.to_json();
  header["seed"] = m.seed;
  header["n_nodes"] = m.n_nodes;
  header["feat_dim"] = m.feat_dim;
  header["n_classes"] = m.n_classes;
  header["union_f"] = m.union_f;
  header["union_s"] = m.union_s;
  Json dj;
  dj["kept_columns"] = m.distill.kept_columns;
  dj["input_cols"] = m.distill.input_cols;
  dj["fitted_on"] = m.distill.fitted_on;
  dj["fitted"] = m.distill.fitted;
  header["distill"] = dj;
  Json blob_list = Json::array();
  for (const auto& [name, mat] : blobs)
    blob_list.push_back({{"name", name}, {"rows", mat->rows()}, {"cols", mat->cols()}});
  header["blobs"] = blob_list;

  const std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(kCheckpointMagic, 8);
  const std::uint64_t len = hs.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(hs.data(), std::streamsize(hs.size()));
  for (const auto& [name, mat] : blobs)
    out.write(reinterpret_cast<const char*>(mat->data()),
              std::streamsize(mat->size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

inline TrainedModel load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string hs(len, '\0');
  in.read(hs.data(), std::streamsize(len));
  if (!in) throw IoError("truncated checkpoint header: " + path.string());
  Json header = Json::parse(hs);
  if (header.at("version").get<int>() != 1)
    throw IoError("unsupported checkpoint version in " + path.string());

  TrainedModel m;
  for (auto it = header.at("config").begin(); it != header.at("config").end(); ++it) {
    const Json& v = it.value();
    std::string raw;
    if (v.is_string())
      raw = v.get<std::string>();
    else if (v.is_boolean())
      raw = v.get<bool>() ? "true" : "false";
    else if (v.is_array()) {
      for (const auto& e : v) {
        if (!raw.empty()) raw += ",";
        raw += e.is_string() ? e.get<std::string>() : e.dump();
      }
      if (raw.empty()) raw = " ";
    } else
      raw = v.dump();
    m.config.set(it.key(), raw);
  }
  m.seed = header.at("seed").get<std::uint64_t>();
  m.n_nodes = header.at("n_nodes").get<std::size_t>();
  m.feat_dim = header.at("feat_dim").get<std::size_t>();
  m.n_classes = header.at("n_classes").get<int>();
  m.union_f = header.at("union_f").get<std::vector<std::size_t>>();
  m.union_s = header.at("union_s").get<std::vector<std::size_t>>();
  m.distill.kept_columns = header.at("distill").at("kept_columns").get<std::vector<std::size_t>>();
  m.distill.input_cols = header.at("distill").at("input_cols").get<std::size_t>();
  m.distill.fitted_on = header.at("distill").at("fitted_on").get<std::string>();
  m.distill.fitted = header.at("distill").at("fitted").get<bool>();

  std::vector<std::pair<std::string, Matrix>> blobs;
  for (const auto& b : header.at("blobs")) {
    Matrix mat(b.at("rows").get<std::size_t>(), b.at("cols").get<std::size_t>());
    in.read(reinterpret_cast<char*>(mat.data()),
            std::streamsize(mat.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint payload: " + path.string());
    blobs.emplace_back(b.at("name").get<std::string>(), std::move(mat));
  }

  auto take = [&](const std::string& name) -> Matrix {
    for (auto& [n, mat] : blobs)
      if (n == name) return std::move(mat);
    throw IoError("checkpoint missing blob " + name + " in " + path.string());
  };

  if (m.config.fusion_mode == "agif") {
    m.params.cna.attention_dim = m.config.cna_dim;
    m.params.cna.w_q = ad::leaf(take("cna.w_q"));
    m.params.cna.w_k = ad::leaf(take("cna.w_k"));
    m.params.cna.w_v = ad::leaf(take("cna.w_v"));
    m.params.giac.w_g = ad::leaf(take("giac.w_g"));
    m.params.giac.b_g = ad::leaf(take("giac.b_g"));
  } else {
    m.params.proj_f = ad::leaf(take("proj.f"));
    m.params.proj_s = ad::leaf(take("proj.s"));
  }
  for (std::size_t l = 0; l < m.config.pointwise_layers; ++l) {
    m.params.pw_w.push_back(ad::leaf(take("pw." + std::to_string(l) + ".w")));
    m.params.pw_b.push_back(ad::leaf(take("pw." + std::to_string(l) + ".b")));
  }
  m.params.gcn_w = ad::leaf(take("gcn.w"));
  m.params.out_w = ad::leaf(take("out.w"));
  m.params.out_b = ad::leaf(take("out.b"));
  m.distill.prototypes = take("distill.prototypes");
  return m;
}

}  // namespace brainmap
