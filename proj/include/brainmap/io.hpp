#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "brainmap/errors.hpp"
#include "brainmap/graph.hpp"
#include "brainmap/matrix.hpp"

namespace brainmap {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// matrix files: CSV (one row per line, comma-separated decimals) and the
// "BMAP1" little-endian binary format (magic, u32 rows, u32 cols, f64 data)
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_matrix_csv(const Matrix& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path.string());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(row[j]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.c_str();
    while (true) {
      char* end = nullptr;
      double v = std::strtod(p, &end);
      if (end == p) throw IoError("bad number in " + path.string());
      row.push_back(v);
      p = end;
      while (*p == ' ') ++p;
      if (*p == ',') {
        ++p;
        continue;
      }
      if (*p == '\0' || *p == '\r') break;
      throw IoError("unexpected character in " + path.string());
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeError("ragged CSV rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty CSV: " + path.string());
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::memcpy(m.row_ptr(i), rows[i].data(), rows[i].size() * sizeof(double));
  return m;
}

constexpr char kBmapMagic[5] = {'B', 'M', 'A', 'P', '1'};

inline void write_matrix_bmap(const Matrix& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(kBmapMagic, 5);
  const std::uint32_t r = std::uint32_t(m.rows()), c = std::uint32_t(m.cols());
  out.write(reinterpret_cast<const char*>(&r), 4);
  out.write(reinterpret_cast<const char*>(&c), 4);
  out.write(reinterpret_cast<const char*>(m.data()),
            std::streamsize(m.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

inline Matrix read_matrix_bmap(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open: " + path.string());
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kBmapMagic, 5) != 0)
    throw IoError("bad magic in " + path.string());
  std::uint32_t r = 0, c = 0;
  in.read(reinterpret_cast<char*>(&r), 4);
  in.read(reinterpret_cast<char*>(&c), 4);
  if (!in || r == 0 || c == 0) throw IoError("bad header in " + path.string());
  Matrix m(r, c);
  in.read(reinterpret_cast<char*>(m.data()), std::streamsize(m.size() * sizeof(double)));
  if (!in) throw IoError("truncated payload in " + path.string());
  return m;
}

inline Matrix read_matrix(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFileError("file not found: " + path.string());
  if (path.extension() == ".bmap") return read_matrix_bmap(path);
  return read_matrix_csv(path);
}

inline void write_matrix(const Matrix& m, const fs::path& path) {
  if (path.extension() == ".bmap")
    write_matrix_bmap(m, path);
  else
    write_matrix_csv(m, path);
}

// ---------------------------------------------------------------------------
// atlas mask library: JSON object {mask_name: [indices]}, "all" required
// ---------------------------------------------------------------------------

inline AtlasMaskLibrary load_atlas(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open atlas: " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("atlas parse error in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw IoError("atlas must be a JSON object: " + path.string());
  AtlasMaskLibrary lib;
  for (auto it = j.begin(); it != j.end(); ++it) {
    AtlasMask m;
    m.name = it.key();
    for (const auto& v : it.value()) m.roi.push_back(v.get<std::size_t>());
    std::sort(m.roi.begin(), m.roi.end());
    m.roi.erase(std::unique(m.roi.begin(), m.roi.end()), m.roi.end());
    lib.masks.push_back(std::move(m));
  }
  // "all" always sits at index 0
  auto all = std::find_if(lib.masks.begin(), lib.masks.end(),
                          [](const AtlasMask& m) { return m.name == "all"; });
  if (all == lib.masks.end())
    throw ContractError("atlas: required mask \"all\" missing in " + path.string());
  std::rotate(lib.masks.begin(), all, all + 1);
  return lib;
}

inline void save_atlas(const AtlasMaskLibrary& lib, const fs::path& path) {
  Json j = Json::object();
  for (const auto& m : lib.masks) j[m.name] = m.roi;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// dataset manifest: JSON array of {id, label, adj_f, adj_s, [feat_f, feat_s]}
// ---------------------------------------------------------------------------

inline Dataset load_dataset(const fs::path& dir, const std::string& manifest_name = "manifest.json",
                            FeaturePolicy policy = FeaturePolicy::adjacency_row) {
  const fs::path mpath = dir / manifest_name;
  std::ifstream in(mpath);
  if (!in) throw MissingFileError("cannot open manifest: " + mpath.string());
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("manifest parse error: " + std::string(e.what()));
  }
  if (!j.is_array()) throw IoError("manifest must be a JSON array: " + mpath.string());

  Dataset d;
  bool has_feature_files = false;
  for (const auto& entry : j) {
    MultimodalSubject s;
    s.id = entry.at("id").get<std::string>();
    s.label = entry.at("label").get<int>();
    if (s.label < 0) throw LabelRangeError(s.id + ": label out of range");
    s.adj_f = read_matrix(dir / entry.at("adj_f").get<std::string>());
    s.adj_s = read_matrix(dir / entry.at("adj_s").get<std::string>());
    if (entry.contains("feat_f") != entry.contains("feat_s"))
      throw IoError(s.id + ": feat_f and feat_s must be given together");
    if (entry.contains("feat_f")) {
      s.feat_f = read_matrix(dir / entry.at("feat_f").get<std::string>());
      s.feat_s = read_matrix(dir / entry.at("feat_s").get<std::string>());
      has_feature_files = true;
    } else {
      s.feat_f = default_feature_policy(s, Modality::functional);
      s.feat_s = default_feature_policy(s, Modality::structural);
    }
    d.subjects.push_back(std::move(s));
  }
  if (d.subjects.empty()) throw IoError("manifest lists no subjects");

  if (policy == FeaturePolicy::file && !has_feature_files)
    throw ConfigError("feature policy \"file\" but manifest has no feature paths");

  d.n_nodes = d.subjects.front().adj_f.rows();
  d.feat_dim = d.subjects.front().feat_f.cols();
  int max_label = 0;
  for (const auto& s : d.subjects) {
    validate_subject(s, d.n_nodes, d.feat_dim);
    max_label = std::max(max_label, s.label);
  }
  d.n_classes = max_label + 1;
  return d;
}

// ---------------------------------------------------------------------------
// misc
// ---------------------------------------------------------------------------

/// FNV-1a hash of a file's bytes, for embedding input hashes in reports.
inline std::string fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= std::uint8_t(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace brainmap
