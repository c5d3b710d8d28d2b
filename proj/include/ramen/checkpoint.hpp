#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ramen/model.hpp"

namespace ramen {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

static_assert(std::endian::native == std::endian::little, "binary files assume little endian");

/// File layout
///
///   "RAMENBIN" | u32 version | u32 kind | u32 len, JSON metadata
///   u32 entries | per entry: u32 len, name, u32 rank, u64 dims[rank], u64 offset
///   f32 payload (offset counts elements from the payload start)
inline constexpr char kMagic[8] = {'R', 'A', 'M', 'E', 'N', 'B', 'I', 'N'};
inline constexpr std::uint32_t kFormatVersion = 1;

enum class FileKind : std::uint32_t { checkpoint = 1, feature_map = 2 };

struct ManifestEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;
};

struct BinaryFile {
  FileKind kind = FileKind::checkpoint;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<ManifestEntry> manifest;
  std::vector<float> payload;

  std::vector<float> values(const ManifestEntry &e) const {
    return {payload.begin() + static_cast<long>(e.offset),
            payload.begin() + static_cast<long>(e.offset + numel(e.shape))};
  }

  const ManifestEntry &entry(const std::string &name) const {
    for (const auto &e : manifest)
      if (e.name == name) return e;
    throw CheckpointError("no entry named " + name);
  }
};

namespace detail {

template <typename T> void put(std::ostream &os, T v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T> T get(std::istream &is, const std::string &what) {
  T v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
    throw CheckpointError("truncated file while reading " + what);
  return v;
}

inline std::string get_string(std::istream &is, const std::string &what) {
  const auto len = get<std::uint32_t>(is, what);
  std::string s(len, '\0');
  if (len && !is.read(s.data(), len)) throw CheckpointError("truncated file while reading " + what);
  return s;
}

inline void put_string(std::ostream &os, const std::string &s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

} // namespace detail

inline void write_binary(const BinaryFile &f, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  detail::put(os, kFormatVersion);
  detail::put(os, static_cast<std::uint32_t>(f.kind));
  detail::put_string(os, f.metadata.dump());
  detail::put(os, static_cast<std::uint32_t>(f.manifest.size()));
  for (const auto &e : f.manifest) {
    detail::put_string(os, e.name);
    detail::put(os, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) detail::put(os, static_cast<std::uint64_t>(d));
    detail::put(os, e.offset);
  }
  os.write(reinterpret_cast<const char *>(f.payload.data()),
           static_cast<std::streamsize>(f.payload.size() * sizeof(float)));
  if (!os) throw CheckpointError("write failed: " + path);
}

inline BinaryFile read_binary(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read " + path);
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path + ": not a RAMEN binary file");
  const auto version = detail::get<std::uint32_t>(is, "version");
  if (version != kFormatVersion)
    throw CheckpointError(path + ": unsupported format version " + std::to_string(version));
  BinaryFile f;
  const auto kind = detail::get<std::uint32_t>(is, "kind");
  if (kind != 1 && kind != 2) throw CheckpointError(path + ": unknown file kind");
  f.kind = static_cast<FileKind>(kind);
  try {
    f.metadata = nlohmann::json::parse(detail::get_string(is, "metadata"));
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(path + ": bad metadata: " + e.what());
  }
  const auto count = detail::get<std::uint32_t>(is, "manifest size");
  std::uint64_t total = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    ManifestEntry e;
    e.name = detail::get_string(is, "entry name");
    const auto rank = detail::get<std::uint32_t>(is, "rank of " + e.name);
    for (std::uint32_t r = 0; r < rank; ++r)
      e.shape.push_back(detail::get<std::uint64_t>(is, "shape of " + e.name));
    e.offset = detail::get<std::uint64_t>(is, "offset of " + e.name);
    total = std::max<std::uint64_t>(total, e.offset + numel(e.shape));
    f.manifest.push_back(std::move(e));
  }
  f.payload.resize(total);
  if (total && !is.read(reinterpret_cast<char *>(f.payload.data()),
                        static_cast<std::streamsize>(total * sizeof(float))))
    throw CheckpointError(path + ": truncated payload");
  return f;
}

inline nlohmann::json config_to_json(const ModelConfig &c) {
  return {{"preset", c.preset},       {"dim", c.dim},
          {"depth", c.depth},         {"heads", c.heads},
          {"dec_dim", c.dec_dim},     {"dec_depth", c.dec_depth},
          {"dec_heads", c.dec_heads}, {"num_experts", c.num_experts},
          {"mlp_ratio", c.mlp_ratio}, {"mask_ratio", c.mask_ratio},
          {"projector_hidden", c.projector_hidden},
          {"gate_hidden", c.gate_hidden},
          {"expand_heads", c.expand_heads},
          {"temporal_heads", c.temporal.heads},
          {"temporal_key_dim", c.temporal.key_dim},
          {"temporal_value_width", c.temporal.value_width},
          {"pe_base", c.pe_base},     {"gsd_reference", c.gsd_reference}};
}

inline ModelConfig config_from_json(const nlohmann::json &j) {
  try {
    ModelConfig c;
    c.preset = j.at("preset").get<std::string>();
    c.dim = j.at("dim").get<std::size_t>();
    c.depth = j.at("depth").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.dec_dim = j.at("dec_dim").get<std::size_t>();
    c.dec_depth = j.at("dec_depth").get<std::size_t>();
    c.dec_heads = j.at("dec_heads").get<std::size_t>();
    c.num_experts = j.at("num_experts").get<std::size_t>();
    c.mlp_ratio = j.at("mlp_ratio").get<std::size_t>();
    c.mask_ratio = j.at("mask_ratio").get<double>();
    c.projector_hidden = j.at("projector_hidden").get<std::size_t>();
    c.gate_hidden = j.at("gate_hidden").get<std::size_t>();
    c.expand_heads = j.at("expand_heads").get<std::size_t>();
    c.temporal.heads = j.at("temporal_heads").get<std::size_t>();
    c.temporal.key_dim = j.at("temporal_key_dim").get<std::size_t>();
    c.temporal.value_width = j.at("temporal_value_width").get<std::size_t>();
    c.pe_base = j.at("pe_base").get<double>();
    c.gsd_reference = j.at("gsd_reference").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(std::string("bad model config in checkpoint: ") + e.what());
  }
}

template <typename S>
BinaryFile to_binary(const ParameterSet<S> &params, FileKind kind, nlohmann::json metadata) {
  BinaryFile f;
  f.kind = kind;
  f.metadata = std::move(metadata);
  for (const auto &e : params.entries()) {
    f.manifest.push_back({e.name, e.tensor.shape(), f.payload.size()});
    for (S v : e.tensor.data()) f.payload.push_back(static_cast<float>(v));
  }
  return f;
}

template <typename S>
void save_checkpoint(const Ramen<S> &model, const std::string &path,
                     nlohmann::json extra = nlohmann::json::object()) {
  extra["model"] = config_to_json(model.config());
  write_binary(to_binary(model.parameters(), FileKind::checkpoint, std::move(extra)), path);
}

/// Lists every name/shape disagreement between a manifest and a model.
template <typename S>
std::vector<std::string> manifest_diff(const std::vector<ManifestEntry> &manifest,
                                       const ParameterSet<S> &params) {
  std::vector<std::string> diff;
  for (const auto &p : params.entries()) {
    const auto it = std::find_if(manifest.begin(), manifest.end(),
                                 [&](const ManifestEntry &e) { return e.name == p.name; });
    if (it == manifest.end())
      diff.push_back("missing: " + p.name + " " + to_string(p.tensor.shape()));
    else if (it->shape != p.tensor.shape())
      diff.push_back("shape: " + p.name + " file " + to_string(it->shape) + " model " +
                     to_string(p.tensor.shape()));
  }
  for (const auto &e : manifest)
    if (!params.find(e.name)) diff.push_back("unexpected: " + e.name + " " + to_string(e.shape));
  return diff;
}

/// Copies checkpoint values into `model`; throws listing the manifest diff on
/// any mismatch, leaving the model untouched.
template <typename S> void load_parameters(const BinaryFile &f, Ramen<S> &model) {
  if (f.kind != FileKind::checkpoint) throw CheckpointError("not a checkpoint file");
  const ParameterSet<S> params = model.parameters();
  const auto diff = manifest_diff(f.manifest, params);
  if (!diff.empty()) {
    std::ostringstream msg;
    msg << "checkpoint does not match model (" << diff.size() << " differences):";
    for (const auto &d : diff) msg << "\n  " << d;
    throw CheckpointError(msg.str());
  }
  for (const auto &p : params.entries()) {
    const auto &e = f.entry(p.name);
    Tensor<S> t = p.tensor;
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = static_cast<S>(f.payload[e.offset + i]);
  }
}

template <typename S> void load_checkpoint(const std::string &path, Ramen<S> &model) {
  load_parameters(read_binary(path), model);
}

/// Builds the model described by the checkpoint metadata, then loads it.
template <typename S> Ramen<S> load_model(const std::string &path) {
  const BinaryFile f = read_binary(path);
  if (!f.metadata.contains("model")) throw CheckpointError(path + ": no model config");
  Ramen<S> model(config_from_json(f.metadata.at("model")));
  load_parameters(f, model);
  return model;
}

/// Feature maps: one entry "features/<modality>" [D x H_t x W_t] per modality.
template <typename S>
void save_feature_maps(const std::vector<FeatureGrid<S>> &grids, const std::string &path,
                       nlohmann::json metadata = nlohmann::json::object()) {
  ParameterSet<S> set;
  nlohmann::json mods = nlohmann::json::array();
  for (const auto &g : grids) {
    set.add("features/" + g.name, g.features);
    mods.push_back({{"name", g.name},
                    {"gsd_target", g.gsd_target},
                    {"height", g.features.dim(1)},
                    {"width", g.features.dim(2)}});
  }
  metadata["modalities"] = mods;
  write_binary(to_binary(set, FileKind::feature_map, std::move(metadata)), path);
}

} // namespace ramen
