#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ramen/encodings.hpp"
#include "ramen/numerics/nn.hpp"

namespace ramen {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Static description of one sensor stream.
struct ModalitySpec {
  std::string name;
  std::vector<ChannelDescriptor> channels;
  double gsd_native = 10.0;       // meters
  bool temporal = false;
  std::size_t t_max = 1;
  std::size_t tile_size = 16;     // square tiles, pixels
  double inclusion_probability = -1.0; // < 0: uniform subset sampling

  ChannelKind kind() const { return channels.front().kind(); }

  void validate() const {
    if (channels.empty()) throw ConfigError("modality " + name + ": no channels");
    for (const auto &c : channels)
      if (c.kind() != channels.front().kind())
        throw ConfigError("modality " + name + ": mixed channel kinds");
    if (!(gsd_native > 0.0)) throw ConfigError("modality " + name + ": GSD must be positive");
    if (t_max < 1) throw ConfigError("modality " + name + ": t_max must be >= 1");
    if (!temporal && t_max != 1)
      throw ConfigError("modality " + name + ": non-temporal modality with t_max > 1");
    if (tile_size == 0) throw ConfigError("modality " + name + ": empty tile");
  }
};

struct DatasetSpec {
  std::string name;
  std::vector<ModalitySpec> modalities;
  double gsd_min = 1.0, gsd_max = 1.0, gsd_interval = 1.0;
  std::size_t batch_size = 1;
  double weight = 1.0; // relative dataset sampling weight

  std::size_t gsd_steps() const {
    return static_cast<std::size_t>(std::llround((gsd_max - gsd_min) / gsd_interval)) + 1;
  }

  /// {min, min + interval, ..., max}
  std::vector<double> gsd_grid() const {
    std::vector<double> grid;
    for (std::size_t i = 0; i < gsd_steps(); ++i)
      grid.push_back(gsd_min + static_cast<double>(i) * gsd_interval);
    return grid;
  }

  const ModalitySpec &modality(const std::string &n) const {
    for (const auto &m : modalities)
      if (m.name == n) return m;
    throw ConfigError("dataset " + name + ": no modality " + n);
  }

  void validate() const {
    if (modalities.empty()) throw ConfigError("dataset " + name + ": no modalities");
    if (!(gsd_min > 0.0) || gsd_min > gsd_max || !(gsd_interval > 0.0))
      throw ConfigError("dataset " + name + ": invalid GSD range");
    const double steps = (gsd_max - gsd_min) / gsd_interval;
    if (std::abs(steps - std::round(steps)) > 1e-9)
      throw ConfigError("dataset " + name + ": interval does not divide the GSD range");
    if (batch_size == 0) throw ConfigError("dataset " + name + ": batch size must be positive");
    if (!(weight > 0.0)) throw ConfigError("dataset " + name + ": weight must be positive");
    for (const auto &m : modalities) m.validate();
  }
};

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Per (dataset, modality, channel) mean and standard deviation.
class NormalizationTable {
public:
  static std::string key(const std::string &dataset, const std::string &modality) {
    return dataset + "/" + modality;
  }

  void set(const std::string &dataset, const std::string &modality,
           std::vector<ChannelStats> stats) {
    for (const auto &s : stats)
      if (!(s.std > 0.0)) throw ConfigError("normalization std must be positive");
    entries_[key(dataset, modality)] = std::move(stats);
  }

  const std::vector<ChannelStats> &at(const std::string &dataset,
                                      const std::string &modality) const {
    auto it = entries_.find(key(dataset, modality));
    if (it == entries_.end())
      throw ConfigError("no normalization entry for " + key(dataset, modality));
    return it->second;
  }

  bool empty() const { return entries_.empty(); }
  const std::map<std::string, std::vector<ChannelStats>> &entries() const { return entries_; }

private:
  std::map<std::string, std::vector<ChannelStats>> entries_;
};

/// Raster stack [T x C x H x W] with one acquisition day per time step.
struct RasterStack {
  std::size_t t = 1, c = 1, h = 1, w = 1;
  std::vector<double> values;
  std::vector<int> days;

  std::size_t size() const { return t * c * h * w; }
  double &at(std::size_t ti, std::size_t ci, std::size_t y, std::size_t x) {
    return values[((ti * c + ci) * h + y) * w + x];
  }
  double at(std::size_t ti, std::size_t ci, std::size_t y, std::size_t x) const {
    return values[((ti * c + ci) * h + y) * w + x];
  }
};

/// Geoaligned rasters of every modality of one dataset, in declaration order.
struct MultimodalSample {
  std::string dataset;
  std::vector<RasterStack> modalities;
};

struct CorpusConfig {
  std::vector<DatasetSpec> datasets;
  NormalizationTable normalization;

  void validate() const {
    if (datasets.empty()) throw ConfigError("corpus has no datasets");
    for (const auto &d : datasets) d.validate();
  }
};

// ---------------------------------------------------------------------------
// Built-in presets
// ---------------------------------------------------------------------------

/// Central wavelengths (nm) of the 13 Sentinel-2 bands B1..B12 (incl. B8A).
inline const std::vector<double> &sentinel2_wavelengths() {
  static const std::vector<double> table = {440, 490, 560, 665, 705, 740, 783,
                                            842, 865, 945, 1373, 1610, 2200};
  return table;
}

namespace detail {

inline std::vector<ChannelDescriptor> optical_channels(const std::vector<double> &nm) {
  std::vector<ChannelDescriptor> out;
  for (double v : nm) out.push_back(ChannelDescriptor::optical(v));
  return out;
}

inline std::vector<ChannelDescriptor> categorical_channels(std::vector<ChannelCategory> ids) {
  std::vector<ChannelDescriptor> out;
  for (auto id : ids) out.push_back(ChannelDescriptor::categorical(id));
  return out;
}

} // namespace detail

/// Aerial VHR + DEM at 0.2 m with S2/S1 series at 10 m; targets 3-20 m.
inline DatasetSpec flair_like() {
  using C = ChannelCategory;
  DatasetSpec d;
  d.name = "flair_like";
  d.gsd_min = 3;
  d.gsd_max = 20;
  d.gsd_interval = 1;
  d.batch_size = 2;
  d.modalities = {
      {"aerial", detail::optical_channels({490, 560, 665, 842}), 0.2, false, 1, 32},
      {"s2", detail::optical_channels({490, 560, 665, 705, 740, 783, 842, 865, 1610, 2200}), 10.0,
       true, 4, 10},
      {"s1", detail::categorical_channels({C::vv_asc, C::vh_asc}), 10.0, true, 4, 10},
      {"dem", detail::categorical_channels({C::dsm, C::dtm}), 0.2, false, 1, 32},
  };
  return d;
}

/// SPOT6 at 1.5 m with an S2 series at 10 m; targets 5-20 m.
inline DatasetSpec worldstrat_like() {
  DatasetSpec d;
  d.name = "worldstrat_like";
  d.gsd_min = 5;
  d.gsd_max = 20;
  d.gsd_interval = 1;
  d.batch_size = 2;
  auto s2 = sentinel2_wavelengths();
  s2.erase(s2.begin() + 10); // no B10
  d.modalities = {
      {"spot6", detail::optical_channels({485, 560, 660, 825}), 1.5, false, 1, 32},
      {"s2", detail::optical_channels(s2), 10.0, true, 4, 8},
  };
  return d;
}

/// Single-date S2 (13 bands), S1 (8 polarization/orbit channels) and DEM, all
/// at 10 m; targets 20-100 m.
inline DatasetSpec mmearth_like() {
  using C = ChannelCategory;
  DatasetSpec d;
  d.name = "mmearth_like";
  d.gsd_min = 20;
  d.gsd_max = 100;
  d.gsd_interval = 10;
  d.batch_size = 4;
  d.modalities = {
      {"s2", detail::optical_channels(sentinel2_wavelengths()), 10.0, false, 1, 16},
      {"s1",
       detail::categorical_channels({C::vv_asc, C::vh_asc, C::hh_asc, C::hv_asc, C::vv_desc,
                                     C::vh_desc, C::hh_desc, C::hv_desc}),
       10.0, false, 1, 16},
      {"dem", detail::categorical_channels({C::dtm, C::slope}), 10.0, false, 1, 16},
  };
  return d;
}

inline std::vector<DatasetSpec> builtin_datasets() {
  return {flair_like(), worldstrat_like(), mmearth_like()};
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

namespace detail {

/// Sum of random plane waves, unit variance over the plane.
struct PlaneWaveField {
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;

  static PlaneWaveField random(Rng &rng, std::size_t count, double min_len, double max_len) {
    PlaneWaveField f;
    double power = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double len = std::exp(rng.uniform(std::log(min_len), std::log(max_len)));
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double k = 2.0 * std::numbers::pi / len;
      const double amp = std::sqrt(len / max_len) * rng.uniform(0.5, 1.0);
      f.waves.push_back({k * std::cos(theta), k * std::sin(theta),
                         rng.uniform(0.0, 2.0 * std::numbers::pi), amp});
      power += 0.5 * amp * amp;
    }
    for (auto &w : f.waves) w.amp /= std::sqrt(power);
    return f;
  }

  double operator()(double x, double y) const {
    double v = 0.0;
    for (const auto &w : waves) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
    return v;
  }
};

inline constexpr std::size_t kSharedFields = 3;

/// Loading of each shared field on an optical band; smooth in wavelength.
inline std::array<double, kSharedFields> spectral_loadings(double nm) {
  return {1.0 + 0.3 * std::cos(nm / 300.0), 0.7 * std::cos(nm / 400.0 + 1.0),
          0.7 * std::sin(nm / 250.0)};
}

/// (offset, loadings) of a categorical channel.
inline std::pair<double, std::array<double, kSharedFields>> categorical_response(ChannelCategory c) {
  using C = ChannelCategory;
  switch (c) {
  case C::vv_asc: return {-10.0, {3.0, 1.5, 0.0}};
  case C::vh_asc: return {-17.0, {2.5, 1.0, 0.8}};
  case C::hh_asc: return {-9.0, {3.0, 0.5, -0.5}};
  case C::hv_asc: return {-18.0, {2.2, 1.2, 0.6}};
  case C::vv_desc: return {-10.5, {2.8, 1.6, 0.2}};
  case C::vh_desc: return {-17.5, {2.4, 1.1, 0.9}};
  case C::hh_desc: return {-9.5, {2.9, 0.6, -0.4}};
  case C::hv_desc: return {-18.5, {2.1, 1.3, 0.7}};
  case C::dsm: return {120.0, {25.0, 0.0, 6.0}};
  case C::dtm: return {115.0, {25.0, 0.0, 0.0}};
  case C::slope: return {8.0, {3.0, 2.0, 0.0}};
  }
  return {0.0, {0.0, 0.0, 0.0}};
}

inline std::vector<int> random_days(Rng &rng, std::size_t count) {
  std::vector<int> days;
  while (days.size() < count) {
    const int d = 1 + static_cast<int>(rng.index(365));
    if (std::find(days.begin(), days.end(), d) == days.end()) days.push_back(d);
  }
  std::sort(days.begin(), days.end());
  return days;
}

} // namespace detail

/// Deterministic synthetic sample: every modality observes the same shared
/// smooth fields in one physical frame centered on the tile, through its own
/// spectral or categorical response, seasonal modulation and sensor noise.
inline MultimodalSample generate_sample(const DatasetSpec &spec, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5A3D));
  std::array<detail::PlaneWaveField, detail::kSharedFields> fields;
  std::array<double, detail::kSharedFields> season_phase{};
  for (std::size_t l = 0; l < fields.size(); ++l) {
    fields[l] = detail::PlaneWaveField::random(rng, 8, 10.0, 1000.0);
    season_phase[l] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  MultimodalSample sample;
  sample.dataset = spec.name;
  for (const auto &mod : spec.modalities) {
    RasterStack r;
    r.t = mod.temporal ? 2 + rng.index(mod.t_max - 1) : 1;
    r.c = mod.channels.size();
    r.h = r.w = mod.tile_size;
    r.days = detail::random_days(rng, r.t);
    r.values.resize(r.size());
    const double noise = 0.05;
    const double half = 0.5 * static_cast<double>(mod.tile_size);
    for (std::size_t ti = 0; ti < r.t; ++ti) {
      std::array<double, detail::kSharedFields> season{};
      for (std::size_t l = 0; l < season.size(); ++l)
        season[l] = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * r.days[ti] / 365.0 +
                                          season_phase[l]);
      for (std::size_t y = 0; y < r.h; ++y)
        for (std::size_t x = 0; x < r.w; ++x) {
          const double px = (static_cast<double>(x) + 0.5 - half) * mod.gsd_native;
          const double py = (static_cast<double>(y) + 0.5 - half) * mod.gsd_native;
          std::array<double, detail::kSharedFields> f{};
          for (std::size_t l = 0; l < f.size(); ++l) f[l] = fields[l](px, py) * season[l];
          for (std::size_t ci = 0; ci < r.c; ++ci) {
            const auto &ch = mod.channels[ci];
            double v;
            if (ch.is_optical()) {
              const auto a = detail::spectral_loadings(ch.wavelength_nm());
              const double base = 800.0 + 0.5 * ch.wavelength_nm();
              v = base + 200.0 * (a[0] * f[0] + a[1] * f[1] + a[2] * f[2]) +
                  200.0 * noise * rng.normal();
            } else {
              const auto [offset, a] = detail::categorical_response(ch.category());
              const double gain = std::max({std::abs(a[0]), std::abs(a[1]), std::abs(a[2])});
              v = offset + a[0] * f[0] + a[1] * f[1] + a[2] * f[2] + gain * noise * rng.normal();
            }
            r.at(ti, ci, y, x) = v;
          }
        }
    }
    sample.modalities.push_back(std::move(r));
  }
  return sample;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

inline RasterStack standardize(RasterStack r, const std::vector<ChannelStats> &stats) {
  if (stats.size() != r.c)
    throw ConfigError("standardize: " + std::to_string(stats.size()) + " stats for " +
                      std::to_string(r.c) + " channels");
  for (std::size_t ti = 0; ti < r.t; ++ti)
    for (std::size_t ci = 0; ci < r.c; ++ci)
      for (std::size_t i = 0; i < r.h * r.w; ++i) {
        double &v = r.values[(ti * r.c + ci) * r.h * r.w + i];
        v = (v - stats[ci].mean) / stats[ci].std;
      }
  return r;
}

inline RasterStack destandardize(RasterStack r, const std::vector<ChannelStats> &stats) {
  if (stats.size() != r.c)
    throw ConfigError("destandardize: " + std::to_string(stats.size()) + " stats for " +
                      std::to_string(r.c) + " channels");
  for (std::size_t ti = 0; ti < r.t; ++ti)
    for (std::size_t ci = 0; ci < r.c; ++ci)
      for (std::size_t i = 0; i < r.h * r.w; ++i) {
        double &v = r.values[(ti * r.c + ci) * r.h * r.w + i];
        v = v * stats[ci].std + stats[ci].mean;
      }
  return r;
}

inline MultimodalSample standardize(MultimodalSample s, const DatasetSpec &spec,
                                    const NormalizationTable &table) {
  for (std::size_t m = 0; m < s.modalities.size(); ++m)
    s.modalities[m] = standardize(std::move(s.modalities[m]),
                                  table.at(spec.name, spec.modalities.at(m).name));
  return s;
}

/// Channel moments over `samples` generated samples (seeds seed, seed+1, ...).
inline NormalizationTable compute_normalization(const std::vector<DatasetSpec> &datasets,
                                                std::size_t samples, std::uint64_t seed) {
  NormalizationTable table;
  for (const auto &spec : datasets) {
    std::vector<std::vector<double>> sum(spec.modalities.size()), sq(spec.modalities.size());
    std::vector<double> count(spec.modalities.size(), 0.0);
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
      sum[m].assign(spec.modalities[m].channels.size(), 0.0);
      sq[m].assign(spec.modalities[m].channels.size(), 0.0);
    }
    for (std::size_t i = 0; i < samples; ++i) {
      const auto s = generate_sample(spec, mix_seed(seed, i));
      for (std::size_t m = 0; m < s.modalities.size(); ++m) {
        const auto &r = s.modalities[m];
        for (std::size_t ti = 0; ti < r.t; ++ti)
          for (std::size_t ci = 0; ci < r.c; ++ci)
            for (std::size_t p = 0; p < r.h * r.w; ++p) {
              const double v = r.values[(ti * r.c + ci) * r.h * r.w + p];
              sum[m][ci] += v;
              sq[m][ci] += v * v;
            }
        count[m] += static_cast<double>(r.t * r.h * r.w);
      }
    }
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
      std::vector<ChannelStats> stats;
      for (std::size_t ci = 0; ci < sum[m].size(); ++ci) {
        const double mu = sum[m][ci] / count[m];
        const double var = std::max(sq[m][ci] / count[m] - mu * mu, 1e-12);
        stats.push_back({mu, std::sqrt(var)});
      }
      table.set(spec.name, spec.modalities[m].name, std::move(stats));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Random multimodal sampling
// ---------------------------------------------------------------------------

struct Iteration {
  std::size_t dataset = 0;
  std::vector<std::size_t> modalities; // ascending indices into the dataset
  double gsd_target = 1.0;
};

/// Dataset (weighted, uniform by default) -> nonempty modality subset
/// (uniform over nonempty subsets unless inclusion probabilities are set) ->
/// target GSD uniform over the dataset's discrete grid.
inline Iteration sample_iteration(const std::vector<DatasetSpec> &datasets, std::uint64_t seed) {
  if (datasets.empty()) throw ArgumentError("sample_iteration: empty corpus");
  Rng rng(mix_seed(seed, 0x17E5));
  Iteration it;
  double total = 0.0;
  for (const auto &d : datasets) total += d.weight;
  double pick = rng.uniform(0.0, total);
  it.dataset = datasets.size() - 1;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    if (pick < datasets[i].weight) {
      it.dataset = i;
      break;
    }
    pick -= datasets[i].weight;
  }
  const DatasetSpec &d = datasets[it.dataset];
  const std::size_t k = d.modalities.size();
  if (k == 0) throw ArgumentError("sample_iteration: dataset " + d.name + " has no modalities");
  const bool weighted = std::any_of(d.modalities.begin(), d.modalities.end(),
                                    [](const ModalitySpec &m) { return m.inclusion_probability >= 0.0; });
  if (weighted) {
    while (it.modalities.empty())
      for (std::size_t m = 0; m < k; ++m) {
        const double p = d.modalities[m].inclusion_probability;
        if (rng.uniform() < (p < 0.0 ? 0.5 : p)) it.modalities.push_back(m);
      }
  } else {
    const std::uint64_t mask = 1 + rng.index((std::size_t{1} << k) - 1);
    for (std::size_t m = 0; m < k; ++m)
      if (mask & (std::uint64_t{1} << m)) it.modalities.push_back(m);
  }
  const auto grid = d.gsd_grid();
  it.gsd_target = grid[rng.index(grid.size())];
  return it;
}

// ---------------------------------------------------------------------------
// Configuration file
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ChannelDescriptor &c) {
  if (c.is_optical()) return {{"wavelength_nm", c.wavelength_nm()}};
  return {{"category", std::string(to_string(c.category()))}};
}

inline ChannelDescriptor channel_from_json(const nlohmann::json &j) {
  if (j.contains("wavelength_nm")) return ChannelDescriptor::optical(j.at("wavelength_nm").get<double>());
  if (j.contains("category"))
    return ChannelDescriptor::categorical(parse_category(j.at("category").get<std::string>()));
  throw ConfigError("channel needs wavelength_nm or category: " + j.dump());
}

inline nlohmann::json to_json(const CorpusConfig &cfg) {
  nlohmann::json datasets = nlohmann::json::array();
  for (const auto &d : cfg.datasets) {
    nlohmann::json mods = nlohmann::json::array();
    for (const auto &m : d.modalities) {
      nlohmann::json channels = nlohmann::json::array();
      for (const auto &c : m.channels) channels.push_back(to_json(c));
      nlohmann::json jm = {{"name", m.name},         {"gsd", m.gsd_native},
                           {"temporal", m.temporal}, {"t_max", m.t_max},
                           {"tile_size", m.tile_size}, {"channels", channels}};
      if (m.inclusion_probability >= 0.0) jm["inclusion_probability"] = m.inclusion_probability;
      mods.push_back(jm);
    }
    datasets.push_back({{"name", d.name},
                        {"gsd_range",
                         {{"min", d.gsd_min}, {"max", d.gsd_max}, {"interval", d.gsd_interval}}},
                        {"batch_size", d.batch_size},
                        {"weight", d.weight},
                        {"modalities", mods}});
  }
  nlohmann::json norm = nlohmann::json::object();
  for (const auto &[key, stats] : cfg.normalization.entries()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &s : stats) rows.push_back({{"mean", s.mean}, {"std", s.std}});
    norm[key] = rows;
  }
  return {{"version", 1}, {"datasets", datasets}, {"normalization", norm}};
}

inline CorpusConfig corpus_from_json(const nlohmann::json &j) {
  try {
    CorpusConfig cfg;
    for (const auto &jd : j.at("datasets")) {
      DatasetSpec d;
      d.name = jd.at("name").get<std::string>();
      d.gsd_min = jd.at("gsd_range").at("min").get<double>();
      d.gsd_max = jd.at("gsd_range").at("max").get<double>();
      d.gsd_interval = jd.at("gsd_range").at("interval").get<double>();
      d.batch_size = jd.at("batch_size").get<std::size_t>();
      d.weight = jd.value("weight", 1.0);
      for (const auto &jm : jd.at("modalities")) {
        ModalitySpec m;
        m.name = jm.at("name").get<std::string>();
        m.gsd_native = jm.at("gsd").get<double>();
        m.temporal = jm.value("temporal", false);
        m.t_max = jm.value("t_max", std::size_t{1});
        m.tile_size = jm.at("tile_size").get<std::size_t>();
        m.inclusion_probability = jm.value("inclusion_probability", -1.0);
        for (const auto &jc : jm.at("channels")) m.channels.push_back(channel_from_json(jc));
        d.modalities.push_back(std::move(m));
      }
      cfg.datasets.push_back(std::move(d));
    }
    if (j.contains("normalization"))
      for (const auto &[key, rows] : j.at("normalization").items()) {
        const auto slash = key.find('/');
        if (slash == std::string::npos) throw ConfigError("bad normalization key: " + key);
        std::vector<ChannelStats> stats;
        for (const auto &r : rows) stats.push_back({r.at("mean").get<double>(), r.at("std").get<double>()});
        cfg.normalization.set(key.substr(0, slash), key.substr(slash + 1), std::move(stats));
      }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("corpus config: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("corpus config: ") + e.what());
  } catch (const std::out_of_range &e) {
    throw ConfigError(std::string("corpus config: ") + e.what());
  }
}

inline CorpusConfig load_corpus_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read corpus config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("corpus config " + path + ": " + e.what());
  }
  return corpus_from_json(j);
}

inline void save_corpus_config(const CorpusConfig &cfg, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write corpus config: " + path);
  out << to_json(cfg).dump(2) << '\n';
}

/// Built-in three-dataset corpus with normalization frozen from `samples`
/// generated tiles.
inline CorpusConfig builtin_corpus(std::size_t samples = 1000, std::uint64_t seed = 20240101) {
  CorpusConfig cfg;
  cfg.datasets = builtin_datasets();
  cfg.normalization = compute_normalization(cfg.datasets, samples, seed);
  return cfg;
}

} // namespace ramen
