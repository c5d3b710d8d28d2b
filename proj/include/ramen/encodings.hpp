#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ramen/numerics/nn.hpp"
#include "ramen/numerics/ops.hpp"

namespace ramen {

struct RegistryError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

enum class ChannelKind { optical, radar, elevation };

/// Non-optical channels with a learned embedding row each.
enum class ChannelCategory : std::size_t {
  vv_asc,
  vh_asc,
  hh_asc,
  hv_asc,
  vv_desc,
  vh_desc,
  hh_desc,
  hv_desc,
  dsm,
  dtm,
  slope,
};

inline constexpr std::size_t kNumCategories = 11;

inline constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "VV-asc", "VH-asc", "HH-asc", "HV-asc", "VV-desc", "VH-desc",
    "HH-desc", "HV-desc", "DSM", "DTM", "slope"};

inline std::string_view to_string(ChannelCategory c) {
  return kCategoryNames.at(static_cast<std::size_t>(c));
}

inline ChannelCategory parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kNumCategories; ++i)
    if (kCategoryNames[i] == name) return static_cast<ChannelCategory>(i);
  throw RegistryError("unknown channel category: " + std::string(name));
}

inline std::string_view to_string(ChannelKind k) {
  switch (k) {
  case ChannelKind::optical: return "optical";
  case ChannelKind::radar: return "radar";
  case ChannelKind::elevation: return "elevation";
  }
  return "?";
}

inline ChannelKind parse_kind(std::string_view name) {
  if (name == "optical") return ChannelKind::optical;
  if (name == "radar") return ChannelKind::radar;
  if (name == "elevation") return ChannelKind::elevation;
  throw ArgumentError("unknown channel kind: " + std::string(name));
}

inline ChannelKind kind_of(ChannelCategory c) {
  return static_cast<std::size_t>(c) < 8 ? ChannelKind::radar : ChannelKind::elevation;
}

/// Physical identity of one input band: a central wavelength for optical
/// bands, a categorical id otherwise.
class ChannelDescriptor {
public:
  static ChannelDescriptor optical(double wavelength_nm) {
    if (!(wavelength_nm > 0.0))
      throw ArgumentError("wavelength must be positive, got " + std::to_string(wavelength_nm));
    ChannelDescriptor d;
    d.kind_ = ChannelKind::optical;
    d.wavelength_nm_ = wavelength_nm;
    return d;
  }

  static ChannelDescriptor categorical(ChannelCategory category) {
    ChannelDescriptor d;
    d.kind_ = kind_of(category);
    d.category_ = category;
    return d;
  }

  ChannelKind kind() const { return kind_; }
  bool is_optical() const { return kind_ == ChannelKind::optical; }
  double wavelength_nm() const { return wavelength_nm_.value(); }
  ChannelCategory category() const { return category_.value(); }

  bool operator==(const ChannelDescriptor &) const = default;

  std::string label() const {
    if (is_optical()) {
      std::string s = std::to_string(wavelength_nm());
      s.erase(s.find_last_not_of('0') + 1);
      if (!s.empty() && s.back() == '.') s.pop_back();
      return s + "nm";
    }
    return std::string(to_string(category()));
  }

private:
  ChannelDescriptor() = default;
  ChannelKind kind_ = ChannelKind::optical;
  std::optional<double> wavelength_nm_;
  std::optional<ChannelCategory> category_;
};

struct EncodingConfig {
  std::size_t dim = 768;
  double base = 10000.0;
  double gsd_reference = 1.0; // G, meters
};

/// Frequency of sinusoid pair k for a `dim`-wide encoding: 1 / base^(2k/dim).
inline double pe_frequency(std::size_t k, std::size_t dim, double base = 10000.0) {
  return 1.0 / std::pow(base, 2.0 * static_cast<double>(k) / static_cast<double>(dim));
}

/// Interleaved sin/cos encoding of a scalar: [2k] = sin(v f_k), [2k+1] = cos(v f_k).
inline std::vector<double> sinusoid_encoding(double value, std::size_t dim,
                                             double base = 10000.0) {
  if (dim % 2 != 0) throw ArgumentError("encoding dimension must be even");
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < dim / 2; ++k) {
    const double arg = value * pe_frequency(k, dim, base);
    out[2 * k] = std::sin(arg);
    out[2 * k + 1] = std::cos(arg);
  }
  return out;
}

inline std::vector<double> wavelength_pe(double wavelength_nm, std::size_t dim,
                                         double base = 10000.0) {
  if (!(wavelength_nm > 0.0)) throw ArgumentError("wavelength must be positive");
  return sinusoid_encoding(wavelength_nm, dim, base);
}

/// Natural log of the interpolation ratio, ln(gsd_in / gsd_target).
inline double log_ratio(double gsd_in, double gsd_target) {
  if (!(gsd_in > 0.0) || !(gsd_target > 0.0))
    throw ArgumentError("GSD values must be positive");
  return std::log(gsd_in) - std::log(gsd_target);
}

inline std::vector<double> ratio_pe(double sigma, std::size_t dim, double base = 10000.0) {
  if (!std::isfinite(sigma)) throw ArgumentError("ratio_pe: sigma must be finite");
  return sinusoid_encoding(sigma, dim, base);
}

inline std::vector<double> day_pe(int day_of_year, std::size_t dim, double base = 10000.0) {
  if (day_of_year < 1 || day_of_year > 366)
    throw ArgumentError("day of year out of range [1, 366]: " + std::to_string(day_of_year));
  return sinusoid_encoding(static_cast<double>(day_of_year), dim, base);
}

/// Sinusoid argument of the GSD positional encoding at grid offset `pos` and
/// pair index k.
inline double gsd_pe_argument(double pos, std::size_t k, double gsd_target,
                              const EncodingConfig &cfg) {
  return (gsd_target / cfg.gsd_reference) * pos * pe_frequency(k, cfg.dim, cfg.base);
}

/// GSD-scaled 2D sin/cos positional encoding, [H x W x D].
///
/// The first D/2 channels encode the column index, the last D/2 the row index,
/// each as interleaved sin/cos pairs with frequencies 1 / base^(2k/D).
template <typename S>
Tensor<S> gsd_pe_2d(std::size_t height, std::size_t width, double gsd_target,
                    const EncodingConfig &cfg) {
  if (height == 0 || width == 0) throw ArgumentError("gsd_pe_2d: empty grid");
  if (!(gsd_target > 0.0)) throw ArgumentError("gsd_pe_2d: gsd_target must be positive");
  if (cfg.dim % 4 != 0) throw ArgumentError("gsd_pe_2d: dimension must be divisible by 4");
  const std::size_t d = cfg.dim, half = d / 2, pairs = d / 4;
  std::vector<S> out(height * width * d);
  for (std::size_t h = 0; h < height; ++h)
    for (std::size_t w = 0; w < width; ++w) {
      S *row = out.data() + (h * width + w) * d;
      for (std::size_t k = 0; k < pairs; ++k) {
        const double ax = gsd_pe_argument(static_cast<double>(w), k, gsd_target, cfg);
        const double ay = gsd_pe_argument(static_cast<double>(h), k, gsd_target, cfg);
        row[2 * k] = static_cast<S>(std::sin(ax));
        row[2 * k + 1] = static_cast<S>(std::cos(ax));
        row[half + 2 * k] = static_cast<S>(std::sin(ay));
        row[half + 2 * k + 1] = static_cast<S>(std::cos(ay));
      }
    }
  return Tensor<S>({height, width, d}, std::move(out));
}

/// Rows of sinusoid encodings as a constant [rows x dim] tensor.
template <typename S>
Tensor<S> encoding_rows(const std::vector<std::vector<double>> &rows, std::size_t dim) {
  std::vector<S> data;
  data.reserve(rows.size() * dim);
  for (const auto &r : rows) {
    if (r.size() != dim) throw DimensionError("encoding_rows: width mismatch");
    for (double v : r) data.push_back(static_cast<S>(v));
  }
  return Tensor<S>({rows.size(), dim}, std::move(data));
}

/// Learned [11 x D] table for radar polarizations/orbits and elevation layers.
template <typename S> class CategoricalEmbedding {
public:
  CategoricalEmbedding() = default;
  CategoricalEmbedding(std::size_t dim, Rng &rng)
      : table_(truncated_normal_tensor<S>({kNumCategories, dim}, 1.0, rng)) {}

  std::size_t dim() const { return table_.dim(1); }
  const Tensor<S> &table() const { return table_; }

  /// [ids.size() x D] rows, differentiable w.r.t. the table.
  Tensor<S> rows(const std::vector<ChannelCategory> &ids) const {
    std::vector<std::size_t> idx;
    idx.reserve(ids.size());
    for (auto id : ids) {
      const auto i = static_cast<std::size_t>(id);
      if (i >= kNumCategories) throw RegistryError("category id out of range");
      idx.push_back(i);
    }
    return gather_rows(table_, idx);
  }

  Tensor<S> row(ChannelCategory id) const { return rows({id}); }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    set.add(prefix + ".table", table_);
  }

private:
  Tensor<S> table_;
};

} // namespace ramen
