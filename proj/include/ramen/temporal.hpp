#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ramen/encodings.hpp"
#include "ramen/numerics/nn.hpp"
#include "ramen/numerics/ops.hpp"

namespace ramen {

/// Acquisition days (day of year), strictly increasing.
class TimeStamps {
public:
  TimeStamps() = default;
  explicit TimeStamps(std::vector<int> days) : days_(std::move(days)) {
    if (days_.empty()) throw ArgumentError("time stamps: need at least one acquisition");
    for (std::size_t i = 0; i < days_.size(); ++i) {
      if (days_[i] < 1 || days_[i] > 366)
        throw ArgumentError("time stamps: day out of range: " + std::to_string(days_[i]));
      if (i > 0 && days_[i] <= days_[i - 1])
        throw ArgumentError("time stamps: days must be strictly increasing");
    }
  }

  std::size_t size() const { return days_.size(); }
  const std::vector<int> &days() const { return days_; }
  int operator[](std::size_t i) const { return days_[i]; }

private:
  std::vector<int> days_;
};

/// Day-of-acquisition encodings as a constant [T x D] tensor. Takes raw days so
/// callers may encode non-monotone orderings.
template <typename S>
Tensor<S> day_encodings(const std::vector<int> &days, const EncodingConfig &enc) {
  std::vector<std::vector<double>> rows;
  for (int d : days) rows.push_back(day_pe(d, enc.dim, enc.base));
  return encoding_rows<S>(rows, enc.dim);
}

struct TemporalConfig {
  std::size_t heads = 16;
  std::size_t key_dim = 8;
  std::size_t value_width = 0; // 0 -> 3 * D
};

/// Lightweight temporal attention encoder.
///
/// Per pixel: u_t = x_t + day_pe(d_t); v_t = value(u_t); k_t = key(v_t). Each
/// head owns one learned master query and one contiguous channel group of v;
/// its output is the attention-weighted sum of that group over time. Head
/// outputs are concatenated and mapped back to D by an affine layer.
template <typename S> class TemporalAggregator {
public:
  TemporalAggregator() = default;
  TemporalAggregator(const EncodingConfig &enc, const TemporalConfig &cfg, Rng &rng)
      : enc_(enc), heads_(cfg.heads), key_dim_(cfg.key_dim),
        width_(cfg.value_width ? cfg.value_width : 3 * enc.dim),
        value_(enc.dim, width_, rng), key_(width_, cfg.heads * cfg.key_dim, rng),
        query_(truncated_normal_tensor<S>({cfg.heads, cfg.key_dim}, 0.02, rng)),
        out_(width_, enc.dim, rng) {
    if (width_ % heads_ != 0)
      throw ArgumentError("temporal encoder: value width not divisible by heads");
  }

  std::size_t heads() const { return heads_; }
  std::size_t key_dim() const { return key_dim_; }
  std::size_t value_width() const { return width_; }
  const Linear<S> &value_map() const { return value_; }
  const Linear<S> &key_map() const { return key_; }
  const Linear<S> &output_map() const { return out_; }
  const Tensor<S> &query() const { return query_; }

  /// x [T x D x H x W] -> [D x H x W]
  Tensor<S> aggregate(const Tensor<S> &x, const TimeStamps &days) const {
    return aggregate(x, days.days());
  }

  Tensor<S> aggregate(const Tensor<S> &x, const std::vector<int> &days) const {
    if (x.rank() != 4 || x.dim(1) != enc_.dim)
      throw DimensionError("aggregate: expected [T x " + std::to_string(enc_.dim) +
                           " x H x W], got " + to_string(x.shape()));
    if (x.dim(0) != days.size())
      throw DimensionError("aggregate: " + std::to_string(x.dim(0)) + " time steps but " +
                           std::to_string(days.size()) + " days");
    const std::size_t t = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<S> seq = reshape(permute(x, {2, 3, 0, 1}), {h * w, t, d});
    seq = reshape(add_broadcast(seq, day_encodings<S>(days, enc_)), {h * w * t, d});
    Tensor<S> v = value_(seq);
    Tensor<S> k = key_(v);
    Tensor<S> pooled = out_(master_query_attention(k, query_, v, t));
    return permute(reshape(pooled, {h, w, d}), {2, 0, 1});
  }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    value_.collect(set, prefix + ".value");
    key_.collect(set, prefix + ".key");
    set.add(prefix + ".query", query_);
    out_.collect(set, prefix + ".out");
  }

private:
  EncodingConfig enc_;
  std::size_t heads_ = 16, key_dim_ = 8, width_ = 0;
  Linear<S> value_;
  Linear<S> key_;
  Tensor<S> query_;
  Linear<S> out_;
};

/// Reconstruction-side temporal expansion: replicate over T, add day
/// encodings, one self-attention block along time per pixel.
template <typename S> class TemporalExpander {
public:
  TemporalExpander() = default;
  TemporalExpander(const EncodingConfig &enc, std::size_t heads, std::size_t mlp_ratio, Rng &rng)
      : enc_(enc), block_(enc.dim, heads, mlp_ratio, rng) {}

  /// x [D x H x W] -> [T x D x H x W]
  Tensor<S> expand(const Tensor<S> &x, const TimeStamps &days) const {
    return expand(x, days.days());
  }

  Tensor<S> expand(const Tensor<S> &x, const std::vector<int> &days) const {
    if (x.rank() != 3 || x.dim(0) != enc_.dim)
      throw DimensionError("expand: expected [" + std::to_string(enc_.dim) +
                           " x H x W], got " + to_string(x.shape()));
    if (days.empty()) throw DimensionError("expand: no time steps");
    const std::size_t t = days.size(), d = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor<S> pixels = reshape(permute(x, {1, 2, 0}), {h * w, d});
    Tensor<S> seq = permute(expand_leading(pixels, t), {1, 0, 2}); // [HW x T x D]
    seq = reshape(add_broadcast(seq, day_encodings<S>(days, enc_)), {h * w * t, d});
    Tensor<S> out = block_(seq, t);
    return permute(reshape(out, {h, w, t, d}), {2, 3, 0, 1});
  }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    block_.collect(set, prefix + ".block");
  }

private:
  EncodingConfig enc_;
  TransformerBlock<S> block_;
};

} // namespace ramen
