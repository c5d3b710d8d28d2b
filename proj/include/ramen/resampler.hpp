#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ramen/encodings.hpp"
#include "ramen/numerics/nn.hpp"
#include "ramen/numerics/ops.hpp"

namespace ramen {

/// Output extent for a resize from gsd_in to gsd_target: round-half-away of
/// (gsd_in / gsd_target) * extent, never below 1.
inline std::size_t target_extent(std::size_t extent, double gsd_in, double gsd_target) {
  if (!(gsd_in > 0.0) || !(gsd_target > 0.0))
    throw ArgumentError("target_dims: GSD values must be positive");
  if (extent == 0) throw ArgumentError("target_dims: extent must be positive");
  const double scaled = gsd_in / gsd_target * static_cast<double>(extent);
  return static_cast<std::size_t>(std::max(1.0, std::round(scaled)));
}

inline std::pair<std::size_t, std::size_t> target_dims(std::size_t height, std::size_t width,
                                                       double gsd_in, double gsd_target) {
  return {target_extent(height, gsd_in, gsd_target), target_extent(width, gsd_in, gsd_target)};
}

struct ResampleSpec {
  double gsd_in = 1.0;
  double gsd_target = 1.0;
  double sigma = 0.0;
  std::size_t in_h = 1, in_w = 1, out_h = 1, out_w = 1;

  static ResampleSpec make(std::size_t h, std::size_t w, double gsd_in, double gsd_target) {
    ResampleSpec s;
    s.gsd_in = gsd_in;
    s.gsd_target = gsd_target;
    s.sigma = log_ratio(gsd_in, gsd_target);
    s.in_h = h;
    s.in_w = w;
    std::tie(s.out_h, s.out_w) = target_dims(h, w, gsd_in, gsd_target);
    return s;
  }

  /// The reverse mapping: swapped GSDs, swapped extents, negated sigma.
  ResampleSpec inverse() const {
    ResampleSpec s;
    s.gsd_in = gsd_target;
    s.gsd_target = gsd_in;
    s.sigma = -sigma;
    s.in_h = out_h;
    s.in_w = out_w;
    s.out_h = in_h;
    s.out_w = in_w;
    return s;
  }
};

/// Adjustable spatial resampler: bilinear alignment plus a sigma-gated
/// residual mixture of pointwise (1x1) channel-mixing experts.
///
///   out = I(x) + sum_n w_n(sigma) Conv_n(I(x)),  w = softmax(MLP(ratio_pe(sigma)))
///
/// Experts carry no bias. Experts and the last gating layer start at zero, so
/// a fresh resampler is plain bilinear interpolation with uniform weights.
template <typename S> class SpatialResampler {
public:
  SpatialResampler() = default;
  SpatialResampler(const EncodingConfig &enc, std::size_t num_experts, std::size_t gate_hidden,
                   Rng &rng)
      : enc_(enc), gate_in_(enc.dim, gate_hidden, rng),
        gate_out_(Linear<S>::zero_init(gate_hidden, num_experts)) {
    for (std::size_t n = 0; n < num_experts; ++n)
      experts_.push_back(parameter_zeros<S>({enc.dim, enc.dim}));
  }

  std::size_t num_experts() const { return experts_.size(); }
  std::size_t dim() const { return enc_.dim; }
  const std::vector<Tensor<S>> &experts() const { return experts_; }

  /// Mixture weights [N] for a log ratio.
  Tensor<S> gate(double sigma) const {
    Tensor<S> code = encoding_rows<S>({ratio_pe(sigma, enc_.dim, enc_.base)}, enc_.dim);
    Tensor<S> logits = gate_out_(gelu(gate_in_(code)));
    return reshape(softmax(logits, 1), {experts_.size()});
  }

  /// x [T x D x H x W] -> [T x D x out_h x out_w]
  Tensor<S> resample(const Tensor<S> &x, const ResampleSpec &spec) const {
    if (x.rank() != 4 || x.dim(1) != enc_.dim || x.dim(2) != spec.in_h || x.dim(3) != spec.in_w)
      throw DimensionError("resample: input " + to_string(x.shape()) +
                           " inconsistent with spec " + std::to_string(spec.in_h) + "x" +
                           std::to_string(spec.in_w) + " at dim " + std::to_string(enc_.dim));
    return refine(align(x, spec), spec.sigma);
  }

  /// Bilinear alignment of the last two axes to the spec's output grid.
  static Tensor<S> align(const Tensor<S> &x, const ResampleSpec &spec) {
    if (x.dim(x.rank() - 2) == spec.out_h && x.dim(x.rank() - 1) == spec.out_w) return x;
    return bilinear_resize(x, spec.out_h, spec.out_w);
  }

  /// Residual expert mixture y + y K(sigma) applied per pixel. Being pointwise
  /// and linear it commutes with bilinear resizing.
  Tensor<S> refine(const Tensor<S> &y, double sigma) const {
    if (y.rank() != 4 || y.dim(1) != enc_.dim)
      throw DimensionError("refine: expected [T x " + std::to_string(enc_.dim) + " x H x W], got " +
                           to_string(y.shape()));
    // sum_n w_n (y W_n) == y (sum_n w_n W_n): mix the kernels first
    Tensor<S> kernel = weighted_sum(gate(sigma), experts_);
    const std::size_t t = y.dim(0), d = enc_.dim, h = y.dim(2), w = y.dim(3);
    Tensor<S> pixels = reshape(permute(y, {0, 2, 3, 1}), {t * h * w, d});
    Tensor<S> refined = permute(reshape(matmul(pixels, kernel), {t, h, w, d}), {0, 3, 1, 2});
    return add(y, refined);
  }

  /// Maps target-grid features back to the native grid described by `spec`.
  Tensor<S> resample_inverse(const Tensor<S> &y, const ResampleSpec &spec) const {
    return resample(y, spec.inverse());
  }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    gate_in_.collect(set, prefix + ".gate.fc1");
    gate_out_.collect(set, prefix + ".gate.fc2");
    for (std::size_t n = 0; n < experts_.size(); ++n)
      set.add(prefix + ".expert" + std::to_string(n) + ".weight", experts_[n]);
  }

private:
  EncodingConfig enc_;
  Linear<S> gate_in_;
  Linear<S> gate_out_;
  std::vector<Tensor<S>> experts_;
};

/// `count` ratios log-spaced over [lo, hi], endpoints included.
inline std::vector<double> log_spaced_ratios(double lo = 1e-2, double hi = 10.0,
                                             std::size_t count = 61) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) throw ArgumentError("invalid ratio grid");
  std::vector<double> out(count);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

struct ExpertSweepRow {
  double ratio = 1.0; // GSD_m / GSD_target
  std::vector<double> weights;
};

template <typename S>
std::vector<ExpertSweepRow> expert_sweep(const SpatialResampler<S> &resampler,
                                         const std::vector<double> &ratios) {
  NoGradGuard guard;
  std::vector<ExpertSweepRow> rows;
  for (double r : ratios) {
    if (!(r > 0.0)) throw ArgumentError("expert sweep: ratios must be positive");
    const Tensor<S> w = resampler.gate(std::log(r));
    ExpertSweepRow row{r, {}};
    for (S v : w.data()) row.weights.push_back(static_cast<double>(v));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// CSV with header `ratio,sigma,w_1,...,w_N`; sigma = ln(ratio).
inline void write_expert_sweep_csv(std::ostream &os, const std::vector<ExpertSweepRow> &rows) {
  const std::size_t n = rows.empty() ? 0 : rows.front().weights.size();
  os << "ratio,sigma";
  for (std::size_t i = 1; i <= n; ++i) os << ",w_" << i;
  os << '\n';
  os.precision(17);
  for (const auto &r : rows) {
    os << r.ratio << ',' << std::log(r.ratio);
    for (double w : r.weights) os << ',' << w;
    os << '\n';
  }
}

} // namespace ramen
