#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "ramen/numerics/nn.hpp"
#include "ramen/numerics/tensor.hpp"

namespace ramen {

/// |analytic - numeric| / max(|analytic|, |numeric|, floor)
///
/// The floor keeps vanishing gradients (e.g. key biases under softmax) from
/// turning finite-difference round-off into large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Central-difference probe of one coordinate of a leaf tensor, fourth-order
/// stencil: [8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))] / 12h.
template <typename S>
double central_difference(const std::function<Tensor<S>()> &loss, Tensor<S> &leaf,
                          std::size_t coord, double eps) {
  NoGradGuard guard;
  auto values = leaf.mutable_data();
  const S saved = values[coord];
  auto at = [&](double offset) {
    values[coord] = static_cast<S>(static_cast<double>(saved) + offset);
    return static_cast<double>(loss().item());
  };
  const double d1 = at(eps) - at(-eps);
  const double d2 = at(2.0 * eps) - at(-2.0 * eps);
  values[coord] = saved;
  return (8.0 * d1 - d2) / (12.0 * eps);
}

/// Compares dLoss/dx from `backward` with central differences.
///
/// `f` maps x to a scalar. When `coords` is empty every coordinate is checked.
/// Returns the maximum relative error.
template <typename S>
double finite_diff_check(const std::function<Tensor<S>(const Tensor<S> &)> &f,
                         Tensor<S> &x, double eps = 1e-5,
                         std::vector<std::size_t> coords = {}) {
  if (!x.requires_grad()) throw ArgumentError("finite_diff_check: x must require grad");
  x.zero_grad();
  backward(f(x));
  const std::vector<S> analytic(x.grad().begin(), x.grad().end());
  if (coords.empty()) {
    coords.resize(x.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  }
  std::function<Tensor<S>()> loss = [&] { return f(x); };
  double worst = 0.0;
  for (std::size_t c : coords) {
    const double numeric = central_difference(loss, x, c, eps);
    worst = std::max(worst, relative_error(static_cast<double>(analytic[c]), numeric));
  }
  return worst;
}

/// Spot-checks `count` random (parameter, coordinate) pairs of a parameter set.
/// `gradient_scale` multiplies the analytic gradient before comparison; values
/// other than 1 serve as a negative control.
template <typename S>
double parameter_spot_check(const std::function<Tensor<S>()> &loss, ParameterSet<S> &params,
                            std::size_t count, Rng &rng, double eps = 1e-5,
                            double gradient_scale = 1.0, double floor = 1e-8) {
  params.zero_grad();
  backward(loss());
  // parameters the loss actually reaches; unused projectors etc. are skipped
  std::vector<Tensor<S>> reached;
  for (const auto &e : params.entries()) {
    const auto g = e.tensor.grad();
    if (std::any_of(g.begin(), g.end(), [](S v) { return v != S(0); }))
      reached.push_back(e.tensor);
  }
  if (reached.empty()) throw ArgumentError("parameter_spot_check: loss reaches no parameter");
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor<S> leaf = reached[rng.index(reached.size())];
    const std::size_t flat = rng.index(leaf.size());
    const double analytic = static_cast<double>(leaf.grad()[flat]) * gradient_scale;
    const double numeric = central_difference(loss, leaf, flat, eps);
    worst = std::max(worst, relative_error(analytic, numeric, floor));
  }
  return worst;
}

} // namespace ramen
