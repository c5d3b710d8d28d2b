#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "ramen/numerics/nn.hpp"

namespace ramen {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// AdamW with decoupled weight decay. Decay applies to parameters of rank >= 2
/// only; biases, norms and single tokens are left undecayed.
template <typename S> class AdamW {
public:
  AdamW(const ParameterSet<S> &params, AdamWConfig config = {})
      : params_(params), config_(config) {
    for (const auto &e : params_.entries()) {
      first_.emplace_back(e.tensor.size(), 0.0);
      second_.emplace_back(e.tensor.size(), 0.0);
    }
  }

  void step(double lr) {
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    auto &entries = params_.entries();
    for (std::size_t p = 0; p < entries.size(); ++p) {
      Tensor<S> t = entries[p].tensor;
      if (!t.has_grad()) continue;
      auto values = t.mutable_data();
      const auto grad = t.grad();
      const bool decay = t.rank() >= 2 && config_.weight_decay > 0.0;
      auto &m = first_[p];
      auto &v = second_[p];
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        double x = static_cast<double>(values[i]);
        if (decay) x -= lr * config_.weight_decay * x;
        x -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
        values[i] = static_cast<S>(x);
      }
    }
  }

  void zero_grad() { params_.zero_grad(); }
  std::size_t steps() const { return steps_; }

private:
  ParameterSet<S> params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

/// Linear warmup from 0 to `base`, then cosine decay to 0 at `total_steps`.
inline double warmup_cosine_lr(std::size_t step, std::size_t total_steps,
                               std::size_t warmup_steps, double base) {
  if (step < warmup_steps)
    return base * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return base;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

} // namespace ramen
