#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ramen/numerics/ops.hpp"
#include "ramen/numerics/tensor.hpp"

namespace ramen {

/// splitmix64 finalizer; used to derive independent seed streams.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  /// Normal redrawn until within two standard deviations.
  double truncated_normal(double stddev) {
    for (;;) {
      const double z = normal();
      if (std::abs(z) <= 2.0) return z * stddev;
    }
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64 &engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

template <typename S>
Tensor<S> truncated_normal_tensor(Shape shape, double stddev, Rng &rng) {
  std::vector<S> data(numel(shape));
  for (auto &v : data) v = static_cast<S>(rng.truncated_normal(stddev));
  return Tensor<S>(std::move(shape), std::move(data), true);
}

template <typename S> Tensor<S> parameter_zeros(Shape shape) {
  return Tensor<S>::zeros(std::move(shape), true);
}

template <typename S> Tensor<S> parameter_ones(Shape shape) {
  return Tensor<S>::full(std::move(shape), S(1), true);
}

/// Named trainable tensors of one model. Names are unique.
template <typename S> class ParameterSet {
public:
  struct Entry {
    std::string name;
    Tensor<S> tensor;
  };

  void add(std::string name, Tensor<S> tensor) {
    for (const auto &e : entries_)
      if (e.name == name) throw ArgumentError("duplicate parameter name: " + name);
    entries_.push_back({std::move(name), std::move(tensor)});
  }

  const std::vector<Entry> &entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  const Tensor<S> *find(const std::string &name) const {
    for (const auto &e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }

  std::size_t count() const {
    std::size_t total = 0;
    for (const auto &e : entries_) total += e.tensor.size();
    return total;
  }

  std::size_t count_prefix(const std::string &prefix) const {
    std::size_t total = 0;
    for (const auto &e : entries_)
      if (e.name.rfind(prefix, 0) == 0) total += e.tensor.size();
    return total;
  }

  void zero_grad() {
    for (auto &e : entries_) e.tensor.zero_grad();
  }

private:
  std::vector<Entry> entries_;
};

/// Affine map y = x W + b with W stored [in x out].
template <typename S> struct Linear {
  Tensor<S> weight;
  Tensor<S> bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng &rng, double stddev = 0.02)
      : weight(truncated_normal_tensor<S>({in, out}, stddev, rng)),
        bias(parameter_zeros<S>({out})) {}

  static Linear zero_init(std::size_t in, std::size_t out) {
    Linear l;
    l.weight = parameter_zeros<S>({in, out});
    l.bias = parameter_zeros<S>({out});
    return l;
  }

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor<S> operator()(const Tensor<S> &x) const { return linear(x, weight, bias); }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    set.add(prefix + ".weight", weight);
    set.add(prefix + ".bias", bias);
  }
};

template <typename S> struct LayerNorm {
  Tensor<S> gamma;
  Tensor<S> beta;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim)
      : gamma(parameter_ones<S>({dim})), beta(parameter_zeros<S>({dim})) {}

  Tensor<S> operator()(const Tensor<S> &x) const { return layer_norm(x, gamma, beta); }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    set.add(prefix + ".weight", gamma);
    set.add(prefix + ".bias", beta);
  }
};

/// Two affine layers with a GELU between them.
template <typename S> struct Mlp {
  Linear<S> fc1;
  Linear<S> fc2;

  Mlp() = default;
  Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng &rng)
      : fc1(in, hidden, rng), fc2(hidden, out, rng) {}

  Tensor<S> operator()(const Tensor<S> &x) const { return fc2(gelu(fc1(x))); }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    fc1.collect(set, prefix + ".fc1");
    fc2.collect(set, prefix + ".fc2");
  }
};

/// Pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x)).
template <typename S> struct TransformerBlock {
  std::size_t heads = 1;
  LayerNorm<S> norm1;
  Linear<S> qkv;
  Linear<S> proj;
  LayerNorm<S> norm2;
  Mlp<S> mlp;

  TransformerBlock() = default;
  TransformerBlock(std::size_t dim, std::size_t num_heads, std::size_t mlp_ratio, Rng &rng)
      : heads(num_heads), norm1(dim), qkv(dim, 3 * dim, rng), proj(dim, dim, rng),
        norm2(dim), mlp(dim, mlp_ratio * dim, dim, rng) {
    if (dim % num_heads != 0)
      throw ArgumentError("transformer block: dim " + std::to_string(dim) +
                          " not divisible by heads " + std::to_string(num_heads));
  }

  /// x: [rows x dim]; attention runs within consecutive groups of `group` rows
  /// (group == 0 means one group spanning all rows).
  Tensor<S> operator()(const Tensor<S> &x, std::size_t group = 0) const {
    const std::size_t g = group == 0 ? x.dim(0) : group;
    Tensor<S> h = add(x, proj(multi_head_attention(qkv(norm1(x)), heads, g)));
    return add(h, mlp(norm2(h)));
  }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    norm1.collect(set, prefix + ".norm1");
    qkv.collect(set, prefix + ".attn.qkv");
    proj.collect(set, prefix + ".attn.proj");
    norm2.collect(set, prefix + ".norm2");
    mlp.collect(set, prefix + ".mlp");
  }
};

} // namespace ramen
