#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ramen/model.hpp"
#include "ramen/numerics/gradcheck.hpp"

namespace ramen {

struct GradcheckResult {
  std::string name;
  double max_error = 0.0;
  std::size_t probes = 0;
  bool passed = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double eps = 1e-3;
  double tolerance = 1e-4;
  double floor = 1e-6;                // relative-error denominator floor
  std::size_t probes = 12;            // coordinates per input tensor
  std::size_t parameter_probes = 20;  // random parameter coordinates per check
  double gradient_scale = 1.0;        // != 1 corrupts analytic gradients (negative control)
};

struct GradcheckReport {
  std::vector<GradcheckResult> results;

  bool passed() const {
    return std::all_of(results.begin(), results.end(),
                       [](const GradcheckResult &r) { return r.passed; });
  }

  void print(std::ostream &os) const {
    for (const auto &r : results)
      os << (r.passed ? "PASS " : "FAIL ") << r.name << " max_rel_error=" << r.max_error
         << " probes=" << r.probes << '\n';
  }
};

namespace detail {

using D = double;

inline Tensor<D> random_tensor(Shape shape, Rng &rng, bool requires_grad, double scale = 1.0) {
  std::vector<D> v(numel(shape));
  for (auto &x : v) x = rng.normal(0.0, scale);
  return Tensor<D>(std::move(shape), std::move(v), requires_grad);
}

/// Contracts y with a fixed random tensor so every output entry matters.
inline Tensor<D> probe_sum(const Tensor<D> &y, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xC0DE));
  return sum(mul(y, random_tensor(y.shape(), rng, false)));
}

class Suite {
public:
  explicit Suite(const GradcheckOptions &opt) : opt_(opt), rng_(mix_seed(opt.seed, 0x6C)) {}

  /// Input-gradient check over randomly chosen coordinates of each leaf.
  void inputs(const std::string &name, const std::function<Tensor<D>()> &loss,
              std::vector<Tensor<D>> leaves) {
    GradcheckResult r{name, 0.0, 0, false};
    for (auto &l : leaves) l.zero_grad();
    backward(loss());
    for (auto &leaf : leaves) {
      const std::vector<D> analytic(leaf.grad().begin(), leaf.grad().end());
      const std::size_t n = std::min(opt_.probes, leaf.size());
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = n == leaf.size() ? i : rng_.index(leaf.size());
        const double numeric = central_difference(loss, leaf, c, opt_.eps);
        r.max_error = std::max(r.max_error,
                               relative_error(analytic[c] * opt_.gradient_scale, numeric, opt_.floor));
        ++r.probes;
      }
    }
    finish(std::move(r));
  }

  /// Random parameter coordinates of every parameter the loss reaches.
  void parameters(const std::string &name, const std::function<Tensor<D>()> &loss,
                  ParameterSet<D> params) {
    GradcheckResult r{name, 0.0, opt_.parameter_probes, false};
    r.max_error = parameter_spot_check(loss, params, opt_.parameter_probes, rng_, opt_.eps,
                                       opt_.gradient_scale, opt_.floor);
    finish(std::move(r));
  }

  GradcheckReport report;

private:
  void finish(GradcheckResult r) {
    r.passed = r.max_error < opt_.tolerance;
    report.results.push_back(std::move(r));
  }

  GradcheckOptions opt_;
  Rng rng_;
};

/// Gives zero-initialized experts and gate outputs random values so every
/// resampler path carries gradient.
inline void perturb_zero_init(const ParameterSet<D> &params, const std::string &prefix, Rng &rng) {
  for (const auto &e : params.entries()) {
    if (e.name.rfind(prefix, 0) != 0) continue;
    if (e.name.find(".expert") == std::string::npos && e.name.find(".gate.fc2") == std::string::npos)
      continue;
    Tensor<D> t = e.tensor;
    for (auto &v : t.mutable_data()) v = rng.normal(0.0, 0.05);
  }
}

inline ParameterSet<D> subset(const ParameterSet<D> &all, const std::string &prefix) {
  ParameterSet<D> out;
  for (const auto &e : all.entries())
    if (e.name.rfind(prefix, 0) == 0) out.add(e.name, e.tensor);
  return out;
}

/// Two small modalities with different GSDs, channel kinds and time steps.
inline std::vector<ModalityInput<D>> toy_inputs(Rng &rng) {
  std::vector<ModalityInput<D>> in;
  in.push_back({"optical",
                {ChannelDescriptor::optical(490), ChannelDescriptor::optical(665),
                 ChannelDescriptor::optical(842)},
                10.0,
                random_tensor({2, 3, 4, 4}, rng, false),
                {40, 200}});
  in.push_back({"radar",
                {ChannelDescriptor::categorical(ChannelCategory::vv_asc),
                 ChannelDescriptor::categorical(ChannelCategory::vh_asc)},
                5.0,
                random_tensor({1, 2, 6, 6}, rng, false),
                {120}});
  return in;
}

} // namespace detail

/// Module-level and end-to-end finite-difference checks in double precision.
inline GradcheckReport run_gradcheck_suite(const ModelConfig &config,
                                           const GradcheckOptions &opt = {}) {
  using detail::D;
  using detail::probe_sum;
  using detail::random_tensor;
  detail::Suite suite(opt);
  Rng rng(mix_seed(opt.seed, 0x61));
  const std::uint64_t ps = opt.seed;

  // fresh model for the end-to-end check, perturbed copy for module checks
  const Ramen<D> fresh(config, opt.seed);
  const Ramen<D> model(config, opt.seed);
  const ParameterSet<D> all = model.parameters();
  detail::perturb_zero_init(all, "resampler", rng);
  detail::perturb_zero_init(all, "reconstruction.resampler", rng);
  const std::size_t d = config.dim;

  {
    Tensor<D> x = random_tensor({2, 3, 3, 4}, rng, true);
    Tensor<D> m = random_tensor({3, d}, rng, true, 0.5);
    suite.inputs("numerics.ops", [&] {
      Tensor<D> y = permute(bilinear_resize(project(x, m), 5, 2), {0, 2, 3, 1});
      y = gelu(layer_norm(y, parameter_ones<D>({d}), parameter_zeros<D>({d})));
      return probe_sum(softmax(y, 3), ps);
    }, {x, m});
  }
  {
    Tensor<D> x = random_tensor({2, 3, 3, 3}, rng, true);
    const std::vector<ChannelDescriptor> optical = {ChannelDescriptor::optical(560),
                                                    ChannelDescriptor::optical(783),
                                                    ChannelDescriptor::optical(1610)};
    const std::vector<ChannelDescriptor> radar = {
        ChannelDescriptor::categorical(ChannelCategory::vv_desc),
        ChannelDescriptor::categorical(ChannelCategory::hv_asc),
        ChannelDescriptor::categorical(ChannelCategory::dsm)};
    auto loss = [&] {
      const auto &bank = model.projectors();
      Tensor<D> a = project(x, bank.build_matrix(optical));
      Tensor<D> b = reconstruct_channels(a, bank.build_matrix({radar[0], radar[1]}));
      Tensor<D> c = project(x, bank.build_matrix({radar[2], radar[2], radar[2]}));
      return add(probe_sum(b, ps), probe_sum(c, ps + 1));
    };
    suite.inputs("projector.inputs", loss, {x});
    suite.parameters("projector.parameters", loss, detail::subset(all, "projector"));
  }
  {
    Tensor<D> x = random_tensor({2, d, 3, 4}, rng, true);
    auto loss = [&] {
      const auto &rs = model.resampler();
      Tensor<D> up = rs.resample(x, ResampleSpec::make(3, 4, 10.0, 6.0));
      Tensor<D> down = rs.resample(x, ResampleSpec::make(3, 4, 10.0, 20.0));
      return add(probe_sum(up, ps), probe_sum(down, ps + 1));
    };
    suite.inputs("resampler.inputs", loss, {x});
    suite.parameters("resampler.parameters", loss, detail::subset(all, "resampler"));
  }
  {
    Tensor<D> x = random_tensor({4, d, 2, 2}, rng, true);
    const std::vector<int> days = {15, 80, 190, 300};
    auto loss = [&] { return probe_sum(model.temporal().aggregate(x, days), ps); };
    suite.inputs("temporal.inputs", loss, {x});
    suite.parameters("temporal.parameters", loss, detail::subset(all, "temporal"));
  }
  {
    Tensor<D> x = random_tensor({d, 2, 2}, rng, true);
    const std::vector<int> days = {33, 150, 260};
    auto loss = [&] { return probe_sum(model.expander().expand(x, days), ps); };
    suite.inputs("temporal_expander.inputs", loss, {x});
    suite.parameters("temporal_expander.parameters", loss,
                     detail::subset(all, "reconstruction.temporal"));
  }
  {
    Tensor<D> z = random_tensor({5, d}, rng, true);
    auto loss = [&] { return probe_sum(model.encoder().encode_tokens(z), ps); };
    suite.inputs("encoder.inputs", loss, {z});
    suite.parameters("encoder.parameters", loss, detail::subset(all, "encoder"));
  }
  {
    TokenSequence<D> seq;
    seq.gsd_target = 10.0;
    seq.grids = {{0, 2, 3, 0}, {1, 2, 2, 6}};
    seq.tokens = random_tensor({10, d}, rng, false);
    const MaskPlan plan = make_mask(10, 0.6, opt.seed);
    Tensor<D> e = random_tensor({plan.visible.size() + 1, d}, rng, true);
    auto loss = [&] { return probe_sum(model.decoder().decode(e, plan, seq), ps); };
    suite.inputs("decoder.inputs", loss, {e});
    suite.parameters("decoder.parameters", loss, detail::subset(all, "decoder"));
  }
  {
    Tensor<D> r0 = random_tensor({2, 2, 3, 3}, rng, true);
    Tensor<D> r1 = random_tensor({1, 3, 2, 2}, rng, true);
    const Tensor<D> t0 = random_tensor({2, 2, 3, 3}, rng, false);
    const Tensor<D> t1 = random_tensor({1, 3, 2, 2}, rng, false);
    const std::vector<std::vector<std::uint8_t>> masks = {{1, 0, 1, 1, 0, 0, 1, 0, 1},
                                                          {0, 1, 1, 0}};
    suite.inputs("masked_loss.inputs",
                 [&] { return masked_loss<D>({r0, r1}, {t0, t1}, masks).loss; }, {r0, r1});
  }
  {
    Rng data(mix_seed(opt.seed, 0xDA7A));
    const auto inputs = detail::toy_inputs(data);
    const std::uint64_t mask_seed = mix_seed(opt.seed, 0x3A5C);
    suite.parameters("end_to_end.fresh",
                     [&] { return fresh.forward(inputs, 10.0, mask_seed).loss; },
                     fresh.parameters());
    suite.parameters("end_to_end.perturbed",
                     [&] { return model.forward(inputs, 10.0, mask_seed).loss; }, all);
  }
  return suite.report;
}

} // namespace ramen
