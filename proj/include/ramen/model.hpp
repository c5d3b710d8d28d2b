#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ramen/encodings.hpp"
#include "ramen/mae.hpp"
#include "ramen/numerics/nn.hpp"
#include "ramen/projector.hpp"
#include "ramen/resampler.hpp"
#include "ramen/temporal.hpp"

namespace ramen {

struct ModelConfig {
  std::string preset = "desk";
  std::size_t dim = 192;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t dec_dim = 96;
  std::size_t dec_depth = 2;
  std::size_t dec_heads = 4;
  std::size_t num_experts = 4;
  std::size_t mlp_ratio = 4;
  double mask_ratio = 0.75;
  std::size_t projector_hidden = 384; // 2 D
  std::size_t gate_hidden = 48;       // D / 4
  std::size_t expand_heads = 4;
  TemporalConfig temporal{16, 8, 576}; // value width 3 D
  double pe_base = 10000.0;
  double gsd_reference = 1.0;

  EncodingConfig encoding() const { return {dim, pe_base, gsd_reference}; }
  EncodingConfig decoder_encoding() const { return {dec_dim, pe_base, gsd_reference}; }

  /// Laptop-scale preset used by tests and the acceptance suite.
  static ModelConfig desk() { return with_dims("desk", 192, 4, 4, 96, 2, 4); }

  /// ViT-Base encoder, 512-wide 8-block decoder.
  static ModelConfig paper() { return with_dims("paper", 768, 12, 12, 512, 8, 16); }

  static ModelConfig from_preset(const std::string &name) {
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    throw ArgumentError("unknown preset: " + name + " (expected desk or paper)");
  }

  static ModelConfig with_dims(std::string name, std::size_t dim, std::size_t depth,
                               std::size_t heads, std::size_t dec_dim, std::size_t dec_depth,
                               std::size_t dec_heads) {
    ModelConfig c;
    c.preset = std::move(name);
    c.dim = dim;
    c.depth = depth;
    c.heads = heads;
    c.dec_dim = dec_dim;
    c.dec_depth = dec_depth;
    c.dec_heads = dec_heads;
    c.projector_hidden = 2 * dim;
    c.gate_hidden = dim / 4;
    c.expand_heads = heads;
    c.temporal = {16, 8, 3 * dim};
    return c;
  }

  void validate() const {
    if (dim == 0 || depth == 0 || heads == 0 || dec_dim == 0 || dec_depth == 0 ||
        dec_heads == 0 || num_experts == 0)
      throw ArgumentError("model config: all sizes must be positive");
    if (dim % heads != 0 || dec_dim % dec_heads != 0 || dim % expand_heads != 0)
      throw ArgumentError("model config: widths must be divisible by head counts");
    if (dim % 4 != 0 || dec_dim % 4 != 0)
      throw ArgumentError("model config: widths must be divisible by 4");
  }
};

/// One modality handed to the model: standardized pixels [T x C x H x W].
template <typename S> struct ModalityInput {
  std::string name;
  std::vector<ChannelDescriptor> channels;
  double gsd = 1.0;
  Tensor<S> pixels;
  std::vector<int> days; // one per time step
};

/// Per-modality intermediates of the embedding path.
template <typename S> struct EmbeddedModality {
  ProjectionMatrix<S> matrix;
  ResampleSpec spec;
  Tensor<S> latent; // [D x H_t x W_t]
};

template <typename S> struct ForwardResult {
  Tensor<S> loss;
  bool empty_mask = false;
  std::size_t tokens = 0;
  MaskPlan plan;
  std::vector<Tensor<S>> reconstructions;
  std::vector<std::vector<std::uint8_t>> pixel_masks;
};

/// Per-modality encoder features on the target grid.
template <typename S> struct FeatureGrid {
  std::string name;
  double gsd_target = 1.0;
  Tensor<S> features; // [D x H_t x W_t]
};

/// The full resolution-adjustable encoder with its MAE reconstruction path.
template <typename S> class Ramen {
public:
  explicit Ramen(ModelConfig config, std::uint64_t seed = 0) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    const EncodingConfig enc = config_.encoding();
    projectors_ = ProjectorBank<S>(enc, config_.projector_hidden, rng);
    resampler_ = SpatialResampler<S>(enc, config_.num_experts, config_.gate_hidden, rng);
    temporal_ = TemporalAggregator<S>(enc, config_.temporal, rng);
    encoder_ = MaeEncoder<S>(config_.dim, config_.depth, config_.heads, config_.mlp_ratio, rng);
    decoder_ = MaeDecoder<S>(config_.dim, config_.decoder_encoding(), config_.dec_depth,
                             config_.dec_heads, config_.mlp_ratio, rng);
    pred_ = Linear<S>(config_.dec_dim, config_.dim, rng);
    expander_ = TemporalExpander<S>(enc, config_.expand_heads, config_.mlp_ratio, rng);
    inverse_resampler_ = SpatialResampler<S>(enc, config_.num_experts, config_.gate_hidden, rng);
  }

  const ModelConfig &config() const { return config_; }
  const ProjectorBank<S> &projectors() const { return projectors_; }
  const SpatialResampler<S> &resampler() const { return resampler_; }
  const SpatialResampler<S> &inverse_resampler() const { return inverse_resampler_; }
  const TemporalAggregator<S> &temporal() const { return temporal_; }
  const TemporalExpander<S> &expander() const { return expander_; }
  const MaeEncoder<S> &encoder() const { return encoder_; }
  const MaeDecoder<S> &decoder() const { return decoder_; }
  const Linear<S> &prediction_head() const { return pred_; }

  ParameterSet<S> parameters() const {
    ParameterSet<S> set;
    projectors_.collect(set, "projector");
    resampler_.collect(set, "resampler");
    temporal_.collect(set, "temporal");
    encoder_.collect(set, "encoder");
    decoder_.collect(set, "decoder");
    pred_.collect(set, "reconstruction.pred");
    expander_.collect(set, "reconstruction.temporal");
    inverse_resampler_.collect(set, "reconstruction.resampler");
    return set;
  }

  /// projector -> resampler -> temporal aggregation for one modality.
  EmbeddedModality<S> embed(const ModalityInput<S> &in, double gsd_target) const {
    const auto &x = in.pixels;
    if (x.rank() != 4 || x.dim(1) != in.channels.size())
      throw DimensionError("modality " + in.name + ": pixels " + to_string(x.shape()) +
                           " do not match " + std::to_string(in.channels.size()) + " channels");
    if (x.dim(0) != in.days.size())
      throw DimensionError("modality " + in.name + ": " + std::to_string(x.dim(0)) +
                           " time steps but " + std::to_string(in.days.size()) + " days");
    EmbeddedModality<S> e;
    e.matrix = projectors_.build_matrix(in.channels);
    e.spec = ResampleSpec::make(x.dim(2), x.dim(3), in.gsd, gsd_target);
    // per-pixel maps run at the coarser of the two grids; they commute with
    // the bilinear alignment
    Tensor<S> spatial;
    if (e.spec.out_h * e.spec.out_w < e.spec.in_h * e.spec.in_w)
      spatial = resampler_.refine(project(SpatialResampler<S>::align(x, e.spec), e.matrix),
                                  e.spec.sigma);
    else
      spatial = resampler_.resample(project(x, e.matrix), e.spec);
    e.latent = temporal_.aggregate(spatial, in.days);
    return e;
  }

  std::vector<EmbeddedModality<S>> embed_all(const std::vector<ModalityInput<S>> &inputs,
                                             double gsd_target) const {
    if (inputs.empty()) throw ArgumentError("no modalities given");
    std::vector<EmbeddedModality<S>> out;
    for (const auto &in : inputs) out.push_back(embed(in, gsd_target));
    return out;
  }

  TokenSequence<S> tokens(const std::vector<EmbeddedModality<S>> &embedded,
                          double gsd_target) const {
    std::vector<LatentGrid<S>> latents;
    for (std::size_t m = 0; m < embedded.size(); ++m)
      latents.push_back({embedded[m].latent, m, gsd_target});
    return tokenize(latents, gsd_target, config_.encoding());
  }

  /// Decoded [N x D_dec] -> per-modality [T x C x H x W] reconstructions.
  std::vector<Tensor<S>> reconstruct(const Tensor<S> &decoded, const TokenSequence<S> &seq,
                                     const std::vector<EmbeddedModality<S>> &embedded,
                                     const std::vector<ModalityInput<S>> &inputs) const {
    if (seq.grids.size() != inputs.size() || embedded.size() != inputs.size())
      throw DimensionError("reconstruct: modality count mismatch");
    const std::vector<Tensor<S>> grids = detokenize(pred_(decoded), seq.grids);
    std::vector<Tensor<S>> out;
    for (std::size_t m = 0; m < inputs.size(); ++m) {
      const auto &spec = embedded[m].spec;
      if (grids[m].dim(1) != spec.out_h || grids[m].dim(2) != spec.out_w)
        throw DimensionError("reconstruct: grid of modality " + inputs[m].name +
                             " does not match its resample spec");
      Tensor<S> temporal = expander_.expand(grids[m], inputs[m].days);
      const ResampleSpec back = spec.inverse();
      if (back.out_h * back.out_w > back.in_h * back.in_w) {
        Tensor<S> refined = inverse_resampler_.refine(temporal, back.sigma);
        out.push_back(SpatialResampler<S>::align(
            reconstruct_channels(refined, embedded[m].matrix), back));
      } else {
        Tensor<S> spatial = inverse_resampler_.resample(temporal, back);
        out.push_back(reconstruct_channels(spatial, embedded[m].matrix));
      }
    }
    return out;
  }

  /// Masked-autoencoding loss for one sample.
  ForwardResult<S> forward(const std::vector<ModalityInput<S>> &inputs, double gsd_target,
                           std::uint64_t mask_seed) const {
    return forward(inputs, gsd_target, [&](std::size_t n) {
      return make_mask(n, config_.mask_ratio, mask_seed);
    });
  }

  template <std::invocable<std::size_t> MaskFn>
  ForwardResult<S> forward(const std::vector<ModalityInput<S>> &inputs, double gsd_target,
                           MaskFn &&make_plan) const {
    const auto embedded = embed_all(inputs, gsd_target);
    const TokenSequence<S> seq = tokens(embedded, gsd_target);
    ForwardResult<S> result;
    result.tokens = seq.size();
    result.plan = make_plan(seq.size());
    const Tensor<S> encoded = encoder_.encode(seq, result.plan);
    const Tensor<S> decoded = decoder_.decode(encoded, result.plan, seq);
    result.reconstructions = reconstruct(decoded, seq, embedded, inputs);

    const auto flags = result.plan.masked_flags();
    std::vector<Tensor<S>> targets;
    for (std::size_t m = 0; m < inputs.size(); ++m) {
      const GridLayout &g = seq.grids[m];
      std::vector<std::uint8_t> cells(flags.begin() + static_cast<long>(g.offset),
                                      flags.begin() + static_cast<long>(g.offset + g.tokens()));
      const auto &x = inputs[m].pixels;
      result.pixel_masks.push_back(pixel_mask(cells, g.height, g.width, x.dim(2), x.dim(3)));
      targets.push_back(x.detach());
    }
    auto loss = masked_loss(result.reconstructions, targets, result.pixel_masks);
    result.loss = loss.loss;
    result.empty_mask = loss.empty_mask;
    return result;
  }

  /// Unmasked encoder features per modality, CLS dropped.
  std::vector<FeatureGrid<S>> encode_features(const std::vector<ModalityInput<S>> &inputs,
                                              double gsd_target) const {
    const auto embedded = embed_all(inputs, gsd_target);
    const TokenSequence<S> seq = tokens(embedded, gsd_target);
    const Tensor<S> encoded = encoder_.encode(seq, no_mask(seq.size()));
    const auto grids = detokenize(slice_rows(encoded, 1, encoded.dim(0)), seq.grids);
    std::vector<FeatureGrid<S>> out;
    for (std::size_t m = 0; m < inputs.size(); ++m)
      out.push_back({inputs[m].name, gsd_target, grids[m]});
    return out;
  }

private:
  ModelConfig config_;
  ProjectorBank<S> projectors_;
  SpatialResampler<S> resampler_;
  TemporalAggregator<S> temporal_;
  MaeEncoder<S> encoder_;
  MaeDecoder<S> decoder_;
  Linear<S> pred_;
  TemporalExpander<S> expander_;
  SpatialResampler<S> inverse_resampler_;
};

} // namespace ramen
