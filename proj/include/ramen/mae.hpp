#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ramen/encodings.hpp"
#include "ramen/numerics/nn.hpp"
#include "ramen/numerics/ops.hpp"

namespace ramen {

/// D-channel feature map of one modality at the target GSD, [D x H x W].
template <typename S> struct LatentGrid {
  Tensor<S> features;
  std::size_t modality = 0;
  double gsd_target = 1.0;
};

/// Where one modality's grid lives in the flattened sequence.
struct GridLayout {
  std::size_t modality = 0;
  std::size_t height = 0, width = 0;
  std::size_t offset = 0;
  std::size_t tokens() const { return height * width; }
};

struct TokenMeta {
  std::size_t modality = 0;
  std::size_t row = 0, col = 0;
  double gsd_target = 1.0;
  bool operator==(const TokenMeta &) const = default;
};

/// Flattened multimodal tokens [N x D]; modality grids concatenated in the
/// declared order, each flattened row-major.
template <typename S> struct TokenSequence {
  Tensor<S> tokens;
  std::vector<GridLayout> grids;
  double gsd_target = 1.0;

  std::size_t size() const { return tokens.dim(0); }

  TokenMeta meta(std::size_t index) const {
    for (const auto &g : grids)
      if (index >= g.offset && index < g.offset + g.tokens()) {
        const std::size_t local = index - g.offset;
        return {g.modality, local / g.width, local % g.width, gsd_target};
      }
    throw ArgumentError("token index out of range");
  }

  std::size_t index_of(std::size_t modality, std::size_t row, std::size_t col) const {
    for (const auto &g : grids)
      if (g.modality == modality) return g.offset + row * g.width + col;
    throw ArgumentError("modality not present in sequence");
  }
};

/// GSD positional encodings for every token of a layout, [N x dim].
template <typename S>
Tensor<S> sequence_position_encodings(const std::vector<GridLayout> &grids, double gsd_target,
                                      const EncodingConfig &enc) {
  std::vector<Tensor<S>> parts;
  for (const auto &g : grids)
    parts.push_back(reshape(gsd_pe_2d<S>(g.height, g.width, gsd_target, enc),
                            {g.tokens(), enc.dim}));
  return concat_rows(parts);
}

/// Adds GSD positional encodings per grid, flattens and concatenates.
template <typename S>
TokenSequence<S> tokenize(const std::vector<LatentGrid<S>> &latents, double gsd_target,
                          const EncodingConfig &enc, bool add_position = true) {
  if (latents.empty()) throw ArgumentError("tokenize: no modalities");
  TokenSequence<S> seq;
  seq.gsd_target = gsd_target;
  std::vector<Tensor<S>> parts;
  std::size_t offset = 0;
  for (const auto &lat : latents) {
    if (lat.gsd_target != gsd_target)
      throw ArgumentError("tokenize: latent grids at different target GSDs");
    const auto &f = lat.features;
    if (f.rank() != 3 || f.dim(0) != enc.dim)
      throw DimensionError("tokenize: expected [D x H x W], got " + to_string(f.shape()));
    GridLayout g{lat.modality, f.dim(1), f.dim(2), offset};
    offset += g.tokens();
    Tensor<S> flat = reshape(permute(f, {1, 2, 0}), {g.tokens(), enc.dim});
    if (add_position)
      flat = add(flat, reshape(gsd_pe_2d<S>(g.height, g.width, gsd_target, enc),
                               {g.tokens(), enc.dim}));
    parts.push_back(flat);
    seq.grids.push_back(g);
  }
  seq.tokens = concat_rows(parts);
  return seq;
}

/// Splits [N x C] rows back into per-grid [C x H x W] maps.
template <typename S>
std::vector<Tensor<S>> detokenize(const Tensor<S> &tokens, const std::vector<GridLayout> &grids) {
  std::vector<Tensor<S>> out;
  for (const auto &g : grids) {
    Tensor<S> rows = slice_rows(tokens, g.offset, g.offset + g.tokens());
    out.push_back(permute(reshape(rows, {g.height, g.width, tokens.dim(1)}), {2, 0, 1}));
  }
  return out;
}

/// Disjoint visible/masked index sets over [0, N), both sorted.
struct MaskPlan {
  std::vector<std::size_t> visible;
  std::vector<std::size_t> masked;
  double ratio = 0.0;

  std::size_t total() const { return visible.size() + masked.size(); }

  /// Row order of concat(visible, masked) restored to sequence order.
  std::vector<std::size_t> restore_index() const {
    std::vector<std::size_t> restore(total());
    for (std::size_t i = 0; i < visible.size(); ++i) restore[visible[i]] = i;
    for (std::size_t i = 0; i < masked.size(); ++i) restore[masked[i]] = visible.size() + i;
    return restore;
  }

  std::vector<std::uint8_t> masked_flags() const {
    std::vector<std::uint8_t> flags(total(), 0);
    for (std::size_t i : masked) flags[i] = 1;
    return flags;
  }
};

inline std::size_t masked_count(std::size_t n, double ratio) {
  // the epsilon absorbs representation error in products like 0.29 * 100
  auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  return n == 0 ? 0 : std::min(count, n - 1);
}

/// Uniform random subset of floor(R N) tokens, deterministic in the seed.
inline MaskPlan make_mask(std::size_t n, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ArgumentError("mask ratio must lie in [0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(seed);
  std::shuffle(order.begin(), order.end(), engine);
  const std::size_t m = masked_count(n, ratio);
  MaskPlan plan;
  plan.ratio = ratio;
  plan.masked.assign(order.begin(), order.begin() + static_cast<long>(m));
  plan.visible.assign(order.begin() + static_cast<long>(m), order.end());
  std::sort(plan.masked.begin(), plan.masked.end());
  std::sort(plan.visible.begin(), plan.visible.end());
  return plan;
}

inline MaskPlan no_mask(std::size_t n) {
  MaskPlan plan;
  plan.visible.resize(n);
  std::iota(plan.visible.begin(), plan.visible.end(), std::size_t{0});
  return plan;
}

/// ViT encoder over visible tokens with a learned CLS token in front.
template <typename S> class MaeEncoder {
public:
  MaeEncoder() = default;
  MaeEncoder(std::size_t dim, std::size_t depth, std::size_t heads, std::size_t mlp_ratio,
             Rng &rng)
      : cls_(truncated_normal_tensor<S>({1, dim}, 0.02, rng)), norm_(dim) {
    for (std::size_t i = 0; i < depth; ++i) blocks_.emplace_back(dim, heads, mlp_ratio, rng);
  }

  /// tokens [V x D] -> [(V + 1) x D], CLS row first.
  Tensor<S> encode_tokens(const Tensor<S> &visible) const {
    Tensor<S> x = concat_rows<S>({cls_, visible});
    for (const auto &b : blocks_) x = b(x);
    return norm_(x);
  }

  Tensor<S> encode(const TokenSequence<S> &seq, const MaskPlan &plan) const {
    if (plan.total() != seq.size())
      throw ArgumentError("encode: mask plan covers " + std::to_string(plan.total()) +
                          " tokens, sequence has " + std::to_string(seq.size()));
    return encode_tokens(gather_rows(seq.tokens, plan.visible));
  }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    set.add(prefix + ".cls_token", cls_);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(set, prefix + ".blocks." + std::to_string(i));
    norm_.collect(set, prefix + ".norm");
  }

private:
  Tensor<S> cls_;
  std::vector<TransformerBlock<S>> blocks_;
  LayerNorm<S> norm_;
};

/// MAE decoder: visible encodings projected to the decoder width, a shared
/// mask token at every masked index, GSD positional encodings at all grid
/// positions, then the decoder blocks. CLS is kept through the blocks and
/// dropped from the output.
template <typename S> class MaeDecoder {
public:
  MaeDecoder() = default;
  MaeDecoder(std::size_t enc_dim, const EncodingConfig &dec_enc, std::size_t depth,
             std::size_t heads, std::size_t mlp_ratio, Rng &rng)
      : enc_(dec_enc), embed_(enc_dim, dec_enc.dim, rng),
        mask_token_(truncated_normal_tensor<S>({1, dec_enc.dim}, 0.02, rng)),
        norm_(dec_enc.dim) {
    for (std::size_t i = 0; i < depth; ++i)
      blocks_.emplace_back(dec_enc.dim, heads, mlp_ratio, rng);
  }

  std::size_t dim() const { return enc_.dim; }

  /// [(N + 1) x D_dec] block input, CLS row first.
  Tensor<S> decoder_input(const Tensor<S> &encoded, const MaskPlan &plan,
                          const TokenSequence<S> &seq) const {
    if (encoded.rank() != 2 || encoded.dim(0) != plan.visible.size() + 1)
      throw DimensionError("decode: encoded rows " + to_string(encoded.shape()) +
                           " do not match visible count " + std::to_string(plan.visible.size()));
    Tensor<S> e = embed_(encoded);
    Tensor<S> cls = slice_rows(e, 0, 1);
    std::vector<Tensor<S>> parts{slice_rows(e, 1, e.dim(0))};
    if (!plan.masked.empty()) parts.push_back(expand_rows(mask_token_, plan.masked.size()));
    Tensor<S> full = gather_rows(concat_rows(parts), plan.restore_index());
    full = add(full, sequence_position_encodings<S>(seq.grids, seq.gsd_target, enc_));
    return concat_rows<S>({cls, full});
  }

  /// [N x D_dec]
  Tensor<S> decode(const Tensor<S> &encoded, const MaskPlan &plan,
                   const TokenSequence<S> &seq) const {
    Tensor<S> x = decoder_input(encoded, plan, seq);
    for (const auto &b : blocks_) x = b(x);
    x = norm_(x);
    return slice_rows(x, 1, x.dim(0));
  }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    embed_.collect(set, prefix + ".embed");
    set.add(prefix + ".mask_token", mask_token_);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(set, prefix + ".blocks." + std::to_string(i));
    norm_.collect(set, prefix + ".norm");
  }

private:
  static Tensor<S> expand_rows(const Tensor<S> &row, std::size_t count) {
    return reshape(expand_leading(row, count), {count, row.dim(1)});
  }

  EncodingConfig enc_;
  Linear<S> embed_;
  Tensor<S> mask_token_;
  std::vector<TransformerBlock<S>> blocks_;
  LayerNorm<S> norm_;
};

/// Native-resolution pixel mask of one modality: pixel (i, j) is masked when
/// the latent cell whose center is nearest (same extent, half-pixel centers)
/// is masked. `masked_cells` is [grid_h x grid_w] flags.
inline std::vector<std::uint8_t> pixel_mask(const std::vector<std::uint8_t> &masked_cells,
                                            std::size_t grid_h, std::size_t grid_w,
                                            std::size_t height, std::size_t width) {
  if (masked_cells.size() != grid_h * grid_w)
    throw DimensionError("pixel_mask: cell flags do not match grid");
  auto cell = [](std::size_t i, std::size_t native, std::size_t grid) {
    const double u = (static_cast<double>(i) + 0.5) * static_cast<double>(grid) /
                     static_cast<double>(native);
    return std::min(static_cast<std::size_t>(std::floor(u)), grid - 1);
  };
  std::vector<std::uint8_t> out(height * width);
  for (std::size_t i = 0; i < height; ++i) {
    const std::size_t ci = cell(i, height, grid_h);
    for (std::size_t j = 0; j < width; ++j)
      out[i * width + j] = masked_cells[ci * grid_w + cell(j, width, grid_w)];
  }
  return out;
}

template <typename S> struct LossResult {
  Tensor<S> loss;
  bool empty_mask = false; // no masked pixel in any modality; loss defined as 0
};

/// L = (1/M) sum_m [ sum over masked pixels (all T, C) of (recon - target)^2 ] / (H_m W_m)
///
/// `pixel_masks[m]` holds H_m x W_m flags.
template <typename S>
LossResult<S> masked_loss(const std::vector<Tensor<S>> &recon,
                          const std::vector<Tensor<S>> &target,
                          const std::vector<std::vector<std::uint8_t>> &pixel_masks) {
  if (recon.size() != target.size() || recon.size() != pixel_masks.size() || recon.empty())
    throw DimensionError("masked_loss: modality counts differ");
  std::vector<Tensor<S>> terms;
  bool any = false;
  for (std::size_t m = 0; m < recon.size(); ++m) {
    const Tensor<S> &r = recon[m];
    if (r.rank() != 4 || r.shape() != target[m].shape())
      throw DimensionError("masked_loss: reconstruction " + to_string(r.shape()) +
                           " vs target " + to_string(target[m].shape()));
    const std::size_t planes = r.dim(0) * r.dim(1), hw = r.dim(2) * r.dim(3);
    if (pixel_masks[m].size() != hw) throw DimensionError("masked_loss: pixel mask size");
    std::vector<S> weights(r.size());
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < hw; ++i) weights[p * hw + i] = pixel_masks[m][i] ? S(1) : S(0);
    any = any || std::any_of(pixel_masks[m].begin(), pixel_masks[m].end(),
                             [](std::uint8_t f) { return f != 0; });
    Tensor<S> diff = sub(r, target[m]);
    Tensor<S> sq = mul(mul(diff, diff), Tensor<S>(r.shape(), std::move(weights)));
    terms.push_back(scale(sum(sq), S(1) / static_cast<S>(hw)));
  }
  if (!any) return {Tensor<S>::scalar(S(0)), true};
  Tensor<S> total = terms.front();
  for (std::size_t m = 1; m < terms.size(); ++m) total = add(total, terms[m]);
  return {scale(total, S(1) / static_cast<S>(terms.size())), false};
}

} // namespace ramen
