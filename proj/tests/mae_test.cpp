#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "ramen/model.hpp"
#include "test_support.hpp"

using namespace ramen;
using testing_support::random_tensor;
using testing_support::randomize;

namespace {

ModelConfig tiny() {
  ModelConfig c = ModelConfig::with_dims("tiny", 8, 2, 2, 8, 1, 2);
  c.temporal = {2, 4, 24};
  c.mlp_ratio = 2;
  return c;
}

std::vector<ModalityInput<double>> toy_inputs(Rng &rng, std::size_t t0 = 2) {
  std::vector<int> days;
  for (std::size_t t = 0; t < t0; ++t) days.push_back(static_cast<int>(30 + 100 * t));
  return {{"optical",
           {ChannelDescriptor::optical(490), ChannelDescriptor::optical(665),
            ChannelDescriptor::optical(842)},
           10.0,
           random_tensor({t0, 3, 6, 5}, rng),
           days},
          {"radar",
           {ChannelDescriptor::categorical(ChannelCategory::vv_asc),
            ChannelDescriptor::categorical(ChannelCategory::vh_asc)},
           5.0,
           random_tensor({1, 2, 8, 8}, rng),
           {200}},
          {"elevation",
           {ChannelDescriptor::categorical(ChannelCategory::dtm)},
           20.0,
           random_tensor({1, 1, 3, 3}, rng),
           {1}}};
}

} // namespace

TEST(Tokens, CountIsSumOfTargetGrids) {
  Rng rng(41);
  const Ramen<double> model(tiny(), 1);
  for (int cfg = 0; cfg < 50; ++cfg) {
    const std::size_t m = 1 + rng.index(3);
    std::vector<ModalityInput<double>> in;
    const double target = std::exp(rng.uniform(std::log(2.0), std::log(40.0)));
    std::size_t expected = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t h = 1 + rng.index(12), w = 1 + rng.index(12);
      const double gsd = std::exp(rng.uniform(std::log(1.0), std::log(30.0)));
      in.push_back({"m" + std::to_string(i), {ChannelDescriptor::optical(500.0 + 100.0 * i)}, gsd,
                    random_tensor({1, 1, h, w}, rng), {100}});
      auto side = [&](std::size_t n) {
        return std::max<long>(1, std::lround(gsd * static_cast<double>(n) / target));
      };
      expected += static_cast<std::size_t>(side(h) * side(w));
    }
    NoGradGuard guard;
    const auto seq = model.tokens(model.embed_all(in, target), target);
    EXPECT_EQ(seq.size(), expected);
    EXPECT_EQ(seq.grids.back().offset + seq.grids.back().tokens(), expected);
  }
}

TEST(Masking, CountIsFloorOfRatioTimesN) {
  for (std::size_t n = 1; n <= 600; ++n) {
    const auto plan = make_mask(n, 0.75, n);
    EXPECT_EQ(plan.masked.size(), (3 * n) / 4) << n;
    EXPECT_EQ(plan.total(), n);
    std::vector<std::size_t> all(plan.visible);
    all.insert(all.end(), plan.masked.begin(), plan.masked.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);
  }
  EXPECT_EQ(make_mask(100, 0.29, 0).masked.size(), 29u);
  EXPECT_THROW(make_mask(4, 1.0, 0), ArgumentError);
}

TEST(Masking, PerTokenFrequency) {
  const std::size_t n = 40, draws = 10000;
  std::vector<std::size_t> hits(n, 0);
  for (std::size_t s = 0; s < draws; ++s)
    for (std::size_t i : make_mask(n, 0.75, mix_seed(7, s)).masked) ++hits[i];
  for (std::size_t i = 0; i < n; ++i)
    EXPECT_NEAR(static_cast<double>(hits[i]) / draws, 0.75, 0.02) << i;
}

TEST(Masking, DeterministicInSeed) {
  EXPECT_EQ(make_mask(50, 0.75, 9).masked, make_mask(50, 0.75, 9).masked);
  EXPECT_NE(make_mask(50, 0.75, 9).masked, make_mask(50, 0.75, 10).masked);
  const auto plan = make_mask(10, 0.5, 3);
  const auto restore = plan.restore_index();
  for (std::size_t i = 0; i < plan.visible.size(); ++i) EXPECT_EQ(restore[plan.visible[i]], i);
}

TEST(Tokens, MetaRoundTrip) {
  Rng rng(42);
  const Ramen<double> model(tiny(), 2);
  const auto in = toy_inputs(rng);
  NoGradGuard guard;
  const auto seq = model.tokens(model.embed_all(in, 4.0), 4.0);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const TokenMeta m = seq.meta(i);
    EXPECT_EQ(seq.index_of(m.modality, m.row, m.col), i);
    EXPECT_EQ(m.gsd_target, 4.0);
  }
  EXPECT_THROW(seq.meta(seq.size()), ArgumentError);
}

TEST(Encoder, EquivariantToTokenPermutation) {
  Rng rng(43);
  MaeEncoder<double> enc(8, 2, 2, 2, rng);
  const auto z = random_tensor({7, 8}, rng);
  std::vector<std::size_t> perm(7);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  const auto a = enc.encode_tokens(z);
  const auto b = enc.encode_tokens(gather_rows(z, perm));
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(a[c], b[c], 1e-12); // CLS
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t c = 0; c < 8; ++c)
      EXPECT_NEAR(b[(i + 1) * 8 + c], a[(perm[i] + 1) * 8 + c], 1e-12);
}

TEST(Decoder, SameMaskTokenInEveryModality) {
  Rng rng(44);
  const Ramen<double> model(tiny(), 3);
  const auto in = toy_inputs(rng);
  NoGradGuard guard;
  const auto seq = model.tokens(model.embed_all(in, 4.0), 4.0);
  const auto plan = make_mask(seq.size(), 0.75, 5);
  const auto encoded = model.encoder().encode(seq, plan);
  const auto x = model.decoder().decoder_input(encoded, plan, seq);
  const auto pe = sequence_position_encodings<double>(seq.grids, 4.0, model.config().decoder_encoding());
  const std::size_t d = model.config().dec_dim;
  ASSERT_EQ(x.dim(0), seq.size() + 1);
  std::vector<std::size_t> modalities_seen;
  const std::size_t ref = plan.masked.front();
  for (std::size_t i : plan.masked) {
    modalities_seen.push_back(seq.meta(i).modality);
    for (std::size_t c = 0; c < d; ++c)
      EXPECT_NEAR(x[(i + 1) * d + c] - pe[i * d + c], x[(ref + 1) * d + c] - pe[ref * d + c], 1e-14);
  }
  std::sort(modalities_seen.begin(), modalities_seen.end());
  modalities_seen.erase(std::unique(modalities_seen.begin(), modalities_seen.end()), modalities_seen.end());
  EXPECT_GE(modalities_seen.size(), 2u);
}

TEST(Loss, ZeroOnPerfectReconstruction) {
  Rng rng(45);
  const auto t0 = random_tensor({2, 3, 4, 4}, rng), t1 = random_tensor({1, 1, 2, 3}, rng);
  const std::vector<std::vector<std::uint8_t>> masks = {std::vector<std::uint8_t>(16, 1),
                                                        {1, 0, 1, 1, 0, 1}};
  EXPECT_EQ(masked_loss<double>({t0, t1}, {t0, t1}, masks).loss.item(), 0.0);
}

TEST(Loss, UnmaskedPixelsDoNotMatter) {
  Rng rng(46);
  const auto r = random_tensor({2, 3, 4, 5}, rng), t = random_tensor({2, 3, 4, 5}, rng);
  std::vector<std::uint8_t> mask(20, 0);
  for (std::size_t i = 0; i < 20; i += 3) mask[i] = 1;
  const double base = masked_loss<double>({r}, {t}, {mask}).loss.item();
  for (std::size_t i = 0; i < 20; ++i) {
    if (mask[i]) continue;
    for (std::size_t plane = 0; plane < 6; ++plane) {
      auto rv = r.to_vector(), tv = t.to_vector();
      rv[plane * 20 + i] += 123.0;
      tv[plane * 20 + i] -= 7.0;
      const double l = masked_loss<double>({Tensor<double>(r.shape(), rv)},
                                           {Tensor<double>(t.shape(), tv)}, {mask})
                           .loss.item();
      ASSERT_EQ(l, base);
    }
  }
}

TEST(Loss, SingleMaskedPixel) {
  for (auto [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{4, 8}, {3, 5}, {1, 1}}) {
    const double delta = 0.37;
    std::vector<double> rv(h * w, 0.0);
    rv[h * w / 2] = delta;
    std::vector<std::uint8_t> mask(h * w, 0);
    mask[h * w / 2] = 1;
    const double l = masked_loss<double>({Tensor<double>({1, 1, h, w}, rv)},
                                         {Tensor<double>::zeros({1, 1, h, w})}, {mask})
                         .loss.item();
    const double expected = delta * delta / static_cast<double>(h * w);
    if ((h * w & (h * w - 1)) == 0)
      EXPECT_EQ(l, expected);
    else
      EXPECT_DOUBLE_EQ(l, expected);
  }
}

TEST(Loss, AveragesModalitiesAndFlagsEmptyMask) {
  const auto r0 = Tensor<double>::full({1, 2, 2, 2}, 1.0), r1 = Tensor<double>::full({3, 1, 1, 2}, 2.0);
  const auto z0 = Tensor<double>::zeros({1, 2, 2, 2}), z1 = Tensor<double>::zeros({3, 1, 1, 2});
  const auto res = masked_loss<double>({r0, r1}, {z0, z1}, {{1, 1, 0, 0}, {0, 1}});
  // modality 0: 2 channels x 2 pixels x 1 / 4; modality 1: 3 steps x 1 pixel x 4 / 2
  EXPECT_DOUBLE_EQ(res.loss.item(), (1.0 + 6.0) / 2.0);
  EXPECT_FALSE(res.empty_mask);
  const auto empty = masked_loss<double>({r0}, {z0}, {{0, 0, 0, 0}});
  EXPECT_TRUE(empty.empty_mask);
  EXPECT_EQ(empty.loss.item(), 0.0);
}

TEST(Loss, ModalityOrderInvariant) {
  Rng rng(47);
  const auto a = random_tensor({2, 2, 3, 3}, rng), b = random_tensor({1, 4, 2, 2}, rng);
  const auto ta = random_tensor({2, 2, 3, 3}, rng), tb = random_tensor({1, 4, 2, 2}, rng);
  const std::vector<std::uint8_t> ma = {1, 0, 0, 1, 1, 0, 1, 0, 1}, mb = {0, 1, 1, 0};
  EXPECT_NEAR(masked_loss<double>({a, b}, {ta, tb}, {ma, mb}).loss.item(),
              masked_loss<double>({b, a}, {tb, ta}, {mb, ma}).loss.item(), 1e-14);
}

TEST(Model, FeaturesInvariantToModalityOrder) {
  Rng rng(48);
  const Ramen<double> model(tiny(), 4);
  auto in = toy_inputs(rng);
  NoGradGuard guard;
  const auto a = model.encode_features(in, 5.0);
  std::reverse(in.begin(), in.end());
  const auto b = model.encode_features(in, 5.0);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t m = 0; m < 3; ++m) {
    const auto &fa = a[m];
    const auto &fb = b[2 - m];
    ASSERT_EQ(fa.name, fb.name);
    ASSERT_EQ(fa.features.shape(), fb.features.shape());
    for (std::size_t i = 0; i < fa.features.size(); ++i)
      EXPECT_NEAR(fa.features[i], fb.features[i], 1e-10);
  }
}

TEST(Model, ForwardMatchesManualComposition) {
  Rng rng(49);
  const Ramen<double> model(tiny(), 5);
  {
    ParameterSet<double> all = model.parameters();
    for (const auto &e : all.entries())
      if (e.name.find("expert") != std::string::npos || e.name.find("gate.fc2") != std::string::npos)
        randomize(e.tensor, rng, 0.1);
  }
  const auto in = toy_inputs(rng, 3);
  const double gsd = 6.0;
  const std::uint64_t seed = 17;
  const auto result = model.forward(in, gsd, seed);

  // manual pipeline from the public building blocks
  const auto &cfg = model.config();
  std::vector<LatentGrid<double>> latents;
  std::vector<ProjectionMatrix<double>> mats;
  std::vector<ResampleSpec> specs;
  for (std::size_t m = 0; m < in.size(); ++m) {
    mats.push_back(model.projectors().build_matrix(in[m].channels));
    specs.push_back(ResampleSpec::make(in[m].pixels.dim(2), in[m].pixels.dim(3), in[m].gsd, gsd));
    const auto z = model.resampler().resample(project(in[m].pixels, mats[m]), specs[m]);
    latents.push_back({model.temporal().aggregate(z, in[m].days), m, gsd});
  }
  const auto seq = tokenize(latents, gsd, cfg.encoding());
  const auto plan = make_mask(seq.size(), cfg.mask_ratio, seed);
  EXPECT_EQ(plan.masked, result.plan.masked);
  const auto dec = model.decoder().decode(model.encoder().encode(seq, plan), plan, seq);
  const auto grids = detokenize(model.prediction_head()(dec), seq.grids);
  const auto flags = plan.masked_flags();
  std::vector<Tensor<double>> recon, targets;
  std::vector<std::vector<std::uint8_t>> masks;
  for (std::size_t m = 0; m < in.size(); ++m) {
    const auto t = model.expander().expand(grids[m], in[m].days);
    const auto s = model.inverse_resampler().resample(t, specs[m].inverse());
    recon.push_back(reconstruct_channels(s, mats[m]));
    const auto &g = seq.grids[m];
    std::vector<std::uint8_t> cells(flags.begin() + g.offset, flags.begin() + g.offset + g.tokens());
    masks.push_back(pixel_mask(cells, g.height, g.width, in[m].pixels.dim(2), in[m].pixels.dim(3)));
    targets.push_back(in[m].pixels);
  }
  const double manual = masked_loss(recon, targets, masks).loss.item();
  EXPECT_NEAR(result.loss.item(), manual, 1e-8);
  EXPECT_GT(manual, 0.0);

  ASSERT_EQ(result.reconstructions.size(), in.size());
  for (std::size_t m = 0; m < in.size(); ++m)
    EXPECT_EQ(result.reconstructions[m].shape(), in[m].pixels.shape());
}

TEST(PixelMask, NearestCellFootprint) {
  // 2x2 grid over 4x6 pixels; only the top-right cell masked
  const auto px = pixel_mask({0, 1, 0, 0}, 2, 2, 4, 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(px[i * 6 + j], (i < 2 && j >= 3) ? 1 : 0);
  // upsampled grid: a pixel maps to the cell containing its center
  const auto up = pixel_mask({1, 0, 0, 0, 0, 0, 0, 0, 0}, 3, 3, 2, 2);
  EXPECT_EQ(up, (std::vector<std::uint8_t>{1, 0, 0, 0}));
}

TEST(Model, PaperPresetParameterCounts) {
  const ModelConfig cfg = ModelConfig::paper();
  const Ramen<float> model(cfg, 0);
  const auto p = model.parameters();
  auto near = [](std::size_t n, double target) {
    return std::abs(static_cast<double>(n) - target) <= 0.2 * target;
  };
  EXPECT_TRUE(near(p.count_prefix("projector.optical"), 2.4e6));
  EXPECT_TRUE(near(p.count_prefix("projector.radar"), 2.4e6));
  EXPECT_TRUE(near(p.count_prefix("projector.elevation"), 2.4e6));
  EXPECT_TRUE(near(p.count_prefix("resampler."), 2.5e6));
  EXPECT_TRUE(near(p.count_prefix("temporal."), 3.7e6));
  EXPECT_TRUE(near(p.count_prefix("encoder."), 85.1e6));
  EXPECT_TRUE(near(p.count_prefix("decoder.") + p.count_prefix("reconstruction."), 33.0e6));
  // ViT-Base blocks: 12 x (4 D^2 + 8 D^2 + biases and norms)
  const std::size_t d = 768, block = 12 * d * d + 13 * d;
  EXPECT_EQ(p.count_prefix("encoder."), 12 * block + d + 2 * d);

  const ModelConfig desk = ModelConfig::desk();
  EXPECT_EQ(desk.mask_ratio, cfg.mask_ratio);
  EXPECT_EQ(desk.num_experts, cfg.num_experts);
  EXPECT_EQ(desk.mlp_ratio, cfg.mlp_ratio);
}
