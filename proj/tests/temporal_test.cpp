#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ramen/model.hpp"
#include "ramen/temporal.hpp"
#include "test_support.hpp"

using namespace ramen;
using testing_support::random_tensor;
using testing_support::randomize;

namespace {

TemporalAggregator<double> random_aggregator(std::size_t d, const TemporalConfig &tc, Rng &rng) {
  TemporalAggregator<double> agg(EncodingConfig{d, 10000.0, 1.0}, tc, rng);
  ParameterSet<double> p;
  agg.collect(p, "t");
  for (const auto &e : p.entries()) randomize(e.tensor, rng, 0.4);
  return agg;
}

// y = x W + b for a row vector x
std::vector<double> affine(const std::vector<double> &x, const Linear<double> &l) {
  const std::size_t in = l.in_features(), out = l.out_features();
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    double acc = l.bias[o];
    for (std::size_t i = 0; i < in; ++i) acc += x[i] * l.weight[i * out + o];
    y[o] = acc;
  }
  return y;
}

} // namespace

TEST(Temporal, MatchesPerPixelPerHeadLoop) {
  Rng rng(31);
  const std::size_t D = 8, H = 3, W = 2, T = 6;
  const TemporalConfig tc{4, 3, 12};
  const auto agg = random_aggregator(D, tc, rng);
  const auto x = random_tensor({T, D, H, W}, rng);
  const std::vector<int> days = {5, 40, 41, 160, 250, 365};
  const auto y = agg.aggregate(x, days);
  ASSERT_EQ(y.shape(), (Shape{D, H, W}));

  const std::size_t heads = 4, dk = 3, width = 12, vh = width / heads;
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) {
      std::vector<std::vector<double>> v(T), k(T);
      for (std::size_t t = 0; t < T; ++t) {
        const auto pe = day_pe(days[t], D);
        std::vector<double> u(D);
        for (std::size_t c = 0; c < D; ++c) u[c] = x[((t * D + c) * H + h) * W + w] + pe[c];
        v[t] = affine(u, agg.value_map());
        k[t] = affine(v[t], agg.key_map());
      }
      std::vector<double> concat(width);
      for (std::size_t hd = 0; hd < heads; ++hd) {
        std::vector<double> score(T);
        for (std::size_t t = 0; t < T; ++t) {
          double s = 0;
          for (std::size_t j = 0; j < dk; ++j) s += agg.query()[hd * dk + j] * k[t][hd * dk + j];
          score[t] = s / std::sqrt(double(dk));
        }
        double z = 0;
        for (double s : score) z += std::exp(s);
        for (std::size_t j = 0; j < vh; ++j) {
          double o = 0;
          for (std::size_t t = 0; t < T; ++t) o += std::exp(score[t]) / z * v[t][hd * vh + j];
          concat[hd * vh + j] = o;
        }
      }
      const auto out = affine(concat, agg.output_map());
      for (std::size_t c = 0; c < D; ++c) EXPECT_NEAR(y[(c * H + h) * W + w], out[c], 1e-10);
    }
}

TEST(Temporal, SingleStepIsAffineAndIgnoresQuery) {
  Rng rng(32);
  const std::size_t D = 8;
  const TemporalConfig tc{2, 4, 8};
  const auto agg = random_aggregator(D, tc, rng);
  const auto x = random_tensor({1, D, 2, 2}, rng);
  const std::vector<int> day = {123};
  const auto before = agg.aggregate(x, day);

  const auto pe = day_pe(123, D);
  for (std::size_t p = 0; p < 4; ++p) {
    std::vector<double> u(D);
    for (std::size_t c = 0; c < D; ++c) u[c] = x[c * 4 + p] + pe[c];
    const auto out = affine(affine(u, agg.value_map()), agg.output_map());
    for (std::size_t c = 0; c < D; ++c) EXPECT_NEAR(before[c * 4 + p], out[c], 1e-12);
  }

  randomize(agg.query(), rng, 5.0);
  randomize(agg.key_map().weight, rng, 5.0);
  randomize(agg.key_map().bias, rng, 5.0);
  const auto after = agg.aggregate(x, day);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i], after[i]);
}

TEST(Temporal, DayEncodingChangesOutput) {
  Rng rng(33);
  const auto agg = random_aggregator(8, TemporalConfig{2, 4, 8}, rng);
  const auto x = random_tensor({3, 8, 1, 1}, rng);
  const auto a = agg.aggregate(x, std::vector<int>{10, 20, 30});
  const auto b = agg.aggregate(x, std::vector<int>{10, 20, 200});
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
  EXPECT_GT(diff, 1e-6);
}

TEST(Temporal, ShapeAndStampErrors) {
  Rng rng(34);
  const auto agg = random_aggregator(8, TemporalConfig{2, 4, 8}, rng);
  EXPECT_THROW(agg.aggregate(random_tensor({2, 8, 1, 1}, rng), std::vector<int>{1}), DimensionError);
  EXPECT_THROW(agg.aggregate(random_tensor({1, 4, 1, 1}, rng), std::vector<int>{1}), DimensionError);
  EXPECT_THROW(TimeStamps({3, 3}), ArgumentError);
  EXPECT_THROW(TimeStamps({0}), ArgumentError);
  EXPECT_THROW(TimeStamps(std::vector<int>{}), ArgumentError);
  EXPECT_EQ(TimeStamps({1, 366}).size(), 2u);
}

TEST(Temporal, ExpanderShape) {
  Rng rng(35);
  TemporalExpander<double> ex(EncodingConfig{8, 10000.0, 1.0}, 2, 2, rng);
  const auto y = ex.expand(random_tensor({8, 3, 2}, rng), std::vector<int>{4, 90, 300});
  EXPECT_EQ(y.shape(), (Shape{3, 8, 3, 2}));
}

TEST(Temporal, PaperPresetParameterCount) {
  const ModelConfig cfg = ModelConfig::paper();
  Rng rng(0);
  TemporalAggregator<float> agg(cfg.encoding(), cfg.temporal, rng);
  ParameterSet<float> p;
  agg.collect(p, "temporal");
  const std::size_t d = 768, w = 3 * 768;
  const std::size_t expected = d * w + w + w * 16 * 8 + 16 * 8 + 16 * 8 + w * d + d;
  EXPECT_EQ(p.count(), expected);
  EXPECT_NEAR(static_cast<double>(p.count()), 3.7e6, 0.2 * 3.7e6);
}
