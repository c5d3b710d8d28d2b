#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "ramen/numerics/gradcheck.hpp"
#include "ramen/numerics/nn.hpp"
#include "ramen/numerics/ops.hpp"
#include "ramen/numerics/optim.hpp"

using namespace ramen;
using T = Tensor<double>;

namespace {

T random(Shape s, Rng &rng, bool grad = false) {
  std::vector<double> v(numel(s));
  for (auto &x : v) x = rng.normal();
  return T(std::move(s), std::move(v), grad);
}

// Reference bilinear sample with half-pixel centers and edge clamping.
double ref_bilinear(const std::vector<double> &img, std::size_t h, std::size_t w, double sy,
                    double sx) {
  auto clampd = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
  sy = clampd(sy, static_cast<double>(h - 1));
  sx = clampd(sx, static_cast<double>(w - 1));
  const auto y0 = static_cast<std::size_t>(sy), x0 = static_cast<std::size_t>(sx);
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - y0, fx = sx - x0;
  auto at = [&](std::size_t y, std::size_t x) { return img[y * w + x]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
         fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

} // namespace

TEST(Tensor, ShapeAndErrors) {
  T a = T::zeros({2, 3});
  EXPECT_EQ(a.size(), 6u);
  EXPECT_EQ(a.rank(), 2u);
  EXPECT_THROW(add(a, T::zeros({3, 2})), DimensionError);
  EXPECT_THROW(matmul(a, T::zeros({2, 2})), DimensionError);
  EXPECT_THROW(T({2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(Tensor, BackwardAccumulatesIntoLeaves) {
  T x({3}, {1.0, 2.0, 3.0}, true);
  T y = sum(mul(x, x));
  backward(y);
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 12.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[1], 0.0);
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  T x({2}, {1.0, 2.0}, true);
  {
    NoGradGuard guard;
    T y = scale(x, 2.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Ops, MatmulMatchesLoops) {
  Rng rng(1);
  T a = random({4, 5}, rng), b = random({5, 3}, rng);
  T c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += a[i * 5 + k] * b[k * 3 + j];
      EXPECT_NEAR(c[i * 3 + j], s, 1e-12);
    }
}

TEST(Ops, PermuteMatchesIndexing) {
  Rng rng(2);
  T x = random({2, 3, 4}, rng);
  T y = permute(x, {2, 0, 1});
  ASSERT_EQ(y.shape(), (Shape{4, 2, 3}));
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 4; ++c)
        EXPECT_EQ(y[(c * 2 + a) * 3 + b], x[(a * 3 + b) * 4 + c]);
}

TEST(Ops, SoftmaxRowsSumToOneAndResistOverflow) {
  T x({2, 3}, {1000.0, 1001.0, 1002.0, -5.0, 0.0, 5.0});
  T p = softmax(x, 1);
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 3; ++c) s += p[r * 3 + c];
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
  EXPECT_NEAR(p[2] / p[1], std::exp(1.0), 1e-12);
}

TEST(Ops, LayerNormOracle) {
  T x({1, 4}, {1.0, 2.0, 3.0, 6.0});
  T y = layer_norm(x, T::full({4}, 2.0), T::full({4}, 0.5));
  const double mu = 3.0, var = (4.0 + 1.0 + 0.0 + 9.0) / 4.0;
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(y[i], 2.0 * (x[i] - mu) / std::sqrt(var + 1e-6) + 0.5, 1e-12);
}

TEST(Ops, GeluOracle) {
  T x({3}, {-1.0, 0.0, 2.0});
  T y = gelu(x);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(y[i], x[i] * 0.5 * std::erfc(-x[i] / std::sqrt(2.0)), 1e-14);
}

TEST(Ops, BilinearIdentityAtSameSize) {
  Rng rng(3);
  T x = random({2, 3, 5, 4}, rng);
  T y = bilinear_resize(x, 5, 4);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i], y[i]);
}

TEST(Ops, BilinearMatchesHalfPixelReference) {
  Rng rng(4);
  for (auto [h, w, oh, ow] : std::vector<std::array<std::size_t, 4>>{
           {5, 4, 9, 3}, {3, 3, 1, 1}, {6, 2, 2, 7}, {1, 4, 3, 2}}) {
    T x = random({2, h, w}, rng);
    T y = bilinear_resize(x, oh, ow);
    for (std::size_t p = 0; p < 2; ++p) {
      std::vector<double> img(x.data().begin() + p * h * w, x.data().begin() + (p + 1) * h * w);
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double sy = (i + 0.5) * double(h) / double(oh) - 0.5;
          const double sx = (j + 0.5) * double(w) / double(ow) - 0.5;
          EXPECT_NEAR(y[(p * oh + i) * ow + j], ref_bilinear(img, h, w, sy, sx), 1e-12);
        }
    }
  }
}

TEST(Ops, MultiHeadAttentionOracle) {
  Rng rng(5);
  const std::size_t rows = 6, d = 4, heads = 2, group = 3, dh = 2;
  T qkv = random({rows, 3 * d}, rng);
  T out = multi_head_attention(qkv, heads, group);
  for (std::size_t g = 0; g < rows / group; ++g)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < group; ++i) {
        const std::size_t qi = g * group + i;
        std::vector<double> s(group);
        double mx = -1e300;
        for (std::size_t j = 0; j < group; ++j) {
          const std::size_t kj = g * group + j;
          double dot = 0;
          for (std::size_t c = 0; c < dh; ++c)
            dot += qkv[qi * 3 * d + h * dh + c] * qkv[kj * 3 * d + d + h * dh + c];
          s[j] = dot / std::sqrt(double(dh));
          mx = std::max(mx, s[j]);
        }
        double z = 0;
        for (auto &v : s) z += (v = std::exp(v - mx));
        for (std::size_t c = 0; c < dh; ++c) {
          double o = 0;
          for (std::size_t j = 0; j < group; ++j)
            o += s[j] / z * qkv[(g * group + j) * 3 * d + 2 * d + h * dh + c];
          EXPECT_NEAR(out[qi * d + h * dh + c], o, 1e-12);
        }
      }
}

TEST(Ops, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  T x = random({4, 6}, rng, true);
  T w = random({6, 18}, rng);
  std::function<T(const T &)> f = [&](const T &in) {
    T a = multi_head_attention(matmul(in, w), 2, 2);
    T h = gelu(layer_norm(a, T::full({6}, 1.0), T::full({6}, 0.0)));
    return sum(mul(softmax(h, 1), h));
  };
  EXPECT_LT(finite_diff_check(f, x, 1e-4), 1e-7);
}

TEST(Ops, ShapeOpsGradients) {
  Rng rng(7);
  T x = random({3, 4}, rng, true);
  std::function<T(const T &)> f = [&](const T &in) {
    T g = gather_rows(in, {2, 0, 2});
    T s = slice_rows(in, 1, 3);
    T e = reshape(expand_leading(s, 2), {4, 4});
    T b = add_broadcast(e, reshape(slice_rows(in, 0, 1), {4}));
    return add(sum(mul(g, g)), sum(mul(b, transpose(transpose(b)))));
  };
  EXPECT_LT(finite_diff_check(f, x, 1e-5), 1e-7);
}

TEST(Ops, WeightedSumAndMasterQuery) {
  Rng rng(8);
  T wts = random({3}, rng, true);
  std::vector<T> items = {random({2, 2}, rng, true), random({2, 2}, rng, true),
                          random({2, 2}, rng, true)};
  T ws = weighted_sum(wts, items);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(ws[i], wts[0] * items[0][i] + wts[1] * items[1][i] + wts[2] * items[2][i], 1e-14);

  T keys = random({6, 4}, rng, true);
  T query = random({2, 2}, rng, true);
  T values = random({6, 4}, rng, true);
  std::function<T(const T &)> f = [&](const T &k) {
    return sum(mul(master_query_attention(k, query, values, 3),
                   master_query_attention(k, query, values, 3)));
  };
  EXPECT_LT(finite_diff_check(f, keys, 1e-5), 1e-7);
}

TEST(Gradcheck, RelativeErrorDefinition) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9), 0.1);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9, 1e-6), 1e-3);
}

TEST(Gradcheck, CorruptedGradientIsDetected) {
  Rng rng(9);
  Linear<double> lin(4, 3, rng);
  ParameterSet<double> params;
  lin.collect(params, "lin");
  T x = random({5, 4}, rng);
  std::function<T()> loss = [&] { return sum(gelu(lin(x))); };
  Rng probe(1);
  EXPECT_LT(parameter_spot_check(loss, params, 10, probe, 1e-5, 1.0), 1e-6);
  Rng probe2(1);
  EXPECT_GT(parameter_spot_check(loss, params, 10, probe2, 1e-5, 1.01), 1e-3);
}

TEST(Optim, AdamWFirstStepOracle) {
  T w({2, 1}, {1.0, -2.0}, true);
  T b({1}, {0.5}, true);
  ParameterSet<double> params;
  params.add("w", w);
  params.add("b", b);
  AdamW<double> opt(params, {0.9, 0.95, 1e-8, 0.05});
  w.mutable_grad()[0] = 0.3;
  w.mutable_grad()[1] = -0.1;
  b.mutable_grad()[0] = 2.0;
  opt.step(0.1);
  // first bias-corrected step moves each coordinate by lr * g / (|g| + eps);
  // decay 0.05 applies to the matrix only
  EXPECT_NEAR(w[0], 1.0 - 0.1 * 0.05 * 1.0 - 0.1 * 0.3 / (0.3 + 1e-8), 1e-12);
  EXPECT_NEAR(w[1], -2.0 + 0.1 * 0.05 * 2.0 + 0.1 * 0.1 / (0.1 + 1e-8), 1e-12);
  EXPECT_NEAR(b[0], 0.5 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-12);
}

TEST(Optim, WarmupCosineSchedule) {
  EXPECT_EQ(warmup_cosine_lr(0, 100, 20, 1.5e-4), 0.0);
  EXPECT_DOUBLE_EQ(warmup_cosine_lr(10, 100, 20, 1.5e-4), 0.75e-4);
  EXPECT_DOUBLE_EQ(warmup_cosine_lr(20, 100, 20, 1.5e-4), 1.5e-4);
  EXPECT_NEAR(warmup_cosine_lr(60, 100, 20, 1.5e-4), 0.75e-4, 1e-18);
  EXPECT_NEAR(warmup_cosine_lr(100, 100, 20, 1.5e-4), 0.0, 1e-20);
}

TEST(Nn, InitStatistics) {
  Rng rng(10);
  T t = truncated_normal_tensor<double>({200, 200}, 0.02, rng);
  double s = 0, s2 = 0, mx = 0;
  for (double v : t.data()) {
    s += v;
    s2 += v * v;
    mx = std::max(mx, std::abs(v));
  }
  EXPECT_NEAR(s / t.size(), 0.0, 1e-3);
  EXPECT_LE(mx, 0.04 + 1e-15);
  EXPECT_GT(std::sqrt(s2 / t.size()), 0.015);
  EXPECT_THROW(TransformerBlock<double>(10, 3, 4, rng), ArgumentError);
}

TEST(Nn, ParameterSetRejectsDuplicates) {
  ParameterSet<double> p;
  p.add("a", T::zeros({2}, true));
  EXPECT_THROW(p.add("a", T::zeros({2}, true)), ArgumentError);
  EXPECT_EQ(p.count(), 2u);
}
