#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ramen/corpus.hpp"
#include "ramen/encodings.hpp"

using namespace ramen;

TEST(Encodings, ScalarSinusoidsMatchTrigAtLowestFrequency) {
  // pair 0 has frequency 1, so the first entries are plain sin/cos of the value
  const auto w = wavelength_pe(665.0, 768);
  EXPECT_DOUBLE_EQ(w[0], std::sin(665.0));
  EXPECT_DOUBLE_EQ(w[1], std::cos(665.0));
  const auto d = day_pe(90, 768);
  EXPECT_DOUBLE_EQ(d[0], std::sin(90.0));
  EXPECT_DOUBLE_EQ(d[1], std::cos(90.0));
  const auto d2 = day_pe(300, 768);
  EXPECT_DOUBLE_EQ(d2[0], std::sin(300.0));
}

TEST(Encodings, HigherPairsUseGeometricFrequencies) {
  const auto w = wavelength_pe(842.0, 16);
  for (std::size_t k = 0; k < 8; ++k) {
    const double f = std::exp(-std::log(10000.0) * 2.0 * double(k) / 16.0);
    EXPECT_NEAR(w[2 * k], std::sin(842.0 * f), 1e-12);
    EXPECT_NEAR(w[2 * k + 1], std::cos(842.0 * f), 1e-12);
  }
}

TEST(Encodings, RatioIsNaturalLog) {
  EXPECT_NEAR(log_ratio(1.0, 10.0), std::log(0.1), 1e-15);
  EXPECT_NEAR(log_ratio(10.0, 1.0), -std::log(0.1), 1e-15);
  EXPECT_EQ(log_ratio(7.5, 7.5), 0.0);
  const auto r = ratio_pe(log_ratio(1.0, 10.0), 32);
  EXPECT_NEAR(r[0], std::sin(std::log(0.1)), 1e-15);
  EXPECT_THROW(log_ratio(0.0, 1.0), ArgumentError);
  EXPECT_THROW(log_ratio(1.0, -2.0), ArgumentError);
}

TEST(Encodings, DayOfYearRange) {
  EXPECT_NO_THROW(day_pe(1, 8));
  EXPECT_NO_THROW(day_pe(366, 8));
  EXPECT_THROW(day_pe(0, 8), ArgumentError);
  EXPECT_THROW(day_pe(367, 8), ArgumentError);
  EXPECT_THROW(wavelength_pe(-1.0, 8), ArgumentError);
  EXPECT_THROW(sinusoid_encoding(1.0, 7), ArgumentError);
}

TEST(Encodings, UnitScaleGridMatchesPlain2dEncodingBitwise) {
  // plain 2D sin/cos encoding written independently: half the channels per
  // axis, interleaved pairs, frequencies 1 / 10000^(2k/D)
  const std::size_t D = 64, H = 5, W = 7;
  EncodingConfig cfg{D, 10000.0, 1.0};
  const auto pe = gsd_pe_2d<double>(H, W, 1.0, cfg);
  ASSERT_EQ(pe.shape(), (Shape{H, W, D}));
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t k = 0; k < D / 4; ++k) {
        const double omega = 1.0 / std::pow(10000.0, 2.0 * double(k) / double(D));
        const double *row = pe.data().data() + (y * W + x) * D;
        EXPECT_EQ(row[2 * k], std::sin(double(x) * omega));
        EXPECT_EQ(row[2 * k + 1], std::cos(double(x) * omega));
        EXPECT_EQ(row[D / 2 + 2 * k], std::sin(double(y) * omega));
        EXPECT_EQ(row[D / 2 + 2 * k + 1], std::cos(double(y) * omega));
      }
}

TEST(Encodings, GridArgumentScalesWithTargetGsd) {
  EncodingConfig cfg{32, 10000.0, 1.0};
  for (double pos : {1.0, 3.0, 11.0})
    for (std::size_t k : {0u, 3u, 7u}) {
      const double a1 = gsd_pe_argument(pos, k, 1.0, cfg);
      EXPECT_NEAR(gsd_pe_argument(pos, k, 2.0, cfg), 2.0 * a1, 1e-15 * std::abs(a1) + 1e-300);
      EXPECT_NEAR(gsd_pe_argument(pos, k, 40.0, cfg), 40.0 * a1, 1e-14 * std::abs(a1));
    }
  // scaling gsd by s equals scaling positions by s
  const auto a = gsd_pe_2d<double>(3, 3, 2.0, cfg);
  const auto b = gsd_pe_2d<double>(5, 5, 1.0, cfg);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t c = 0; c < 32; ++c)
        EXPECT_NEAR(a[(y * 3 + x) * 32 + c], b[(2 * y * 5 + 2 * x) * 32 + c], 1e-12);
  EXPECT_THROW(gsd_pe_2d<double>(2, 2, 1.0, EncodingConfig{30, 10000.0, 1.0}), ArgumentError);
}

TEST(Encodings, WavelengthEncodingsAreDistinctForSentinel2Bands) {
  const auto bands = sentinel2_wavelengths();
  ASSERT_EQ(bands.size(), 13u);
  std::vector<std::vector<double>> enc;
  for (double nm : bands) enc.push_back(wavelength_pe(nm, 768));
  for (std::size_t i = 0; i < enc.size(); ++i)
    for (std::size_t j = i + 1; j < enc.size(); ++j) {
      double d2 = 0;
      for (std::size_t c = 0; c < 768; ++c) d2 += (enc[i][c] - enc[j][c]) * (enc[i][c] - enc[j][c]);
      EXPECT_GT(std::sqrt(d2), 1e-3) << bands[i] << " vs " << bands[j];
    }
}

TEST(Encodings, CategoricalTableHasElevenLearnedRows) {
  Rng rng(3);
  CategoricalEmbedding<double> emb(16, rng);
  EXPECT_EQ(emb.table().shape(), (Shape{11, 16}));
  EXPECT_TRUE(emb.table().requires_grad());
  std::set<std::string> names;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    const auto c = static_cast<ChannelCategory>(i);
    names.insert(std::string(to_string(c)));
    EXPECT_EQ(parse_category(to_string(c)), c);
    const auto r = emb.row(c);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(r[j], emb.table()[i * 16 + j]);
  }
  EXPECT_EQ(names.size(), 11u);
  EXPECT_THROW(parse_category("VV"), RegistryError);
  EXPECT_EQ(kind_of(ChannelCategory::hv_desc), ChannelKind::radar);
  EXPECT_EQ(kind_of(ChannelCategory::slope), ChannelKind::elevation);

  ParameterSet<double> p;
  emb.collect(p, "emb");
  backward(sum(emb.rows({ChannelCategory::dsm, ChannelCategory::dsm})));
  EXPECT_EQ(emb.table().grad()[8 * 16], 2.0);
  EXPECT_EQ(emb.table().grad()[0], 0.0);
}

TEST(Encodings, DescriptorLabels) {
  EXPECT_EQ(ChannelDescriptor::optical(842).label(), "842nm");
  EXPECT_EQ(ChannelDescriptor::optical(1610.5).label(), "1610.5nm");
  EXPECT_EQ(ChannelDescriptor::categorical(ChannelCategory::vh_asc).label(), "VH-asc");
  EXPECT_THROW(ChannelDescriptor::optical(0.0), ArgumentError);
}
