#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dwt_oracle.hpp"
#include "polsar/dwt.hpp"

namespace polsar {
namespace {

const double kSqrt2 = std::sqrt(2.0);

FeatureCube random_cube(std::size_t h, std::size_t w, std::size_t c, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  FeatureCube cube(h, w, c);
  for (double& v : cube.data()) v = dist(gen);
  return cube;
}

TEST(HaarFilters, Orthonormal) {
  const auto& l = HaarFilters::low.taps;
  const auto& h = HaarFilters::high.taps;
  EXPECT_NEAR(l[0] * l[0] + l[1] * l[1], 1.0, 1e-15);
  EXPECT_NEAR(h[0] * h[0] + h[1] * h[1], 1.0, 1e-15);
  EXPECT_NEAR(l[0] * h[0] + l[1] * h[1], 0.0, 1e-15);
}

TEST(Udwt1d, ConstantSignal) {
  const std::vector<double> x = {2.5, 2.5, 2.5};
  for (double v : udwt_1d(x, HaarFilters::low)) EXPECT_NEAR(v, kSqrt2 * 2.5, 1e-14);
  for (double v : udwt_1d(x, HaarFilters::high)) EXPECT_EQ(v, 0.0);
}

TEST(Udwt1d, TwoSampleReplicateBoundary) {
  const std::vector<double> x = {1.0, 3.0};
  const auto lo = udwt_1d(x, HaarFilters::low);
  const auto hi = udwt_1d(x, HaarFilters::high);
  EXPECT_NEAR(lo[0], 2.8284271247461903, 1e-12);
  EXPECT_NEAR(lo[1], 4.2426406871192857, 1e-12);
  EXPECT_NEAR(hi[0], 1.4142135623730951, 1e-12);
  EXPECT_NEAR(hi[1], 0.0, 1e-12);
}

TEST(Udwt1d, EmptySignalRejected) {
  EXPECT_THROW(udwt_1d(std::vector<double>{}, HaarFilters::low), ArgumentError);
}

TEST(Udwt1d, PerPositionEnergyConservation) {
  std::mt19937 gen(4);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(len(gen));
    for (double& v : x) v = val(gen);
    const auto lo = udwt_1d(x, HaarFilters::low);
    const auto hi = udwt_1d(x, HaarFilters::high);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double next = i + 1 < x.size() ? x[i + 1] : x.back();
      EXPECT_NEAR(lo[i] * lo[i] + hi[i] * hi[i], x[i] * x[i] + next * next, 1e-10);
    }
  }
}

TEST(Udwt3dLevel, ConstantCube) {
  const FeatureCube cube(4, 5, 3, 1.5);
  const auto bands = udwt_3d_level(cube);
  for (double v : bands[0].data()) EXPECT_NEAR(v, std::pow(kSqrt2, 3) * 1.5, 1e-12);
  for (std::size_t b = 1; b < 8; ++b) {
    EXPECT_EQ(bands[b].height(), 4U);
    EXPECT_EQ(bands[b].channels(), 3U);
    for (double v : bands[b].data()) EXPECT_NEAR(v, 0.0, 1e-14) << band_name(b);
  }
}

TEST(Udwt3dLevel, ImpulseAtOrigin) {
  FeatureCube cube(3, 3, 3);
  cube(0, 0, 0) = 1.0;
  const auto bands = udwt_3d_level(cube);
  EXPECT_NEAR(bands[0](0, 0, 0), std::pow(1.0 / kSqrt2, 3), 1e-15);
}

TEST(Udwt3dLevel, MatchesDirectStencil) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const FeatureCube cube = random_cube(4, 4, 4, seed);
    const auto bands = udwt_3d_level(cube);
    const auto ref = oracle::from_feature_cube(cube);
    for (unsigned b = 0; b < 8; ++b) {
      const auto expected = oracle::stencil_band(ref, b);
      for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
          for (std::size_t ch = 0; ch < 4; ++ch) {
            EXPECT_NEAR(bands[b](r, c, ch), expected[r][c][ch], 1e-10);
          }
        }
      }
    }
  }
}

TEST(DwtPlan, FifteenSubcubesInOrder) {
  const auto ids = DwtPlan{}.subcubes();
  ASSERT_EQ(ids.size(), 15U);
  const std::vector<std::string> expected = {
      "L1:LLH", "L1:LHL", "L1:LHH", "L1:HLL", "L1:HLH", "L1:HHL", "L1:HHH", "L2:LLL",
      "L2:LLH", "L2:LHL", "L2:LHH", "L2:HLL", "L2:HLH", "L2:HHL", "L2:HHH"};
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i].name(), expected[i]);
}

TEST(DwtFeatures, SevenChannelsGive105) {
  const FeatureCube out = dwt_features(random_cube(6, 5, 7, 1));
  EXPECT_EQ(out.channels(), 105U);
  EXPECT_EQ(out.height(), 6U);
  EXPECT_EQ(out.width(), 5U);
}

TEST(DwtFeatures, ConstantInputOnlyKeepsCoarseLowPass) {
  const double c = 0.75;
  const FeatureCube out = dwt_features(FeatureCube(5, 6, 7, c));
  const std::size_t lll2 = 7;  // position of L2:LLL in the plan
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    const auto z = out.pixel(p);
    for (std::size_t k = 0; k < 15; ++k) {
      for (std::size_t d = 0; d < 7; ++d) {
        const double expected = k == lll2 ? std::pow(kSqrt2, 6) * c : 0.0;
        EXPECT_NEAR(z[k * 7 + d], expected, 1e-12);
      }
    }
  }
}

TEST(DwtFeatures, MatchesStraightLineOracle) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const FeatureCube raw = random_cube(5, 5, 7, 100 + seed);
    const FeatureCube out = dwt_features(raw);
    const auto ref = oracle::two_level_features(oracle::from_feature_cube(raw));
    ASSERT_EQ(ref.size(), 15U);
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        for (std::size_t k = 0; k < 15; ++k) {
          for (std::size_t d = 0; d < 7; ++d) {
            EXPECT_NEAR(out(r, c, k * 7 + d), ref[k][r][c][d], 1e-9);
          }
        }
      }
    }
  }
}

TEST(DwtFeatures, NonNegativeAndFinite) {
  const FeatureCube out = dwt_features(random_cube(9, 7, 7, 3));
  EXPECT_TRUE(out.all_finite());
  for (double v : out.data()) EXPECT_GE(v, 0.0);
}

TEST(DwtFeatures, ShiftCovariantInInterior) {
  // Shift a random cube by one column; responses far from the borders move
  // with it.
  const std::size_t h = 12, w = 14, d = 7;
  const FeatureCube base = random_cube(h, w + 1, d, 8);
  FeatureCube left(h, w, d), right(h, w, d);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < d; ++ch) {
        left(r, c, ch) = base(r, c, ch);
        right(r, c, ch) = base(r, c + 1, ch);
      }
    }
  }
  const FeatureCube fl = dwt_features(left), fr = dwt_features(right);
  // Two levels of 2-tap filters look 2 samples ahead, the mean filter one
  // more on each side.
  for (std::size_t r = 2; r + 4 < h; ++r) {
    for (std::size_t c = 2; c + 4 < w; ++c) {
      for (std::size_t k = 0; k < fl.channels(); ++k) {
        EXPECT_NEAR(fl(r, c + 1, k), fr(r, c, k), 1e-12);
      }
    }
  }
}

TEST(MeanAbs, BorderUsesInBoundsNeighbours) {
  FeatureCube cube(3, 3, 1, -1.0);
  cube(1, 1, 0) = 9.0;
  const FeatureCube out = mean_abs_3x3(cube);
  EXPECT_NEAR(out(0, 0, 0), (3.0 + 9.0) / 4.0, 1e-15);
  EXPECT_NEAR(out(0, 1, 0), (5.0 + 9.0) / 6.0, 1e-15);
  EXPECT_NEAR(out(1, 1, 0), (8.0 + 9.0) / 9.0, 1e-15);
}

TEST(Dwt2dFeatures, SevenBandsPerChannel) {
  const FeatureCube raw = random_cube(6, 6, 7, 2);
  const FeatureCube out = dwt2d_features(raw);
  EXPECT_EQ(out.channels(), 49U);
  // Channel-wise: band 3 (level-2 LL) of a per-channel constant equals 4|c|.
  FeatureCube flat(4, 4, 7);
  for (std::size_t p = 0; p < flat.pixels(); ++p) {
    for (std::size_t d = 0; d < 7; ++d) flat.pixel(p)[d] = static_cast<double>(d) - 3.0;
  }
  const FeatureCube f = dwt2d_features(flat);
  for (std::size_t p = 0; p < f.pixels(); ++p) {
    for (std::size_t k = 0; k < 7; ++k) {
      for (std::size_t d = 0; d < 7; ++d) {
        const double expected = k == 3 ? 4.0 * std::abs(static_cast<double>(d) - 3.0) : 0.0;
        EXPECT_NEAR(f.pixel(p)[k * 7 + d], expected, 1e-12);
      }
    }
  }
}

TEST(DwtFeatures, LevelOverride) {
  const FeatureCube raw = random_cube(4, 4, 7, 5);
  EXPECT_EQ(dwt_features(raw, DwtPlan{1}).channels(), 56U);
  EXPECT_EQ(dwt_features(raw, DwtPlan{3}).channels(), 154U);
  EXPECT_THROW(dwt_features(raw, DwtPlan{0}), ArgumentError);
}

TEST(DwtFeatures, BitIdenticalAcrossRuns) {
  const FeatureCube raw = random_cube(7, 6, 7, 12);
  EXPECT_EQ(dwt_features(raw), dwt_features(raw));
}

}  // namespace
}  // namespace polsar
