#include <gtest/gtest.h>

#include <cmath>

#include "bimatch/random.hpp"

namespace {

using bimatch::CounterRng;
using bimatch::Philox4x32;

// Known-answer vectors published with the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(CounterRng, UniformsStayInsideOpenInterval) {
  EXPECT_GT(CounterRng::to_open_unit(0), 0.0);
  EXPECT_LT(CounterRng::to_open_unit(~std::uint64_t{0}), 1.0);
}

TEST(CounterRng, DrawsArePureFunctionsOfAddress) {
  const CounterRng a(42), b(42), c(43);
  EXPECT_EQ(a.bits(7, 9), b.bits(7, 9));
  EXPECT_NE(a.bits(7, 9), c.bits(7, 9));
  EXPECT_NE(a.bits(7, 9), a.bits(7, 10));
  EXPECT_NE(a.bits(7, 9), a.bits(8, 9));
}

TEST(CounterRng, NormalMoments) {
  const CounterRng rng(2024);
  const std::size_t n = 200000;
  double s = 0.0, ss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto z = rng.normals(1, k);
    s += z[0] + z[1];
    ss += z[0] * z[0] + z[1] * z[1];
  }
  const double mean = s / (2.0 * n);
  const double var = ss / (2.0 * n) - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(CounterRng, CoinIsBalanced) {
  const CounterRng rng(5);
  std::size_t heads = 0;
  const std::size_t n = 100000;
  for (std::size_t k = 0; k < n; ++k) heads += rng.coin(3, k) ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(heads) / n, 0.5, 0.005);
}

}  // namespace
