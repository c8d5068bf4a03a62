#pragma once

// Counter-based random streams. Every draw is a pure function of
// (seed, stream, index), so results do not depend on evaluation order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bimatch {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = Counter{static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                    static_cast<std::uint32_t>(p1),
                    static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                    static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Stream tags keep unrelated consumers of one seed apart.
enum class StreamTag : std::uint32_t {
  kLabelRandom = 1,
  kLabelTieBreak = 2,
  kPopulation = 3,
  kNoise = 4,
  kErdosRenyi = 5,
  kBiasExperiment = 6,
  kUser = 0x100,
};

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr std::uint64_t seed() const noexcept {
    return (std::uint64_t{key_[1]} << 32) | key_[0];
  }

  /// 128 random bits for the block addressed by (stream, index).
  constexpr std::array<std::uint64_t, 2> bits(std::uint64_t stream,
                                              std::uint64_t index) const noexcept {
    const Philox4x32::Counter out = Philox4x32::apply(
        {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
         static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
        key_);
    return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
  }

  /// Two uniforms strictly inside (0, 1) with 53-bit resolution.
  std::array<double, 2> uniforms(std::uint64_t stream, std::uint64_t index) const noexcept {
    const auto b = bits(stream, index);
    return {to_open_unit(b[0]), to_open_unit(b[1])};
  }

  double uniform(std::uint64_t stream, std::uint64_t index) const noexcept {
    return to_open_unit(bits(stream, index)[0]);
  }

  /// Box-Muller pair of independent standard normals.
  std::array<double, 2> normals(std::uint64_t stream, std::uint64_t index) const noexcept {
    const auto u = uniforms(stream, index);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double t = 2.0 * std::numbers::pi * u[1];
    return {r * std::cos(t), r * std::sin(t)};
  }

  bool coin(std::uint64_t stream, std::uint64_t index) const noexcept {
    return (bits(stream, index)[0] >> 63) != 0;
  }

  static constexpr double to_open_unit(std::uint64_t x) noexcept {
    return (static_cast<double>(x >> 12) + 0.5) * 0x1.0p-52;
  }

 private:
  Philox4x32::Key key_;
};

/// Packs a tag and a sub-stream number into one stream id.
constexpr std::uint64_t make_stream(StreamTag tag, std::uint64_t sub = 0) noexcept {
  return (std::uint64_t{static_cast<std::uint32_t>(tag)} << 40) ^ sub;
}

/// splitmix64 finalizer, used to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace bimatch
