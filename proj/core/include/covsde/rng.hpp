#pragma once

#include <cstdint>
#include <cstddef>

#include "covsde/matrix.hpp"

namespace covsde {

// splitmix64 step: advances the state and returns the next output.
// Used for seeding and for deriving independent substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256++ (Blackman & Vigna). State seeded through splitmix64 as the
// authors recommend, so any 64-bit seed gives a well-mixed state.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// One stream of randomness: raw bits, uniforms, and ziggurat normals.
// Ensembles give every trajectory/sample its own substream derived from
// (master seed, index), which makes parallel runs order-independent and
// byte-reproducible at any worker count.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  static RandomStream substream(std::uint64_t master_seed, std::uint64_t index) {
    // Mix the index through splitmix64 before seeding so neighbouring
    // indices land in unrelated regions of the seed space.
    std::uint64_t sm = master_seed ^ (0xA0761D6478BD642FULL * (index + 1));
    return RandomStream(splitmix64(sm));
  }

  std::uint64_t bits() { return gen_.next(); }

  // Uniform on [0,1), 53-bit resolution.
  double uniform01() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // Standard normal via a 128-layer Marsaglia-Tsang ziggurat (64-bit port).
  double normal();

  void fill_normal(double* dst, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) dst[i] = normal();
  }
  Matrix normal_matrix(int rows, int cols) {
    Matrix m(rows, cols);
    fill_normal(m.data.data(), m.data.size());
    return m;
  }

 private:
  double normal_fixup(std::int64_t h, int layer);
  Xoshiro256pp gen_;
};

}  // namespace covsde
