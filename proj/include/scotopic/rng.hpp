#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace scotopic {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// A draw is a pure function of (key, counter), so simulations can hand out
// independent, reproducible streams per (purpose, bin, pixel) without any
// shared state.
struct Philox4x32 {
  static constexpr uint32_t kMul0 = 0xD2511F53u;
  static constexpr uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                       std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const uint64_t p0 = static_cast<uint64_t>(kMul0) * ctr[0];
      const uint64_t p1 = static_cast<uint64_t>(kMul1) * ctr[2];
      const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
      const uint32_t lo0 = static_cast<uint32_t>(p0);
      const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
      const uint32_t lo1 = static_cast<uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// Purpose lanes keep logically distinct draws from ever sharing a counter.
enum class RngLane : uint32_t {
  Frame = 1,
  FixedPattern = 2,
  Jitter = 3,
  JitterOneShot = 4,
  Readout = 5,
  WeightInit = 6,
  Shuffle = 7,
  Exposure = 8,
  Bootstrap = 9,
  Dataset = 10,
  Split = 11,
  Sample = 12,
};

// A sequential view over one counter lane: (seed, lane0, lane1, lane2) fixes
// the stream identity and the block index advances as values are consumed.
class RngStream {
 public:
  RngStream(uint64_t seed, uint32_t lane0, uint32_t lane1 = 0, uint32_t lane2 = 0)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        base_{lane0, lane1, lane2, 0} {}

  RngStream(uint64_t seed, RngLane lane, uint32_t lane1 = 0, uint32_t lane2 = 0)
      : RngStream(seed, static_cast<uint32_t>(lane), lane1, lane2) {}

  uint32_t next_u32() {
    if (pos_ >= 4) refill();
    return buf_[pos_++];
  }

  uint64_t next_u64() {
    const uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform on the open interval (0, 1); safe to feed into logarithms.
  double uniform() {
    const uint64_t bits = next_u64() >> 11;  // top 53 bits
    return (static_cast<double>(bits) + 0.5) * (1.0 / 9007199254740992.0);
  }

  // Standard normal via Box-Muller; the paired value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Exact Poisson sampling. Knuth's product-of-uniforms method, splitting
  // large means into chunks so exp(-mean) stays well away from underflow.
  long poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
    if (mean == 0.0) return 0;
    long n = 0;
    while (mean > 30.0) {
      n += poisson_knuth(30.0);
      mean -= 30.0;
    }
    return n + poisson_knuth(mean);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("below: empty range");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  long poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  void refill() {
    buf_ = Philox4x32::block(base_, key_);
    ++base_[3];
    pos_ = 0;
  }

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> base_;
  std::array<uint32_t, 4> buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable 64-bit mix for deriving sub-seeds (e.g. per-query readout seeds).
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t x = seed ^ (salt + 0x9E3779B97F4A7C15ull + (seed << 6) + (seed >> 2));
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

}  // namespace scotopic
