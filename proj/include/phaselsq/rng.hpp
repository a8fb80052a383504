#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace phaselsq {

/// Counter-based random stream. Output i of a stream with key k is
/// mix64(k + GOLDEN * (i + 1)), where mix64 is the splitmix64 finalizer, so
/// any output can be computed without generating its predecessors. Streams
/// derived from the same (seed, tags...) produce the identical sequence on
/// every platform, thread count and scheduling order.
class Rng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  explicit Rng(std::uint64_t key) : key_(key) {}

  /// Derives a stream key from a seed plus up to three tags, chain-mixing
  /// each tag into the key.
  static Rng from(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                  std::uint64_t c = 0) {
    std::uint64_t k = mix64(seed + kGolden);
    k = mix64(k ^ (kGolden * (a + 1)));
    k = mix64(k ^ (kGolden * (b + 1)));
    k = mix64(k ^ (kGolden * (c + 1)));
    return Rng(k);
  }

  std::uint64_t next_u64() { return mix64(key_ + kGolden * (++counter_)); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; pairs are generated, the second is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = double(next_u64() >> 11) * 0x1.0p-53;        // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = kTwoPi_ * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

 private:
  static constexpr double kTwoPi_ = 6.283185307179586476925287;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace phaselsq
