#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bym2 {

// Deterministic random stream. All distribution transforms are pinned here
// rather than delegated to std:: distributions, whose algorithms differ
// between standard library implementations; a fixed seed therefore yields
// the same draws on every platform the engine itself is deterministic on.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  // Independent substream keyed by (master, a, b); the key is hashed with
  // SplitMix64 so that nearby keys give unrelated streams.
  static RngStream substream(std::uint64_t master, std::uint64_t a,
                             std::uint64_t b) {
    std::uint64_t s = mix(mix(mix(master) ^ a) ^ b);
    return RngStream(s);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the spare draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // uniform() can return 0; shift into (0, 1] for the log.
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Poisson count by accumulating unit-exponential arrivals until the mean
  // is exceeded. O(mean) draws; fine for the desk-scale means used here.
  long poisson(double mean) {
    if (!(mean >= 0.0)) return 0;
    long k = -1;
    double s = 0.0;
    while (s <= mean) {
      s += -std::log(1.0 - uniform());
      ++k;
    }
    return k;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bym2
