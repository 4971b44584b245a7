#pragma once

// Deterministic random streams. The standard distributions are implementation
// defined, so uniform and normal draws are derived here from the raw 64-bit
// engine output to keep results identical across platforms.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace isac {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of an independent sub-stream identified by (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  Rng split(std::uint64_t stream) { return Rng(derive_seed(eng_(), stream)); }

  // uniform on [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // uniform on (0, 1], safe for logarithms
  double uniform_open() { return 1.0 - uniform(); }
  int index(int n) { return static_cast<int>(uniform() * n); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // circularly-symmetric complex Gaussian with E|z|^2 = variance
  std::complex<double> complex_normal(double variance = 1.0) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal();
    return {s * re, s * normal()};
  }

  double exponential(double mean) { return -mean * std::log(uniform_open()); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace isac
