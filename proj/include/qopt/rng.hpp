#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qopt {

// Seeded RNG with portable draw functions. std::mt19937_64's raw output is
// pinned by the standard; the std distributions are not, so uniform/gaussian
// are derived here explicitly to keep runs byte-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1]
  double uniform_pos() {
    return (static_cast<double>(bits() >> 11) + 1.0) * 0x1.0p-53;
  }

  double gaussian() {
    // Box-Muller; one value per call keeps the stream position predictable.
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // uniform integer in [0, bound), rejection sampled
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = bits();
      if (r >= threshold) return r % bound;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qopt
