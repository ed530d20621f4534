#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace gmdiff {

// Deterministic RNG wrapper. Normal variates come from an explicit
// Box-Muller transform so the byte stream depends only on the seed,
// not on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

  // Independent child stream; derivation is injective in (seed, id).
  Rng stream(std::uint64_t id) const { return Rng(mix(seed_ ^ (0x9e3779b97f4a7c15ull + id))); }

  std::uint64_t raw() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller; u1 is kept away from zero so std::log is finite.
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0x1.0p-100);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vec(int d) {
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z[i] = normal();
    return z;
  }

  // Uniform index in [0, n).
  int index(int n) { return static_cast<int>(uniform() * n) % n; }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer; spreads low-entropy seeds over the full state.
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gmdiff
