#pragma once

#include <cmath>
#include <cstdint>

namespace splitlab {

// Counter-based generator: output i depends only on (seed, i), so
// per-sample streams can be derived without shared state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b ^ 0x6a09e667f3bcc909ULL));
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return mix(seed_, counter_++); }

  // Uniform in (0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Independent stream for a work item; derivation is pure in (seed, index).
  Rng derive(std::uint64_t index) const { return Rng(mix(seed_, index)); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace splitlab
