#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace genop {

// Deterministic, platform-independent RNG. All randomness in the project flows
// from one run seed split into named streams (dataset, init, particles, noise,
// inversion, shuffle), optionally sub-keyed by epoch so that training can be
// resumed mid-run without replaying RNG history.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

  static std::uint64_t fold(std::uint64_t seed, std::string_view stream, std::uint64_t sub = 0) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    for (char c : stream) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 1099511628211ULL;
    }
    std::uint64_t x = seed;
    x = splitmix(x ^ h);
    x = splitmix(x ^ sub);
    return x;
  }

  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t sub = 0) {
    return Rng(fold(seed, name, sub));
  }

  std::uint64_t next_u64() {
    // xorshift64* on a splitmix-initialized state
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  // Box-Muller; caches the second deviate.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double logistic() {
    double u = 0.0;
    do { u = uniform(); } while (u <= 0.0 || u >= 1.0);
    return std::log(u / (1.0 - u));
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

} // namespace genop
