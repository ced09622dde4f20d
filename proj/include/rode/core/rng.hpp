#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rode {

/// Deterministic generator with named-stream splitting.
///
/// A run is seeded by one integer. Every stochastic component draws from its
/// own stream, derived as
///
///   state0 = splitmix64(master ^ fnv1a64(stream_name))
///
/// and advanced with splitmix64 steps. Streams are therefore independent of
/// the order in which components are constructed, and the whole run is
/// reproducible from (config, seed) alone. No global state.
class Rng {
 public:
  Rng() : state_(0x9e3779b97f4a7c15ULL) {}
  explicit Rng(std::uint64_t seed) : state_(mix(seed + 0x9e3779b97f4a7c15ULL)) {}

  /// Derived stream: same master seed + same name => same stream, always.
  static Rng stream(std::uint64_t master_seed, const std::string& name) {
    return Rng(master_seed ^ fnv1a64(name));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); unbiased via rejection.
  int next_int(int n) {
    if (n <= 0) throw std::runtime_error("Rng::next_int: n must be positive");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return static_cast<int>(r % bound);
  }

  /// Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    cached_ = mag * std::sin(6.283185307179586 * u2);
    has_cached_ = true;
    return mag * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn from unnormalized nonnegative weights.
  int weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::runtime_error("Rng::weighted_index: negative weight");
      total += w;
    }
    if (total <= 0.0) throw std::runtime_error("Rng::weighted_index: all weights zero");
    double r = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      r -= weights[i];
      if (r < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(next_int(i + 1))]);
    }
  }

  /// k distinct values from [0, n), in random order.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k > n) throw std::runtime_error("Rng::sample_without_replacement: k > n");
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    shuffle(pool);
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

  static std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace rode
