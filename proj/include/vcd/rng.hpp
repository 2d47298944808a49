#pragma once

#include <cstdint>
#include <random>

#include "vcd/math.hpp"

namespace vcd {

// Wrapper around mt19937_64 with substream derivation, so that per-datapoint
// estimator evaluations are reproducible independently of thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t integer() { return engine_(); }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Draw an index from unnormalized nonnegative weights.
  int categorical(const Vec& w) {
    double total = w.sum();
    double u = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u <= acc) return i;
    }
    return static_cast<int>(w.size()) - 1;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace vcd
