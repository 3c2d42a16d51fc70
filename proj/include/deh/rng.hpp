#pragma once

#include <cstdint>

namespace deh {

// Counter-based generator: draw k of stream s under seed is
// splitmix64_mix(seed ^ splitmix64_mix(s) + (k + 1) * 0x9E3779B97F4A7C15).
// Stateless apart from the counter, so any draw can be reproduced in another
// implementation from (seed, stream, k) alone.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform in (0, 1], 53 random bits.
  double uniform();

  // Standard normal via Box-Muller; draws come in (cos, sin) pairs.
  double gaussian();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace deh
