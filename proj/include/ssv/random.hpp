#pragma once

#include <cstdint>
#include <random>

namespace ssv {

/// Mixes (seed, tag) into an independent 64-bit seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Deterministic random stream. Child streams obtained through `split` are
/// independent of the parent's draw position, so policy randomness and
/// environment randomness never interleave.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Rng split(std::uint64_t tag) const { return Rng(derive_seed(seed_, tag)); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  bool bernoulli(double p) { return uniform() < p; }

  /// Beta(a, b) via log-space gamma variates; stable for shapes far below 1.
  double beta(double a, double b);

  double normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  double log_gamma_variate(double shape);

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace ssv
