#include "ssv/random.hpp"

#include <cmath>
#include <limits>

namespace ssv {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // Box-Muller on two fresh uniforms; keeps the draw count fixed per call.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = std::numeric_limits<double>::min();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::log_gamma_variate(double shape) {
  // Gamma(k) = Gamma(k + 1) * U^(1/k) for k < 1; stay in log space so tiny
  // shapes do not underflow to zero.
  if (shape >= 1.0) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    return std::log(gamma(engine_));
  }
  std::gamma_distribution<double> gamma(shape + 1.0, 1.0);
  const double g = gamma(engine_);
  double u = uniform();
  if (u <= 0.0) u = std::numeric_limits<double>::min();
  return std::log(g) + std::log(u) / shape;
}

double Rng::beta(double a, double b) {
  const double lx = log_gamma_variate(a);
  const double ly = log_gamma_variate(b);
  // x / (x + y) = 1 / (1 + exp(ly - lx))
  const double d = ly - lx;
  if (d > 700.0) return 0.0;
  if (d < -700.0) return 1.0;
  return 1.0 / (1.0 + std::exp(d));
}

}  // namespace ssv
