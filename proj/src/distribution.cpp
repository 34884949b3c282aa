#include "ssv/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "ssv/error.hpp"

namespace ssv {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_beta(const dist::Beta& b, const std::string& field) {
  if (!(b.a > 0.0) || !(b.b > 0.0) || !std::isfinite(b.a) || !std::isfinite(b.b)) {
    throw ValidationError(field, "beta shape parameters must be positive");
  }
}

double beta_mean(const dist::Beta& b) { return b.a / (b.a + b.b); }

double beta_cdf(const dist::Beta& b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(b.a, b.b, x);
}

// E[W 1{W < x}] = mean * I_x(a + 1, b)
double beta_partial_mean(const dist::Beta& b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return beta_mean(b);
  return beta_mean(b) * boost::math::ibeta(b.a + 1.0, b.b, x);
}

double beta_pdf(const dist::Beta& b, double x) {
  boost::math::beta_distribution<double> d(b.a, b.b);
  if (x <= 0.0 || x >= 1.0) {
    // Endpoint densities may be infinite; quadrature never evaluates them.
    return 0.0;
  }
  return boost::math::pdf(d, x);
}

double grid_partial(const dist::Grid& g, double x, bool inclusive, bool weighted) {
  double acc = 0.0;
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    const double w = g.atoms[i];
    if (w < x || (inclusive && w == x)) acc += g.weights[i] * (weighted ? w : 1.0);
  }
  return acc;
}

}  // namespace

dist::Grid dist::Grid::uniform(std::size_t k) {
  Grid g;
  g.atoms.resize(k);
  g.weights.assign(k, 1.0 / static_cast<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    g.atoms[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(k);
  }
  return g;
}

void validate(const ScoreDistribution& d, const std::string& field) {
  std::visit(Overloaded{
                 [&](const dist::PointMass& p) {
                   if (!(p.value >= 0.0 && p.value <= 1.0)) {
                     throw ValidationError(field, "point mass must lie in [0,1]");
                   }
                 },
                 [](const dist::Uniform&) {},
                 [&](const dist::Beta& b) { check_beta(b, field); },
                 [&](const dist::BetaMixture& m) {
                   if (!(m.weight >= 0.0 && m.weight <= 1.0)) {
                     throw ValidationError(field, "mixture weight must lie in [0,1]");
                   }
                   check_beta(m.first, field);
                   check_beta(m.second, field);
                 },
                 [&](const dist::Grid& g) {
                   if (g.atoms.empty() || g.atoms.size() != g.weights.size()) {
                     throw ValidationError(field, "grid needs matching nonempty atoms/weights");
                   }
                   double total = 0.0;
                   for (std::size_t i = 0; i < g.atoms.size(); ++i) {
                     if (!(g.atoms[i] >= 0.0 && g.atoms[i] <= 1.0)) {
                       throw ValidationError(field, "grid atoms must lie in [0,1]");
                     }
                     if (!(g.weights[i] >= 0.0)) {
                       throw ValidationError(field, "grid weights must be nonnegative");
                     }
                     total += g.weights[i];
                   }
                   if (std::abs(total - 1.0) > 1e-12) {
                     throw ValidationError(field, "grid weights must sum to 1");
                   }
                 },
             },
             d);
}

std::string family_name(const ScoreDistribution& d) {
  return std::visit(Overloaded{
                        [](const dist::PointMass&) { return std::string("point"); },
                        [](const dist::Uniform&) { return std::string("uniform"); },
                        [](const dist::Beta&) { return std::string("beta"); },
                        [](const dist::BetaMixture&) { return std::string("beta_mixture"); },
                        [](const dist::Grid&) { return std::string("grid"); },
                    },
                    d);
}

bool is_discrete(const ScoreDistribution& d) {
  return std::holds_alternative<dist::PointMass>(d) || std::holds_alternative<dist::Grid>(d);
}

double sample(const ScoreDistribution& d, Rng& rng) {
  return std::visit(Overloaded{
                        [](const dist::PointMass& p) { return p.value; },
                        [&](const dist::Uniform&) { return rng.uniform(); },
                        [&](const dist::Beta& b) { return rng.beta(b.a, b.b); },
                        [&](const dist::BetaMixture& m) {
                          const bool first = rng.uniform() < m.weight;
                          const dist::Beta& b = first ? m.first : m.second;
                          return rng.beta(b.a, b.b);
                        },
                        [&](const dist::Grid& g) {
                          const double u = rng.uniform();
                          double acc = 0.0;
                          for (std::size_t i = 0; i < g.atoms.size(); ++i) {
                            acc += g.weights[i];
                            if (u < acc) return g.atoms[i];
                          }
                          return g.atoms.back();
                        },
                    },
                    d);
}

double mean(const ScoreDistribution& d) {
  return std::visit(Overloaded{
                        [](const dist::PointMass& p) { return p.value; },
                        [](const dist::Uniform&) { return 0.5; },
                        [](const dist::Beta& b) { return beta_mean(b); },
                        [](const dist::BetaMixture& m) {
                          return m.weight * beta_mean(m.first) +
                                 (1.0 - m.weight) * beta_mean(m.second);
                        },
                        [](const dist::Grid& g) {
                          return std::inner_product(g.atoms.begin(), g.atoms.end(),
                                                    g.weights.begin(), 0.0);
                        },
                    },
                    d);
}

double cdf(const ScoreDistribution& d, double x, bool inclusive) {
  return std::visit(Overloaded{
                        [&](const dist::PointMass& p) {
                          return (p.value < x || (inclusive && p.value == x)) ? 1.0 : 0.0;
                        },
                        [&](const dist::Uniform&) { return std::clamp(x, 0.0, 1.0); },
                        [&](const dist::Beta& b) { return beta_cdf(b, x); },
                        [&](const dist::BetaMixture& m) {
                          return m.weight * beta_cdf(m.first, x) +
                                 (1.0 - m.weight) * beta_cdf(m.second, x);
                        },
                        [&](const dist::Grid& g) { return grid_partial(g, x, inclusive, false); },
                    },
                    d);
}

double partial_mean(const ScoreDistribution& d, double x, bool inclusive) {
  return std::visit(
      Overloaded{
          [&](const dist::PointMass& p) {
            return (p.value < x || (inclusive && p.value == x)) ? p.value : 0.0;
          },
          [&](const dist::Uniform&) {
            const double c = std::clamp(x, 0.0, 1.0);
            return 0.5 * c * c;
          },
          [&](const dist::Beta& b) { return beta_partial_mean(b, x); },
          [&](const dist::BetaMixture& m) {
            return m.weight * beta_partial_mean(m.first, x) +
                   (1.0 - m.weight) * beta_partial_mean(m.second, x);
          },
          [&](const dist::Grid& g) { return grid_partial(g, x, inclusive, true); },
      },
      d);
}

double pdf(const ScoreDistribution& d, double x) {
  return std::visit(Overloaded{
                        [](const dist::PointMass&) -> double {
                          throw ContractError("pdf of a discrete distribution");
                        },
                        [&](const dist::Uniform&) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; },
                        [&](const dist::Beta& b) { return beta_pdf(b, x); },
                        [&](const dist::BetaMixture& m) {
                          return m.weight * beta_pdf(m.first, x) +
                                 (1.0 - m.weight) * beta_pdf(m.second, x);
                        },
                        [](const dist::Grid&) -> double {
                          throw ContractError("pdf of a discrete distribution");
                        },
                    },
                    d);
}

dist::Grid as_grid(const ScoreDistribution& d) {
  if (const auto* g = std::get_if<dist::Grid>(&d)) return *g;
  if (const auto* p = std::get_if<dist::PointMass>(&d)) return dist::Grid{{p->value}, {1.0}};
  throw ContractError("as_grid on a continuous distribution");
}

dist::Grid discretize(const ScoreDistribution& d, std::size_t k) {
  if (is_discrete(d)) return as_grid(d);
  dist::Grid g;
  g.atoms.resize(k);
  g.weights.resize(k);
  const double h = 1.0 / static_cast<double>(k);
  double prev = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double hi = i + 1 == k ? 1.0 : cdf(d, h * static_cast<double>(i + 1));
    g.atoms[i] = h * (static_cast<double>(i) + 0.5);
    g.weights[i] = std::max(0.0, hi - prev);
    prev = hi;
  }
  // Renormalize the rounding residue so the grid validates.
  const double total = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
  for (double& w : g.weights) w /= total;
  return g;
}

}  // namespace ssv
