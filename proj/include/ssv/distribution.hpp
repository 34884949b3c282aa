#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "ssv/random.hpp"

namespace ssv {

/// Distributions of a weak score on [0, 1].
namespace dist {

struct PointMass {
  double value = 0.5;
  friend bool operator==(const PointMass&, const PointMass&) = default;
};

struct Uniform {
  friend bool operator==(const Uniform&, const Uniform&) = default;
};

struct Beta {
  double a = 1.0;
  double b = 1.0;

  /// Beta with the given mean and concentration a + b.
  static Beta from_mean(double mean, double concentration) {
    return {mean * concentration, (1.0 - mean) * concentration};
  }
  friend bool operator==(const Beta&, const Beta&) = default;
};

/// weight * first + (1 - weight) * second.
struct BetaMixture {
  double weight = 0.5;
  Beta first;
  Beta second;
  friend bool operator==(const BetaMixture&, const BetaMixture&) = default;
};

/// K atoms with nonnegative weights summing to one.
struct Grid {
  std::vector<double> atoms;
  std::vector<double> weights;

  /// K equal cells of [0, 1]: atoms (i + 0.5) / K with equal weights.
  static Grid uniform(std::size_t k);
  friend bool operator==(const Grid&, const Grid&) = default;
};

}  // namespace dist

using ScoreDistribution = std::variant<dist::PointMass, dist::Uniform, dist::Beta,
                                       dist::BetaMixture, dist::Grid>;

/// Throws ValidationError (field `field`) when parameters are out of range.
void validate(const ScoreDistribution& d, const std::string& field = "score");

std::string family_name(const ScoreDistribution& d);

bool is_discrete(const ScoreDistribution& d);

double sample(const ScoreDistribution& d, Rng& rng);

double mean(const ScoreDistribution& d);

/// P(W <= x) when `inclusive`, else P(W < x).
double cdf(const ScoreDistribution& d, double x, bool inclusive = true);

/// E[W 1{W <= x}] when `inclusive`, else E[W 1{W < x}].
double partial_mean(const ScoreDistribution& d, double x, bool inclusive = true);

/// Density of a continuous distribution. ContractError for discrete ones.
double pdf(const ScoreDistribution& d, double x);

/// Atoms of a discrete distribution (a point mass is a one-atom grid).
dist::Grid as_grid(const ScoreDistribution& d);

/// Midpoint discretization into k equal-width bins carrying the exact bin
/// probabilities. For a discrete input the grid itself is returned.
dist::Grid discretize(const ScoreDistribution& d, std::size_t k);

}  // namespace ssv
