#pragma once

#include <string_view>
#include <vector>

#include "ssv/distribution.hpp"
#include "ssv/policy.hpp"

namespace ssv::population {

/// One-shot population: weak-score law W plus penalty weights (lambda1 on
/// Type-I, lambda2 on Type-II) and label marginals alpha0 = P(g=0),
/// alpha1 = P(g=1).
struct PopulationSpec {
  ScoreDistribution score = dist::Uniform{};
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double alpha0 = 0.5;
  double alpha1 = 0.5;
  /// When set, validate() also checks alpha1 == E[W].
  bool calibrated = true;

  /// Calibrated population: alpha1 = E[W], alpha0 = 1 - alpha1.
  static PopulationSpec make_calibrated(ScoreDistribution score, double lambda1, double lambda2);

  void validate() const;
};

struct EffectiveWeights {
  double a = 0.0;  // lambda1 / alpha0
  double b = 0.0;  // lambda2 / alpha1
};

struct OptimalPolicy {
  enum class Kind { ThreeRegion, TwoRegion, AlwaysAccept, AlwaysReject };

  Kind kind = Kind::ThreeRegion;
  double t_low = 0.0;
  double t_high = 1.0;
  double w_star = 0.5;

  /// Canonical action: strong verification on the closed interval
  /// [t_low, t_high]; a TwoRegion policy rejects up to and including w_star.
  Action action_at(double w) const;
};

std::string_view to_string(OptimalPolicy::Kind k);

/// Throws ValidationError when alpha0 or alpha1 is zero.
EffectiveWeights effective_weights(const PopulationSpec& spec);

/// SV costs 1, Accept a(1 - w), Reject b w.
double pointwise_cost(double w, Action action, double a, double b);

OptimalPolicy optimal_policy(double a, double b);

struct ValueOptions {
  double quadrature_tolerance = 1e-9;
};

/// E[min{1, a(1 - W), b W}]: an exact atom sum for discrete laws, adaptive
/// quadrature otherwise.
double value(const PopulationSpec& spec, const ValueOptions& opts = {});

/// b E[W 1{W < t_low}] + P(t_low <= W <= t_high) + a E[(1 - W) 1{W > t_high}]
/// through CDFs and partial means. ContractError unless `pol` is ThreeRegion.
double value_three_region(const PopulationSpec& spec, const OptimalPolicy& pol);

struct BruteForceResult {
  double value = 0.0;
  std::vector<Action> assignment;  // one per atom
};

/// Per-atom argmin over the three pointwise costs (ties go to SV, then
/// Accept). Discrete score laws only.
BruteForceResult brute_force_value(const PopulationSpec& spec);

/// Upper bound on |value(spec) - brute_force_value(discretized spec)| for a
/// midpoint grid with `atoms` bins: the integrand is max(a, b)-Lipschitz.
double grid_resolution_bound(const EffectiveWeights& w, std::size_t atoms);

}  // namespace ssv::population
