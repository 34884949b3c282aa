#include "ssv/population.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ssv/error.hpp"

namespace ssv::population {

PopulationSpec PopulationSpec::make_calibrated(ScoreDistribution score, double lambda1,
                                               double lambda2) {
  PopulationSpec spec;
  spec.alpha1 = mean(score);
  spec.alpha0 = 1.0 - spec.alpha1;
  spec.score = std::move(score);
  spec.lambda1 = lambda1;
  spec.lambda2 = lambda2;
  spec.calibrated = true;
  return spec;
}

void PopulationSpec::validate() const {
  ssv::validate(score, "score");
  if (!(lambda1 >= 0.0)) throw ValidationError("lambda1", "must be nonnegative");
  if (!(lambda2 >= 0.0)) throw ValidationError("lambda2", "must be nonnegative");
  if (!(alpha0 >= 0.0 && alpha0 <= 1.0)) throw ValidationError("alpha0", "must lie in [0,1]");
  if (!(alpha1 >= 0.0 && alpha1 <= 1.0)) throw ValidationError("alpha1", "must lie in [0,1]");
  if (std::abs(alpha0 + alpha1 - 1.0) > 1e-12) {
    throw ValidationError("alpha1", "alpha0 + alpha1 must equal 1");
  }
  if (calibrated && std::abs(alpha1 - mean(score)) > 1e-9) {
    throw ValidationError("alpha1", "calibrated population requires alpha1 = E[W]");
  }
}

Action OptimalPolicy::action_at(double w) const {
  switch (kind) {
    case Kind::AlwaysAccept: return Action::Accept;
    case Kind::AlwaysReject: return Action::Reject;
    case Kind::TwoRegion: return w > w_star ? Action::Accept : Action::Reject;
    case Kind::ThreeRegion:
      if (w < t_low) return Action::Reject;
      if (w > t_high) return Action::Accept;
      return Action::StrongVerify;
  }
  return Action::StrongVerify;
}

std::string_view to_string(OptimalPolicy::Kind k) {
  switch (k) {
    case OptimalPolicy::Kind::ThreeRegion: return "three_region";
    case OptimalPolicy::Kind::TwoRegion: return "two_region";
    case OptimalPolicy::Kind::AlwaysAccept: return "always_accept";
    case OptimalPolicy::Kind::AlwaysReject: return "always_reject";
  }
  return "?";
}

EffectiveWeights effective_weights(const PopulationSpec& spec) {
  if (!(spec.alpha0 > 0.0) || !(spec.alpha1 > 0.0)) {
    throw ValidationError(spec.alpha0 > 0.0 ? "alpha1" : "alpha0",
                          "degenerate population: both label classes need positive mass");
  }
  return {spec.lambda1 / spec.alpha0, spec.lambda2 / spec.alpha1};
}

double pointwise_cost(double w, Action action, double a, double b) {
  switch (action) {
    case Action::StrongVerify: return 1.0;
    case Action::Accept: return a * (1.0 - w);
    case Action::Reject: return b * w;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

OptimalPolicy optimal_policy(double a, double b) {
  OptimalPolicy pol;
  if (a == 0.0) {
    pol.kind = OptimalPolicy::Kind::AlwaysAccept;
    return pol;
  }
  if (b == 0.0) {
    pol.kind = OptimalPolicy::Kind::AlwaysReject;
    return pol;
  }
  const double t_low = 1.0 / b;
  const double t_high = 1.0 - 1.0 / a;
  if (t_low <= t_high) {
    pol.kind = OptimalPolicy::Kind::ThreeRegion;
    pol.t_low = t_low;
    pol.t_high = t_high;
  } else {
    // SV is never cheapest; A and R cross where a(1 - w) = b w.
    pol.kind = OptimalPolicy::Kind::TwoRegion;
    pol.w_star = a / (a + b);
  }
  return pol;
}

namespace {

double min_cost(double w, double a, double b) {
  return std::min({1.0, a * (1.0 - w), b * w});
}

}  // namespace

double value(const PopulationSpec& spec, const ValueOptions& opts) {
  spec.validate();
  const auto [a, b] = effective_weights(spec);
  if (is_discrete(spec.score)) {
    const dist::Grid g = as_grid(spec.score);
    double v = 0.0;
    for (std::size_t i = 0; i < g.atoms.size(); ++i) v += g.weights[i] * min_cost(g.atoms[i], a, b);
    return v;
  }
  // Split at the kinks of the piecewise-linear integrand so every piece is
  // smooth in the interior.
  std::vector<double> cuts{0.0, 1.0};
  for (double c : {b > 0 ? 1.0 / b : 2.0, a > 0 ? 1.0 - 1.0 / a : -1.0,
                   a + b > 0 ? a / (a + b) : -1.0}) {
    if (c > 0.0 && c < 1.0) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  boost::math::quadrature::tanh_sinh<double> integrator;
  const ScoreDistribution& d = spec.score;
  auto integrand = [&](double w) { return min_cost(w, a, b) * pdf(d, w); };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += integrator.integrate(integrand, cuts[i], cuts[i + 1], opts.quadrature_tolerance);
  }
  return total;
}

double value_three_region(const PopulationSpec& spec, const OptimalPolicy& pol) {
  if (pol.kind != OptimalPolicy::Kind::ThreeRegion) {
    throw ContractError("value_three_region requires a ThreeRegion policy");
  }
  spec.validate();
  const auto [a, b] = effective_weights(spec);
  const ScoreDistribution& d = spec.score;
  const double below = partial_mean(d, pol.t_low, /*inclusive=*/false);
  const double middle = cdf(d, pol.t_high, true) - cdf(d, pol.t_low, false);
  const double above_mass = 1.0 - cdf(d, pol.t_high, true);
  const double above_mean = mean(d) - partial_mean(d, pol.t_high, true);
  return b * below + middle + a * (above_mass - above_mean);
}

BruteForceResult brute_force_value(const PopulationSpec& spec) {
  spec.validate();
  if (!is_discrete(spec.score)) throw ContractError("brute_force_value needs a discrete score law");
  const auto [a, b] = effective_weights(spec);
  const dist::Grid g = as_grid(spec.score);
  BruteForceResult out;
  out.assignment.reserve(g.atoms.size());
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    Action best = Action::StrongVerify;
    double best_cost = pointwise_cost(g.atoms[i], best, a, b);
    for (Action cand : {Action::Accept, Action::Reject}) {
      const double c = pointwise_cost(g.atoms[i], cand, a, b);
      if (c < best_cost) {
        best = cand;
        best_cost = c;
      }
    }
    out.assignment.push_back(best);
    out.value += g.weights[i] * best_cost;
  }
  return out;
}

double grid_resolution_bound(const EffectiveWeights& w, std::size_t atoms) {
  return std::max(w.a, w.b) * 0.5 / static_cast<double>(atoms);
}

}  // namespace ssv::population
