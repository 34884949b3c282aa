#pragma once

#include <cstdint>

#include "ssv/policy.hpp"

namespace ssv {

/// Exact integer tallies over a trace. Latent labels come from the
/// environment; threshold-induced counters use the thresholds in force at
/// decision time.
struct ErrorLedger {
  std::uint64_t n0 = 0;               // rounds with latent g = 0
  std::uint64_t n1 = 0;               // rounds with latent g = 1
  std::uint64_t type1_policy = 0;     // g = 0 and Accept
  std::uint64_t type2_policy = 0;     // g = 1 and Reject
  std::uint64_t type1_threshold = 0;  // g = 0 and w > tau_A
  std::uint64_t type2_threshold = 0;  // g = 1 and w < tau_R
  std::uint64_t sv_count = 0;
  std::uint64_t total = 0;

  /// Adds one round. Throws ConsistencyError when the observed label
  /// disagrees with `g_latent`.
  void record(const DecisionRecord& rec, StrongLabel g_latent);

  ErrorLedger& operator+=(const ErrorLedger& other);
  friend ErrorLedger operator+(ErrorLedger a, const ErrorLedger& b) { return a += b; }
  friend bool operator==(const ErrorLedger&, const ErrorLedger&) = default;
};

// Rates; a zero denominator yields 0.
double err_type1(const ErrorLedger& l);
double err_type2(const ErrorLedger& l);
double sv_rate(const ErrorLedger& l);
double err_type1_threshold(const ErrorLedger& l);
double err_type2_threshold(const ErrorLedger& l);

struct BoundInputs {
  std::uint64_t n = 0;
  double delta = 0.05;
  double eta = 0.05;
  double q_min = 0.1;

  void validate() const;
};

/// Finite-sample slack
///   (1 + 2 eta / q_min) / (eta N) + sqrt(2 log(4/delta) / (N q_min))
///     + log(4/delta) / (3 N q_min),
/// with the value 0 at N = 0.
double delta_bound(const BoundInputs& in);

}  // namespace ssv
