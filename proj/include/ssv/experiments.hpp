#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssv/metrics.hpp"
#include "ssv/policy.hpp"
#include "ssv/streams.hpp"

namespace ssv::experiments {

struct RunSpec {
  PolicyConfig policy;
  streams::StreamSpec stream;
  /// Number of rounds; nullopt runs until the stream is exhausted.
  std::optional<std::uint64_t> horizon = 1000;
  std::uint32_t repetitions = 1;
  std::uint64_t seed_base = 0;

  void validate() const;
  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

/// Seeds for repetition `rep`: the policy and stream seeds in `spec` are
/// replaced by values derived from (seed_base, rep).
PolicyConfig rep_policy(const RunSpec& spec, std::uint32_t rep);
streams::StreamSpec rep_stream(const RunSpec& spec, std::uint32_t rep);

struct Trace {
  std::uint32_t repetition = 0;
  PolicyConfig policy;
  streams::StreamSpec stream;
  std::vector<DecisionRecord> records;
  std::vector<StrongLabel> latent;
  ErrorLedger ledger;
  std::optional<streams::TaskOutcome> outcome;
  Thresholds initial;
  Thresholds final;
  std::uint64_t rounds = 0;
};

struct RunOptions {
  /// Off keeps only the ledger and the endpoint thresholds.
  bool keep_records = true;
};

Trace run_once(const RunSpec& spec, std::uint32_t rep, const RunOptions& opts = {});

/// All repetitions; `threads` = 0 uses the hardware concurrency. Output
/// order and content do not depend on the thread count.
std::vector<Trace> run(const RunSpec& spec, unsigned threads = 1, const RunOptions& opts = {});

// ---- sweeps ----

struct Target {
  double alpha = 0.15;
  double beta = 0.15;
  friend bool operator==(const Target&, const Target&) = default;
};

struct ParetoPoint {
  std::optional<double> alpha;  // empty on anchor rows
  std::optional<double> beta;
  double accuracy = 0.0;
  double accuracy_stderr = 0.0;
  double strong_per_problem = 0.0;
  double weak_per_problem = 0.0;
  std::optional<double> err1;  // empty on the weak-only row
  std::optional<double> err2;
  std::uint32_t reps = 0;
  bool is_oracle = false;
  bool is_weak_only = false;

  friend bool operator==(const ParetoPoint&, const ParetoPoint&) = default;
};

struct SweepSpec {
  std::vector<Target> targets;
  RunSpec base;
  bool anchors = true;

  void validate() const;
};

/// Result of one (row, repetition) job. Rows are the targets in order, then
/// the oracle anchor and the weak-only anchor.
struct JobResult {
  std::size_t row = 0;
  std::uint32_t rep = 0;
  double accuracy = 0.0;
  double strong_per_problem = 0.0;
  double weak_per_problem = 0.0;
  double err1 = 0.0;
  double err2 = 0.0;
  friend bool operator==(const JobResult&, const JobResult&) = default;
};

struct Shard {
  std::size_t index = 0;
  std::size_t count = 1;
};

/// Runs the jobs whose global index is congruent to shard.index.
std::vector<JobResult> sweep_jobs(const SweepSpec& spec, const Shard& shard = {},
                                  unsigned threads = 1);

/// Aggregates job results from any set of shards into points. Throws
/// ContractError if a job is missing or duplicated.
std::vector<ParetoPoint> aggregate(const SweepSpec& spec, std::vector<JobResult> jobs);

std::vector<ParetoPoint> sweep(const SweepSpec& spec, unsigned threads = 1);

// ---- checks ----

struct InequalityReport {
  double error = 0.0;
  double target = 0.0;
  std::uint64_t n = 0;
  double slack = 0.0;  // Delta(n, delta)
  double margin = 0.0; // target + slack - error
  bool vacuous = false;
  bool passed = false;
};

struct BoundReport {
  double delta = 0.05;
  InequalityReport type1;
  InequalityReport type2;
  bool passed() const { return type1.passed && type2.passed; }
};

BoundReport verify_bound(const ErrorLedger& ledger, const PolicyConfig& config, double delta);
BoundReport verify_bound(const Trace& trace, double delta);

struct ClaimResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ClaimReport {
  std::vector<ClaimResult> claims;
  double telescoping_accept_gap = 0.0;  // rhs - lhs
  double telescoping_reject_gap = 0.0;
  double tau_min = 0.0;
  double tau_max = 0.0;
  bool passed() const;
};

struct ClaimOptions {
  double telescoping_tolerance = 1e-9;
  /// Widens the telescoping tolerance by T * eps / eta so very long traces
  /// are not failed by floating-point accumulation alone.
  bool accumulation_allowance = false;
};

/// Recomputes importance-weighted sums, threshold excursions and ledger
/// tallies from `records` and checks telescoping, the threshold band,
/// ordering, update locality, action-region consistency and domination.
ClaimReport check_claims(const std::vector<DecisionRecord>& records,
                         const std::vector<StrongLabel>& latent, const PolicyConfig& config,
                         const ClaimOptions& opts = {});
ClaimReport check_claims(const Trace& trace, const ClaimOptions& opts = {});

// ---- diagnostics ----

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::uint64_t count = 0;
  double mean_w = 0.0;
  double frac_correct = 0.0;
};

struct Diagnostics {
  std::uint64_t count = 0;
  double sharpness_mean = 0.0;  // |w - 0.5|
  double sharpness_median = 0.0;
  double sharpness_std = 0.0;
  double mean_correct = 0.0;
  double mean_incorrect = 0.0;
  double separation = 0.0;
  double base_accuracy = 0.0;
  double brier = 0.0;
  std::vector<CalibrationBin> bins;
};

Diagnostics diagnose(const std::vector<streams::StreamItem>& items, std::size_t bins = 20);
Diagnostics diagnose(const streams::StreamSpec& spec, std::uint64_t samples,
                     std::size_t bins = 20);

}  // namespace ssv::experiments
