#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "ssv/random.hpp"

namespace ssv {

/// Weak verifier confidence in [0, 1].
class WeakScore {
 public:
  explicit WeakScore(double value);
  double value() const { return value_; }
  friend bool operator==(WeakScore, WeakScore) = default;

 private:
  double value_;
};

/// Strong verifier judgment: 1 means correct.
class StrongLabel {
 public:
  explicit StrongLabel(int value);
  static StrongLabel correct() { return StrongLabel(1); }
  static StrongLabel incorrect() { return StrongLabel(0); }

  int value() const { return value_; }
  bool is_correct() const { return value_ == 1; }
  friend bool operator==(StrongLabel, StrongLabel) = default;

 private:
  int value_;
};

enum class Action { Accept, Reject, StrongVerify };
enum class Region { Accept, Reject, Uncertain };

std::string_view to_string(Action a);
std::string_view to_string(Region r);
Action parse_action(std::string_view s);
Region parse_region(std::string_view s);

struct Thresholds {
  double tau_reject = 0.1;
  double tau_accept = 0.9;
  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct PolicyConfig {
  double alpha = 0.15;  // Type-I target
  double beta = 0.15;   // Type-II target
  double eta = 0.05;    // constant step size
  double q_accept = 0.1;
  double q_reject = 0.1;
  double tau_reject_init = 0.1;
  double tau_accept_init = 0.9;
  std::uint64_t seed = 0;

  /// Throws ValidationError naming the first offending field.
  void validate() const;
  double q_min() const { return q_accept < q_reject ? q_accept : q_reject; }

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

/// Audit entry for one round.
struct DecisionRecord {
  std::uint64_t t = 0;
  WeakScore w{0.0};
  Region region = Region::Uncertain;
  Action action = Action::StrongVerify;
  double q_t = 1.0;       // realized strong-query probability
  bool explored = false;  // StrongVerify drawn inside a decisive region
  std::optional<StrongLabel> g_observed;
  Thresholds thresholds_before;
  Thresholds thresholds_after;

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

/// Accept iff w > tau_accept, Reject iff w < tau_reject, else Uncertain.
Region classify(WeakScore w, const Thresholds& th);

/// Whether the round ends with the response accepted: Accept, or a strong
/// verification that returned 1.
bool final_accept(const DecisionRecord& rec);

/// Importance-weighted accept-side error signal
/// 1{g=0} (O/q) (1{w > tau_A} - alpha), zero on rounds without strong feedback.
double accept_error_estimate(const DecisionRecord& rec, double alpha);
/// Reject-side analogue 1{g=1} (O/q) (1{w < tau_R} - beta).
double reject_error_estimate(const DecisionRecord& rec, double beta);

/// Online two-threshold selective verification policy.
///
/// Rounds follow a two-phase protocol: `decide` classifies the weak score and
/// picks an action; the round is then closed by `feedback` (after
/// StrongVerify) or `advance_without_feedback` (after Accept/Reject).
/// Thresholds move only on strong-verification rounds.
class SelectiveVerifier {
 public:
  explicit SelectiveVerifier(const PolicyConfig& config);

  const DecisionRecord& decide(WeakScore w);
  Thresholds feedback(StrongLabel g);
  void advance_without_feedback();

  const Thresholds& thresholds() const { return thresholds_; }
  const PolicyConfig& config() const { return config_; }
  /// Index of the next (or currently open) round, starting at 1.
  std::uint64_t round() const { return t_; }
  bool awaiting_feedback() const { return open_ && current_.action == Action::StrongVerify; }
  bool round_open() const { return open_; }
  /// The open round, or the most recently closed one.
  const DecisionRecord& last_record() const { return current_; }

 private:
  PolicyConfig config_;
  Thresholds thresholds_;
  Rng rng_;
  std::uint64_t t_ = 1;
  bool open_ = false;
  DecisionRecord current_;
};

}  // namespace ssv
