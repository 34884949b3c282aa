#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ssv/distribution.hpp"
#include "ssv/policy.hpp"
#include "ssv/random.hpp"

namespace ssv::streams {

/// Monotone map [0,1] -> [0,1] turning a weak score into the true
/// probability of a correct label.
struct Link {
  enum class Kind { Identity, Power, Affine };
  Kind kind = Kind::Identity;
  double exponent = 1.0;   // Power: w^exponent
  double intercept = 0.0;  // Affine: intercept + slope * w
  double slope = 1.0;

  static Link power(double exponent) { return {Kind::Power, exponent, 0.0, 1.0}; }
  static Link affine(double intercept, double slope) {
    return {Kind::Affine, 1.0, intercept, slope};
  }

  double operator()(double w) const;
  void validate() const;
  friend bool operator==(const Link&, const Link&) = default;
};

/// g | W = w ~ Bernoulli(w).
struct Calibrated {
  ScoreDistribution score;
  friend bool operator==(const Calibrated&, const Calibrated&) = default;
};

/// g | W = w ~ Bernoulli(link(w)).
struct Miscalibrated {
  ScoreDistribution score;
  Link link;
  friend bool operator==(const Miscalibrated&, const Miscalibrated&) = default;
};

struct DriftSegment {
  ScoreDistribution score;
  std::uint64_t length = 1;
  friend bool operator==(const DriftSegment&, const DriftSegment&) = default;
};

/// Calibrated segments played back to back; the stream ends after the last.
struct Drift {
  std::vector<DriftSegment> segments;
  friend bool operator==(const Drift&, const Drift&) = default;
};

/// Problems with up to `budget` candidate generations each. A problem's
/// candidates are correct with probability p ~ difficulty; scores follow
/// `correct_scores` (F1) or `incorrect_scores` (F0).
struct BestOfN {
  std::uint64_t problems = 1000;
  std::uint32_t budget = 4;
  ScoreDistribution difficulty = dist::PointMass{0.5};
  ScoreDistribution correct_scores = dist::Beta{8.0, 2.0};
  ScoreDistribution incorrect_scores = dist::Beta{2.0, 8.0};
  friend bool operator==(const BestOfN&, const BestOfN&) = default;
};

/// Episodes of `steps` steps. Each generated step is correct with
/// probability `step_correct`; a step may be generated at most
/// `retry_budget` times.
struct Stepwise {
  std::uint64_t episodes = 100;
  std::uint32_t steps = 5;
  double step_correct = 0.8;
  ScoreDistribution correct_scores = dist::Beta{8.0, 2.0};
  ScoreDistribution incorrect_scores = dist::Beta{2.0, 8.0};
  std::uint32_t retry_budget = 3;
  friend bool operator==(const Stepwise&, const Stepwise&) = default;
};

using StreamVariant = std::variant<Calibrated, Miscalibrated, Drift, BestOfN, Stepwise>;

struct StreamSpec {
  StreamVariant variant = Calibrated{dist::Uniform{}};
  std::uint64_t seed = 0;

  void validate() const;
  /// BestOfN and Stepwise respond to decisions; the others are i.i.d. or
  /// a fixed schedule.
  bool reactive() const;
  /// Total number of items for finite non-reactive streams (Drift).
  std::optional<std::uint64_t> fixed_length() const;

  friend bool operator==(const StreamSpec&, const StreamSpec&) = default;
};

std::string_view variant_name(const StreamVariant& v);

struct StreamItem {
  WeakScore w{0.0};
  StrongLabel g_latent{0};
  std::optional<std::uint64_t> problem_id;
  std::optional<std::uint32_t> step_index;
};

struct TaskOutcome {
  std::uint64_t problems_total = 0;
  std::uint64_t problems_correct = 0;
  double strong_calls_per_problem = 0.0;
  double weak_calls_per_problem = 0.0;

  double accuracy() const {
    return problems_total == 0 ? 0.0
                               : static_cast<double>(problems_correct) /
                                     static_cast<double>(problems_total);
  }
  friend bool operator==(const TaskOutcome&, const TaskOutcome&) = default;
};

/// Stateful environment. `next` returns nullopt once exhausted.
class Stream {
 public:
  virtual ~Stream() = default;

  virtual std::optional<StreamItem> next() = 0;

  /// Final decision on the last item: accepted or not, and whether the
  /// strong verifier was consulted. Reactive streams require exactly one
  /// call per item; i.i.d. streams ignore it and count a warning.
  virtual void react(bool accepted, bool strong_verified) = 0;

  virtual bool exhausted() const = 0;

  /// Per-problem aggregate. ContractError unless the stream is reactive and
  /// exhausted.
  virtual TaskOutcome outcome() const = 0;

  std::uint64_t ignored_reacts() const { return ignored_reacts_; }

 protected:
  std::uint64_t ignored_reacts_ = 0;
};

std::unique_ptr<Stream> make_stream(const StreamSpec& spec);

/// Never-SV baseline: BestOfN generates all `budget` candidates and accepts
/// the highest score; Stepwise does the same per step. For non-reactive
/// streams each of `horizon` items is accepted iff w >= 0.5, and a problem
/// is correct iff that decision matches the latent label.
TaskOutcome weak_only_greedy(const StreamSpec& spec, std::optional<std::uint64_t> horizon = {});

/// Draws `count` candidate (w, g) pairs without any decision feedback. For
/// task streams this samples the per-candidate law directly.
std::vector<StreamItem> sample_items(const StreamSpec& spec, std::uint64_t count);

enum class Level { Easy, Medium, Hard };

std::string_view to_string(Level l);
Level parse_level(std::string_view s);

/// Best-of-n math-style preset with Beta conditional score laws matched to
/// the per-level correct/incorrect means and base accuracy.
StreamSpec preset_math_like(Level level, std::uint64_t problems = 5000);

/// Calibrated stream whose score law is the level's marginal mixture
/// base * F1 + (1 - base) * F0.
StreamSpec preset_math_like_calibrated(Level level);

/// Best-of-n preset whose correct and incorrect scores share Beta(8, 8).
StreamSpec preset_ambiguous(std::uint64_t problems = 5000);

/// Resolves names like "math_easy", "math_easy_calibrated", "ambiguous",
/// "uniform". Throws ValidationError for unknown names.
StreamSpec preset(std::string_view name);
std::vector<std::string> preset_names();

/// External source of weak scores and strong judgments.
class Verifier {
 public:
  virtual ~Verifier() = default;
  /// Weak score of the next item, or nullopt when no items remain.
  virtual std::optional<WeakScore> weak_score() = 0;
  /// Strong judgment of the current item.
  virtual StrongLabel strong_query() = 0;
  /// Final decision on the current item.
  virtual void finalize(bool accepted) { (void)accepted; }
};

/// Adapts a synthetic stream to the Verifier interface.
class StreamVerifier : public Verifier {
 public:
  explicit StreamVerifier(const StreamSpec& spec) : stream_(make_stream(spec)) {}

  std::optional<WeakScore> weak_score() override;
  StrongLabel strong_query() override;
  void finalize(bool accepted) override;

  const Stream& stream() const { return *stream_; }
  const std::optional<StreamItem>& current() const { return current_; }

 private:
  std::unique_ptr<Stream> stream_;
  std::optional<StreamItem> current_;
  bool queried_ = false;
};

/// Runs the decide / feedback / advance loop against an external verifier
/// for at most `max_rounds` rounds.
std::vector<DecisionRecord> drive(SelectiveVerifier& policy, Verifier& verifier,
                                  std::uint64_t max_rounds);

}  // namespace ssv::streams
