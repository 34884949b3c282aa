#include "ssv/streams.hpp"

#include <algorithm>
#include <cmath>

#include "ssv/error.hpp"

namespace ssv::streams {

double Link::operator()(double w) const {
  switch (kind) {
    case Kind::Identity: return w;
    case Kind::Power: return std::pow(w, exponent);
    case Kind::Affine: return intercept + slope * w;
  }
  return w;
}

void Link::validate() const {
  switch (kind) {
    case Kind::Identity: return;
    case Kind::Power:
      if (!(exponent > 0.0 && std::isfinite(exponent))) {
        throw ValidationError("link.exponent", "must be positive");
      }
      return;
    case Kind::Affine:
      if (!(slope >= 0.0)) throw ValidationError("link.slope", "must be nonnegative");
      if (!(intercept >= 0.0 && intercept <= 1.0)) {
        throw ValidationError("link.intercept", "must lie in [0,1]");
      }
      if (!(intercept + slope <= 1.0 + 1e-12)) {
        throw ValidationError("link.slope", "intercept + slope must not exceed 1");
      }
      return;
  }
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void check_probability(double p, const std::string& field) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(field, "must lie in [0,1]");
}

}  // namespace

void StreamSpec::validate() const {
  std::visit(Overloaded{
                 [](const Calibrated& c) { ssv::validate(c.score, "stream.score"); },
                 [](const Miscalibrated& m) {
                   ssv::validate(m.score, "stream.score");
                   m.link.validate();
                 },
                 [](const Drift& d) {
                   if (d.segments.empty()) {
                     throw ValidationError("stream.segments", "must not be empty");
                   }
                   for (const auto& s : d.segments) {
                     ssv::validate(s.score, "stream.segments.score");
                     if (s.length < 1) {
                       throw ValidationError("stream.segments.length", "must be at least 1");
                     }
                   }
                 },
                 [](const BestOfN& b) {
                   if (b.problems < 1) throw ValidationError("stream.problems", "must be at least 1");
                   if (b.budget < 1) throw ValidationError("stream.budget", "must be at least 1");
                   ssv::validate(b.difficulty, "stream.difficulty");
                   ssv::validate(b.correct_scores, "stream.correct");
                   ssv::validate(b.incorrect_scores, "stream.incorrect");
                 },
                 [](const Stepwise& s) {
                   if (s.episodes < 1) throw ValidationError("stream.episodes", "must be at least 1");
                   if (s.steps < 1) throw ValidationError("stream.steps", "must be at least 1");
                   if (s.retry_budget < 1) {
                     throw ValidationError("stream.retry_budget", "must be at least 1");
                   }
                   check_probability(s.step_correct, "stream.step_correct");
                   ssv::validate(s.correct_scores, "stream.correct");
                   ssv::validate(s.incorrect_scores, "stream.incorrect");
                 },
             },
             variant);
}

bool StreamSpec::reactive() const {
  return std::holds_alternative<BestOfN>(variant) || std::holds_alternative<Stepwise>(variant);
}

std::optional<std::uint64_t> StreamSpec::fixed_length() const {
  if (const auto* d = std::get_if<Drift>(&variant)) {
    std::uint64_t n = 0;
    for (const auto& s : d->segments) n += s.length;
    return n;
  }
  return std::nullopt;
}

std::string_view variant_name(const StreamVariant& v) {
  return std::visit(Overloaded{
                        [](const Calibrated&) { return std::string_view("calibrated"); },
                        [](const Miscalibrated&) { return std::string_view("miscalibrated"); },
                        [](const Drift&) { return std::string_view("drift"); },
                        [](const BestOfN&) { return std::string_view("best_of_n"); },
                        [](const Stepwise&) { return std::string_view("stepwise"); },
                    },
                    v);
}

namespace {

// ---- i.i.d. and scheduled streams ----

class IidStream : public Stream {
 public:
  IidStream(ScoreDistribution score, Link link, std::uint64_t seed)
      : score_(std::move(score)), link_(link), rng_(seed) {}

  std::optional<StreamItem> next() override {
    StreamItem item;
    const double w = sample(score_, rng_);
    item.w = WeakScore(w);
    item.g_latent = StrongLabel(rng_.bernoulli(link_(w)) ? 1 : 0);
    return item;
  }
  void react(bool, bool) override { ++ignored_reacts_; }
  bool exhausted() const override { return false; }
  TaskOutcome outcome() const override {
    throw ContractError("outcome is defined only for task streams");
  }

 private:
  ScoreDistribution score_;
  Link link_;
  Rng rng_;
};

class DriftStream : public Stream {
 public:
  DriftStream(Drift d, std::uint64_t seed) : drift_(std::move(d)), rng_(seed) {
    for (const auto& s : drift_.segments) total_ += s.length;
  }

  std::optional<StreamItem> next() override {
    while (segment_ < drift_.segments.size() && used_ >= drift_.segments[segment_].length) {
      ++segment_;
      used_ = 0;
    }
    if (segment_ >= drift_.segments.size()) return std::nullopt;
    ++used_;
    ++emitted_;
    StreamItem item;
    const double w = sample(drift_.segments[segment_].score, rng_);
    item.w = WeakScore(w);
    item.g_latent = StrongLabel(rng_.bernoulli(w) ? 1 : 0);
    return item;
  }
  void react(bool, bool) override { ++ignored_reacts_; }
  bool exhausted() const override { return emitted_ >= total_; }
  TaskOutcome outcome() const override {
    throw ContractError("outcome is defined only for task streams");
  }

 private:
  Drift drift_;
  Rng rng_;
  std::size_t segment_ = 0;
  std::uint64_t used_ = 0;
  std::uint64_t emitted_ = 0;
  std::uint64_t total_ = 0;
};

// ---- task streams ----

struct Candidate {
  bool correct = false;
  double w = 0.0;
};

Candidate draw_candidate(double p, const ScoreDistribution& f1, const ScoreDistribution& f0,
                         Rng& rng) {
  Candidate c;
  c.correct = rng.bernoulli(p);
  c.w = sample(c.correct ? f1 : f0, rng);
  return c;
}

Rng problem_rng(std::uint64_t seed, std::uint64_t problem) {
  return Rng(derive_seed(seed, problem));
}

Rng step_rng(std::uint64_t seed, std::uint64_t episode, std::uint64_t step) {
  return Rng(derive_seed(derive_seed(seed, episode), step));
}

class TaskStream : public Stream {
 public:
  bool exhausted() const override { return !pending_ && unit_ >= units_; }

  TaskOutcome outcome() const override {
    if (!exhausted()) throw ContractError("outcome requested before the stream is exhausted");
    TaskOutcome o;
    o.problems_total = units_;
    o.problems_correct = correct_;
    o.strong_calls_per_problem = static_cast<double>(strong_calls_) / static_cast<double>(units_);
    o.weak_calls_per_problem = static_cast<double>(weak_calls_) / static_cast<double>(units_);
    return o;
  }

 protected:
  explicit TaskStream(std::uint64_t units) : units_(units) {}

  void require_no_pending() const {
    if (pending_) throw ProtocolError("react must follow every item of a task stream");
  }
  void require_pending() const {
    if (!pending_) throw ProtocolError("react called without an outstanding item");
  }

  std::uint64_t units_;
  std::uint64_t unit_ = 0;
  std::uint64_t correct_ = 0;
  std::uint64_t weak_calls_ = 0;
  std::uint64_t strong_calls_ = 0;
  bool pending_ = false;
  Candidate current_;
};

class BestOfNStream : public TaskStream {
 public:
  BestOfNStream(BestOfN spec, std::uint64_t seed)
      : TaskStream(spec.problems), spec_(std::move(spec)), seed_(seed), rng_(0) {}

  std::optional<StreamItem> next() override {
    require_no_pending();
    if (unit_ >= units_) return std::nullopt;
    if (generations_ == 0) {
      rng_ = problem_rng(seed_, unit_);
      p_ = sample(spec_.difficulty, rng_);
    }
    current_ = draw_candidate(p_, spec_.correct_scores, spec_.incorrect_scores, rng_);
    ++generations_;
    ++weak_calls_;
    pending_ = true;
    StreamItem item;
    item.w = WeakScore(current_.w);
    item.g_latent = StrongLabel(current_.correct ? 1 : 0);
    item.problem_id = unit_;
    item.step_index = generations_ - 1;
    return item;
  }

  void react(bool accepted, bool strong_verified) override {
    require_pending();
    pending_ = false;
    if (strong_verified) ++strong_calls_;
    if (accepted) {
      finish(current_.correct);
    } else if (generations_ >= spec_.budget) {
      finish(false);
    }
  }

 private:
  void finish(bool correct) {
    if (correct) ++correct_;
    ++unit_;
    generations_ = 0;
  }

  BestOfN spec_;
  std::uint64_t seed_;
  Rng rng_;
  double p_ = 0.0;
  std::uint32_t generations_ = 0;
};

class StepwiseStream : public TaskStream {
 public:
  StepwiseStream(Stepwise spec, std::uint64_t seed)
      : TaskStream(spec.episodes), spec_(std::move(spec)), seed_(seed), rng_(0) {}

  std::optional<StreamItem> next() override {
    require_no_pending();
    if (unit_ >= units_) return std::nullopt;
    if (attempts_ == 0) rng_ = step_rng(seed_, unit_, step_);
    current_ = draw_candidate(spec_.step_correct, spec_.correct_scores, spec_.incorrect_scores,
                              rng_);
    ++attempts_;
    ++weak_calls_;
    pending_ = true;
    StreamItem item;
    item.w = WeakScore(current_.w);
    item.g_latent = StrongLabel(current_.correct ? 1 : 0);
    item.problem_id = unit_;
    item.step_index = step_;
    return item;
  }

  void react(bool accepted, bool strong_verified) override {
    require_pending();
    pending_ = false;
    if (strong_verified) ++strong_calls_;
    if (accepted) {
      if (!current_.correct) failed_ = true;
      attempts_ = 0;
      if (++step_ == spec_.steps) finish(!failed_);
    } else if (attempts_ >= spec_.retry_budget) {
      finish(false);
    }
  }

 private:
  void finish(bool correct) {
    if (correct) ++correct_;
    ++unit_;
    step_ = 0;
    attempts_ = 0;
    failed_ = false;
  }

  Stepwise spec_;
  std::uint64_t seed_;
  Rng rng_;
  std::uint32_t step_ = 0;
  std::uint32_t attempts_ = 0;
  bool failed_ = false;
};

}  // namespace

std::unique_ptr<Stream> make_stream(const StreamSpec& spec) {
  spec.validate();
  return std::visit(
      Overloaded{
          [&](const Calibrated& c) -> std::unique_ptr<Stream> {
            return std::make_unique<IidStream>(c.score, Link{}, spec.seed);
          },
          [&](const Miscalibrated& m) -> std::unique_ptr<Stream> {
            return std::make_unique<IidStream>(m.score, m.link, spec.seed);
          },
          [&](const Drift& d) -> std::unique_ptr<Stream> {
            return std::make_unique<DriftStream>(d, spec.seed);
          },
          [&](const BestOfN& b) -> std::unique_ptr<Stream> {
            return std::make_unique<BestOfNStream>(b, spec.seed);
          },
          [&](const Stepwise& s) -> std::unique_ptr<Stream> {
            return std::make_unique<StepwiseStream>(s, spec.seed);
          },
      },
      spec.variant);
}

TaskOutcome weak_only_greedy(const StreamSpec& spec, std::optional<std::uint64_t> horizon) {
  spec.validate();
  TaskOutcome o;
  if (const auto* b = std::get_if<BestOfN>(&spec.variant)) {
    for (std::uint64_t i = 0; i < b->problems; ++i) {
      Rng rng = problem_rng(spec.seed, i);
      const double p = sample(b->difficulty, rng);
      Candidate best = draw_candidate(p, b->correct_scores, b->incorrect_scores, rng);
      for (std::uint32_t k = 1; k < b->budget; ++k) {
        Candidate c = draw_candidate(p, b->correct_scores, b->incorrect_scores, rng);
        if (c.w > best.w) best = c;
      }
      if (best.correct) ++o.problems_correct;
    }
    o.problems_total = b->problems;
    o.weak_calls_per_problem = b->budget;
    return o;
  }
  if (const auto* s = std::get_if<Stepwise>(&spec.variant)) {
    for (std::uint64_t e = 0; e < s->episodes; ++e) {
      bool ok = true;
      for (std::uint32_t j = 0; j < s->steps; ++j) {
        Rng rng = step_rng(spec.seed, e, j);
        Candidate best =
            draw_candidate(s->step_correct, s->correct_scores, s->incorrect_scores, rng);
        for (std::uint32_t k = 1; k < s->retry_budget; ++k) {
          Candidate c =
              draw_candidate(s->step_correct, s->correct_scores, s->incorrect_scores, rng);
          if (c.w > best.w) best = c;
        }
        ok = ok && best.correct;
      }
      if (ok) ++o.problems_correct;
    }
    o.problems_total = s->episodes;
    o.weak_calls_per_problem = static_cast<double>(s->steps) * s->retry_budget;
    return o;
  }
  std::uint64_t n = horizon ? *horizon : spec.fixed_length().value_or(0);
  if (n == 0) throw ContractError("weak_only_greedy on an unbounded stream needs a horizon");
  auto stream = make_stream(spec);
  std::uint64_t seen = 0;
  while (seen < n) {
    auto item = stream->next();
    if (!item) break;
    ++seen;
    const bool accept = item->w.value() >= 0.5;
    if (accept == item->g_latent.is_correct()) ++o.problems_correct;
  }
  o.problems_total = seen;
  o.weak_calls_per_problem = seen ? 1.0 : 0.0;
  return o;
}

std::vector<StreamItem> sample_items(const StreamSpec& spec, std::uint64_t count) {
  spec.validate();
  std::vector<StreamItem> out;
  out.reserve(count);
  auto push = [&](const Candidate& c, std::uint64_t id) {
    StreamItem item;
    item.w = WeakScore(c.w);
    item.g_latent = StrongLabel(c.correct ? 1 : 0);
    item.problem_id = id;
    out.push_back(item);
  };
  if (const auto* b = std::get_if<BestOfN>(&spec.variant)) {
    Rng rng(spec.seed);
    for (std::uint64_t i = 0; i < count; ++i) {
      const double p = sample(b->difficulty, rng);
      push(draw_candidate(p, b->correct_scores, b->incorrect_scores, rng), i);
    }
    return out;
  }
  if (const auto* s = std::get_if<Stepwise>(&spec.variant)) {
    Rng rng(spec.seed);
    for (std::uint64_t i = 0; i < count; ++i) {
      push(draw_candidate(s->step_correct, s->correct_scores, s->incorrect_scores, rng), i);
    }
    return out;
  }
  auto stream = make_stream(spec);
  while (out.size() < count) {
    auto item = stream->next();
    if (!item) break;
    out.push_back(*item);
  }
  return out;
}

std::string_view to_string(Level l) {
  switch (l) {
    case Level::Easy: return "easy";
    case Level::Medium: return "medium";
    case Level::Hard: return "hard";
  }
  return "?";
}

Level parse_level(std::string_view s) {
  if (s == "easy") return Level::Easy;
  if (s == "medium") return Level::Medium;
  if (s == "hard") return Level::Hard;
  throw ValidationError("level", "expected easy, medium or hard, got '" + std::string(s) + "'");
}

namespace {

struct LevelParams {
  double base_accuracy;
  double mean_correct;
  double mean_incorrect;
  // Shared concentration a + b of both conditional Beta laws, chosen so the
  // mean |w - 0.5| of the marginal matches the level's sharpness.
  double concentration;
};

LevelParams level_params(Level l) {
  switch (l) {
    case Level::Easy: return {0.922, 0.90, 0.33, 0.30609};
    case Level::Medium: return {0.827, 0.86, 0.32, 0.36787};
    case Level::Hard: return {0.479, 0.64, 0.26, 0.88241};
  }
  return {0.5, 0.5, 0.5, 2.0};
}

}  // namespace

StreamSpec preset_math_like(Level level, std::uint64_t problems) {
  const LevelParams p = level_params(level);
  BestOfN b;
  b.problems = problems;
  b.budget = 4;
  b.difficulty = dist::PointMass{p.base_accuracy};
  b.correct_scores = dist::Beta::from_mean(p.mean_correct, p.concentration);
  b.incorrect_scores = dist::Beta::from_mean(p.mean_incorrect, p.concentration);
  return {b, 0};
}

StreamSpec preset_math_like_calibrated(Level level) {
  const LevelParams p = level_params(level);
  dist::BetaMixture mix{p.base_accuracy, dist::Beta::from_mean(p.mean_correct, p.concentration),
                        dist::Beta::from_mean(p.mean_incorrect, p.concentration)};
  return {Calibrated{mix}, 0};
}

StreamSpec preset_ambiguous(std::uint64_t problems) {
  BestOfN b;
  b.problems = problems;
  b.budget = 4;
  b.difficulty = dist::PointMass{level_params(Level::Easy).base_accuracy};
  b.correct_scores = dist::Beta{8.0, 8.0};
  b.incorrect_scores = dist::Beta{8.0, 8.0};
  return {b, 0};
}

StreamSpec preset(std::string_view name) {
  for (Level l : {Level::Easy, Level::Medium, Level::Hard}) {
    const std::string base = "math_" + std::string(to_string(l));
    if (name == base) return preset_math_like(l);
    if (name == base + "_calibrated") return preset_math_like_calibrated(l);
  }
  if (name == "ambiguous") return preset_ambiguous();
  if (name == "uniform") return {Calibrated{dist::Uniform{}}, 0};
  if (name == "drift") {
    Drift d;
    d.segments.push_back({dist::Beta::from_mean(0.2, 4.0), 50000});
    d.segments.push_back({dist::Beta::from_mean(0.8, 4.0), 50000});
    return {d, 0};
  }
  throw ValidationError("stream.preset", "unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  return {"math_easy",   "math_medium",   "math_hard",   "math_easy_calibrated",
          "math_medium_calibrated", "math_hard_calibrated", "ambiguous", "uniform", "drift"};
}

std::optional<WeakScore> StreamVerifier::weak_score() {
  current_ = stream_->next();
  queried_ = false;
  if (!current_) return std::nullopt;
  return current_->w;
}

StrongLabel StreamVerifier::strong_query() {
  if (!current_) throw ProtocolError("strong query without a current item");
  queried_ = true;
  return current_->g_latent;
}

void StreamVerifier::finalize(bool accepted) {
  if (!current_) throw ProtocolError("finalize without a current item");
  if (dynamic_cast<const TaskStream*>(stream_.get())) stream_->react(accepted, queried_);
}

std::vector<DecisionRecord> drive(SelectiveVerifier& policy, Verifier& verifier,
                                  std::uint64_t max_rounds) {
  std::vector<DecisionRecord> out;
  for (std::uint64_t r = 0; r < max_rounds; ++r) {
    auto w = verifier.weak_score();
    if (!w) break;
    const DecisionRecord& rec = policy.decide(*w);
    if (rec.action == Action::StrongVerify) {
      const StrongLabel g = verifier.strong_query();
      policy.feedback(g);
      verifier.finalize(g.is_correct());
    } else {
      const bool accepted = rec.action == Action::Accept;
      policy.advance_without_feedback();
      verifier.finalize(accepted);
    }
    out.push_back(policy.last_record());
  }
  return out;
}

}  // namespace ssv::streams
