#include "ssv/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssv/error.hpp"

namespace ssv {

WeakScore::WeakScore(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ValidationError("w", "weak score must lie in [0,1], got " + std::to_string(value));
  }
}

StrongLabel::StrongLabel(int value) : value_(value) {
  if (value != 0 && value != 1) {
    throw ValidationError("g", "strong label must be 0 or 1");
  }
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Accept: return "accept";
    case Action::Reject: return "reject";
    case Action::StrongVerify: return "strong_verify";
  }
  return "?";
}

std::string_view to_string(Region r) {
  switch (r) {
    case Region::Accept: return "accept";
    case Region::Reject: return "reject";
    case Region::Uncertain: return "uncertain";
  }
  return "?";
}

Action parse_action(std::string_view s) {
  if (s == "accept") return Action::Accept;
  if (s == "reject") return Action::Reject;
  if (s == "strong_verify") return Action::StrongVerify;
  throw ValidationError("action", "unknown action '" + std::string(s) + "'");
}

Region parse_region(std::string_view s) {
  if (s == "accept") return Region::Accept;
  if (s == "reject") return Region::Reject;
  if (s == "uncertain") return Region::Uncertain;
  throw ValidationError("region", "unknown region '" + std::string(s) + "'");
}

void PolicyConfig::validate() const {
  auto open_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!open_unit(alpha)) throw ValidationError("alpha", "must lie in (0,1)");
  if (!open_unit(beta)) throw ValidationError("beta", "must lie in (0,1)");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("eta", "must be positive");
  if (!(q_accept > 0.0 && q_accept <= 1.0)) throw ValidationError("q_accept", "must lie in (0,1]");
  if (!(q_reject > 0.0 && q_reject <= 1.0)) throw ValidationError("q_reject", "must lie in (0,1]");
  if (!(tau_reject_init >= 0.0 && tau_reject_init <= 1.0)) {
    throw ValidationError("tau_reject_init", "must lie in [0,1]");
  }
  if (!(tau_accept_init >= 0.0 && tau_accept_init <= 1.0)) {
    throw ValidationError("tau_accept_init", "must lie in [0,1]");
  }
  if (tau_reject_init > tau_accept_init) {
    throw ValidationError("tau_reject_init", "must not exceed tau_accept_init");
  }
}

Region classify(WeakScore w, const Thresholds& th) {
  if (w.value() > th.tau_accept) return Region::Accept;
  if (w.value() < th.tau_reject) return Region::Reject;
  return Region::Uncertain;
}

bool final_accept(const DecisionRecord& rec) {
  if (rec.action == Action::Accept) return true;
  if (rec.action == Action::Reject) return false;
  if (!rec.g_observed) throw ProtocolError("strong verification round without feedback");
  return rec.g_observed->is_correct();
}

double accept_error_estimate(const DecisionRecord& rec, double alpha) {
  if (rec.action != Action::StrongVerify || !rec.g_observed || rec.g_observed->is_correct()) {
    return 0.0;
  }
  const double x = (rec.w.value() > rec.thresholds_before.tau_accept ? 1.0 : 0.0) - alpha;
  return x / rec.q_t;
}

double reject_error_estimate(const DecisionRecord& rec, double beta) {
  if (rec.action != Action::StrongVerify || !rec.g_observed || !rec.g_observed->is_correct()) {
    return 0.0;
  }
  const double x = (rec.w.value() < rec.thresholds_before.tau_reject ? 1.0 : 0.0) - beta;
  return x / rec.q_t;
}

SelectiveVerifier::SelectiveVerifier(const PolicyConfig& config)
    : config_(config),
      thresholds_{config.tau_reject_init, config.tau_accept_init},
      rng_(derive_seed(config.seed, 0x5ee7)) {
  config_.validate();
}

const DecisionRecord& SelectiveVerifier::decide(WeakScore w) {
  if (open_) {
    throw ProtocolError(current_.action == Action::StrongVerify
                            ? "decide called while strong-verification feedback is pending"
                            : "decide called before the previous round was advanced");
  }
  DecisionRecord rec;
  rec.t = t_;
  rec.w = w;
  rec.region = classify(w, thresholds_);
  rec.thresholds_before = thresholds_;
  rec.thresholds_after = thresholds_;
  switch (rec.region) {
    case Region::Accept: {
      rec.q_t = config_.q_accept;
      rec.explored = rng_.uniform() < rec.q_t;
      rec.action = rec.explored ? Action::StrongVerify : Action::Accept;
      break;
    }
    case Region::Reject: {
      rec.q_t = config_.q_reject;
      rec.explored = rng_.uniform() < rec.q_t;
      rec.action = rec.explored ? Action::StrongVerify : Action::Reject;
      break;
    }
    case Region::Uncertain:
      rec.q_t = 1.0;
      rec.explored = false;
      rec.action = Action::StrongVerify;
      break;
  }
  current_ = rec;
  open_ = true;
  return current_;
}

Thresholds SelectiveVerifier::feedback(StrongLabel g) {
  if (!awaiting_feedback()) throw ProtocolError("feedback without a pending strong verification");
  const double w = current_.w.value();
  const double q = current_.q_t;
  const Thresholds old = thresholds_;

  const double accept_signal =
      g.is_correct() ? 0.0 : ((w > old.tau_accept ? 1.0 : 0.0) - config_.alpha);
  const double tau_accept = std::max(old.tau_reject, old.tau_accept + config_.eta * accept_signal / q);

  const double reject_signal =
      g.is_correct() ? (config_.beta - (w < old.tau_reject ? 1.0 : 0.0)) : 0.0;
  // Projected against the already-updated accept threshold.
  const double tau_reject = std::min(tau_accept, old.tau_reject + config_.eta * reject_signal / q);

  thresholds_ = {tau_reject, tau_accept};
  current_.g_observed = g;
  current_.thresholds_after = thresholds_;
  open_ = false;
  ++t_;
  return thresholds_;
}

void SelectiveVerifier::advance_without_feedback() {
  if (!open_) throw ProtocolError("advance without an open round");
  if (current_.action == Action::StrongVerify) {
    throw ProtocolError("advance while strong-verification feedback is pending");
  }
  open_ = false;
  ++t_;
}

}  // namespace ssv
