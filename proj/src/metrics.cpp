#include "ssv/metrics.hpp"

#include <cmath>

#include "ssv/error.hpp"

namespace ssv {

namespace {
double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

void ErrorLedger::record(const DecisionRecord& rec, StrongLabel g_latent) {
  if (rec.g_observed && *rec.g_observed != g_latent) {
    throw ConsistencyError("observed strong label differs from the latent label at round " +
                           std::to_string(rec.t));
  }
  ++total;
  if (rec.action == Action::StrongVerify) ++sv_count;
  const double w = rec.w.value();
  if (g_latent.is_correct()) {
    ++n1;
    if (rec.action == Action::Reject) ++type2_policy;
    if (w < rec.thresholds_before.tau_reject) ++type2_threshold;
  } else {
    ++n0;
    if (rec.action == Action::Accept) ++type1_policy;
    if (w > rec.thresholds_before.tau_accept) ++type1_threshold;
  }
}

ErrorLedger& ErrorLedger::operator+=(const ErrorLedger& o) {
  n0 += o.n0;
  n1 += o.n1;
  type1_policy += o.type1_policy;
  type2_policy += o.type2_policy;
  type1_threshold += o.type1_threshold;
  type2_threshold += o.type2_threshold;
  sv_count += o.sv_count;
  total += o.total;
  return *this;
}

double err_type1(const ErrorLedger& l) { return ratio(l.type1_policy, l.n0); }
double err_type2(const ErrorLedger& l) { return ratio(l.type2_policy, l.n1); }
double sv_rate(const ErrorLedger& l) { return ratio(l.sv_count, l.total); }
double err_type1_threshold(const ErrorLedger& l) { return ratio(l.type1_threshold, l.n0); }
double err_type2_threshold(const ErrorLedger& l) { return ratio(l.type2_threshold, l.n1); }

void BoundInputs::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta", "must lie in (0,1)");
  if (!(eta > 0.0)) throw ValidationError("eta", "must be positive");
  if (!(q_min > 0.0 && q_min <= 1.0)) throw ValidationError("q_min", "must lie in (0,1]");
}

double delta_bound(const BoundInputs& in) {
  in.validate();
  if (in.n == 0) return 0.0;
  const double n = static_cast<double>(in.n);
  const double log_term = std::log(4.0 / in.delta);
  const double drift = (1.0 + 2.0 * in.eta / in.q_min) / (in.eta * n);
  const double freedman = std::sqrt(2.0 * log_term / (n * in.q_min)) + log_term / (3.0 * n * in.q_min);
  return drift + freedman;
}

}  // namespace ssv
