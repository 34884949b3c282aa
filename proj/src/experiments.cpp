#include "ssv/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "ssv/error.hpp"

namespace ssv::experiments {

void RunSpec::validate() const {
  policy.validate();
  stream.validate();
  if (repetitions < 1) throw ValidationError("repetitions", "must be at least 1");
  if (horizon && *horizon < 1) throw ValidationError("horizon", "must be at least 1");
  if (!horizon && !stream.reactive() && !stream.fixed_length()) {
    throw ValidationError("horizon", "an unbounded stream needs a fixed horizon");
  }
}

PolicyConfig rep_policy(const RunSpec& spec, std::uint32_t rep) {
  PolicyConfig c = spec.policy;
  c.seed = derive_seed(derive_seed(spec.seed_base, rep), 1);
  return c;
}

streams::StreamSpec rep_stream(const RunSpec& spec, std::uint32_t rep) {
  streams::StreamSpec s = spec.stream;
  s.seed = derive_seed(derive_seed(spec.seed_base, rep), 2);
  return s;
}

Trace run_once(const RunSpec& spec, std::uint32_t rep, const RunOptions& opts) {
  spec.validate();
  Trace tr;
  tr.repetition = rep;
  tr.policy = rep_policy(spec, rep);
  tr.stream = rep_stream(spec, rep);

  SelectiveVerifier policy(tr.policy);
  auto stream = streams::make_stream(tr.stream);
  const bool reactive = tr.stream.reactive();
  tr.initial = policy.thresholds();
  const std::uint64_t limit = spec.horizon.value_or(std::numeric_limits<std::uint64_t>::max());
  if (opts.keep_records && spec.horizon && *spec.horizon <= (1u << 24)) {
    tr.records.reserve(*spec.horizon);
    tr.latent.reserve(*spec.horizon);
  }

  std::uint64_t agree = 0;
  while (tr.rounds < limit) {
    auto item = stream->next();
    if (!item) break;
    const DecisionRecord& pending = policy.decide(item->w);
    const bool sv = pending.action == Action::StrongVerify;
    if (sv) {
      policy.feedback(item->g_latent);
    } else {
      policy.advance_without_feedback();
    }
    const DecisionRecord& rec = policy.last_record();
    tr.ledger.record(rec, item->g_latent);
    const bool accepted = final_accept(rec);
    if (reactive) {
      stream->react(accepted, sv);
    } else if (accepted == item->g_latent.is_correct()) {
      ++agree;
    }
    if (opts.keep_records) {
      tr.records.push_back(rec);
      tr.latent.push_back(item->g_latent);
    }
    ++tr.rounds;
  }
  tr.final = policy.thresholds();

  if (reactive) {
    if (stream->exhausted()) tr.outcome = stream->outcome();
  } else if (tr.rounds > 0) {
    streams::TaskOutcome o;
    o.problems_total = tr.rounds;
    o.problems_correct = agree;
    o.strong_calls_per_problem = sv_rate(tr.ledger);
    o.weak_calls_per_problem = 1.0;
    tr.outcome = o;
  }
  return tr;
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned k = 0; k < threads; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<Trace> run(const RunSpec& spec, unsigned threads, const RunOptions& opts) {
  spec.validate();
  std::vector<Trace> out(spec.repetitions);
  parallel_for(spec.repetitions, threads,
               [&](std::size_t r) { out[r] = run_once(spec, static_cast<std::uint32_t>(r), opts); });
  return out;
}

// ---- sweeps ----

void SweepSpec::validate() const {
  if (targets.empty()) throw ValidationError("sweep.targets", "must not be empty");
  for (const auto& t : targets) {
    PolicyConfig c = base.policy;
    c.alpha = t.alpha;
    c.beta = t.beta;
    c.validate();
  }
  base.validate();
}

namespace {

std::size_t row_count(const SweepSpec& spec) {
  return spec.targets.size() + (spec.anchors ? 2 : 0);
}

JobResult run_job(const SweepSpec& spec, std::size_t row, std::uint32_t rep) {
  JobResult j;
  j.row = row;
  j.rep = rep;
  const std::size_t nt = spec.targets.size();
  if (row == nt + 1) {
    const auto o = streams::weak_only_greedy(rep_stream(spec.base, rep), spec.base.horizon);
    j.accuracy = o.accuracy();
    j.strong_per_problem = o.strong_calls_per_problem;
    j.weak_per_problem = o.weak_calls_per_problem;
    return j;
  }
  RunSpec rs = spec.base;
  if (row < nt) {
    rs.policy.alpha = spec.targets[row].alpha;
    rs.policy.beta = spec.targets[row].beta;
  } else {
    rs.policy.q_accept = 1.0;
    rs.policy.q_reject = 1.0;
  }
  const Trace tr = run_once(rs, rep, {.keep_records = false});
  if (!tr.outcome) {
    throw ContractError("sweep run ended before its task stream was exhausted; drop the horizon");
  }
  j.accuracy = tr.outcome->accuracy();
  j.strong_per_problem = tr.outcome->strong_calls_per_problem;
  j.weak_per_problem = tr.outcome->weak_calls_per_problem;
  j.err1 = err_type1(tr.ledger);
  j.err2 = err_type2(tr.ledger);
  return j;
}

}  // namespace

std::vector<JobResult> sweep_jobs(const SweepSpec& spec, const Shard& shard, unsigned threads) {
  spec.validate();
  if (shard.count < 1 || shard.index >= shard.count) {
    throw ValidationError("sweep.shard", "index must lie in [0, count)");
  }
  const std::size_t reps = spec.base.repetitions;
  const std::size_t total = row_count(spec) * reps;
  std::vector<std::size_t> mine;
  for (std::size_t j = shard.index; j < total; j += shard.count) mine.push_back(j);
  std::vector<JobResult> out(mine.size());
  parallel_for(mine.size(), threads, [&](std::size_t k) {
    const std::size_t j = mine[k];
    out[k] = run_job(spec, j / reps, static_cast<std::uint32_t>(j % reps));
  });
  return out;
}

std::vector<ParetoPoint> aggregate(const SweepSpec& spec, std::vector<JobResult> jobs) {
  const std::size_t rows = row_count(spec);
  const std::size_t reps = spec.base.repetitions;
  std::sort(jobs.begin(), jobs.end(), [](const JobResult& x, const JobResult& y) {
    return x.row != y.row ? x.row < y.row : x.rep < y.rep;
  });
  if (jobs.size() != rows * reps) {
    throw ContractError("aggregate expected " + std::to_string(rows * reps) + " jobs, got " +
                        std::to_string(jobs.size()));
  }
  std::vector<ParetoPoint> out;
  out.reserve(rows);
  const std::size_t nt = spec.targets.size();
  for (std::size_t r = 0; r < rows; ++r) {
    ParetoPoint p;
    double sum = 0, sum_sq = 0, strong = 0, weak = 0, e1 = 0, e2 = 0;
    for (std::size_t k = 0; k < reps; ++k) {
      const JobResult& j = jobs[r * reps + k];
      if (j.row != r || j.rep != k) throw ContractError("aggregate found a missing or duplicated job");
      sum += j.accuracy;
      sum_sq += j.accuracy * j.accuracy;
      strong += j.strong_per_problem;
      weak += j.weak_per_problem;
      e1 += j.err1;
      e2 += j.err2;
    }
    const double n = static_cast<double>(reps);
    p.reps = static_cast<std::uint32_t>(reps);
    p.accuracy = sum / n;
    if (reps > 1) {
      const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
      p.accuracy_stderr = std::sqrt(var / n);
    }
    p.strong_per_problem = strong / n;
    p.weak_per_problem = weak / n;
    if (r < nt) {
      p.alpha = spec.targets[r].alpha;
      p.beta = spec.targets[r].beta;
    }
    p.is_oracle = r == nt;
    p.is_weak_only = r == nt + 1;
    if (!p.is_weak_only) {
      p.err1 = e1 / n;
      p.err2 = e2 / n;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<ParetoPoint> sweep(const SweepSpec& spec, unsigned threads) {
  return aggregate(spec, sweep_jobs(spec, {}, threads));
}

// ---- checks ----

namespace {

InequalityReport inequality(std::uint64_t n, std::uint64_t errors, double target,
                            const PolicyConfig& c, double delta) {
  InequalityReport r;
  r.n = n;
  r.error = n == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(n);
  r.target = target;
  r.slack = delta_bound({n, delta, c.eta, c.q_min()});
  r.margin = target + r.slack - r.error;
  r.vacuous = n == 0;
  r.passed = r.vacuous || r.error <= target + r.slack;
  return r;
}

}  // namespace

BoundReport verify_bound(const ErrorLedger& ledger, const PolicyConfig& config, double delta) {
  BoundReport rep;
  rep.delta = delta;
  rep.type1 = inequality(ledger.n0, ledger.type1_policy, config.alpha, config, delta);
  rep.type2 = inequality(ledger.n1, ledger.type2_policy, config.beta, config, delta);
  return rep;
}

BoundReport verify_bound(const Trace& trace, double delta) {
  return verify_bound(trace.ledger, trace.policy, delta);
}

bool ClaimReport::passed() const {
  return std::all_of(claims.begin(), claims.end(), [](const ClaimResult& c) { return c.passed; });
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

std::string at_round(std::uint64_t t) { return "first violation at t=" + std::to_string(t); }

}  // namespace

ClaimReport check_claims(const std::vector<DecisionRecord>& records,
                         const std::vector<StrongLabel>& latent, const PolicyConfig& config,
                         const ClaimOptions& opts) {
  if (latent.size() != records.size()) {
    throw ContractError("check_claims needs one latent label per record");
  }
  ClaimReport rep;
  const double eta = config.eta;
  const double band_lo = -eta / config.q_min();
  const double band_hi = 1.0 + eta / config.q_min();
  const Thresholds init{config.tau_reject_init, config.tau_accept_init};
  const Thresholds fin = records.empty() ? init : records.back().thresholds_after;

  double sum_a = 0.0, sum_r = 0.0;
  double lo = std::min(init.tau_reject, init.tau_accept);
  double hi = std::max(init.tau_reject, init.tau_accept);
  std::optional<std::uint64_t> bad_band, bad_order, bad_locality, bad_region, bad_continuity,
      bad_label, bad_q, bad_update;
  Thresholds prev = init;
  ErrorLedger ledger;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const DecisionRecord& r = records[i];
    const Thresholds& b = r.thresholds_before;
    const Thresholds& a = r.thresholds_after;
    const double w = r.w.value();
    const bool sv = r.action == Action::StrongVerify;

    if (!(b == prev) || r.t != i + 1) bad_continuity = bad_continuity.value_or(r.t);
    prev = a;

    for (double tau : {b.tau_reject, b.tau_accept, a.tau_reject, a.tau_accept}) {
      lo = std::min(lo, tau);
      hi = std::max(hi, tau);
      if (!(tau >= band_lo && tau <= band_hi)) bad_band = bad_band.value_or(r.t);
    }
    if (!(b.tau_reject <= b.tau_accept) || !(a.tau_reject <= a.tau_accept)) {
      bad_order = bad_order.value_or(r.t);
    }
    if (!sv && !(a == b)) bad_locality = bad_locality.value_or(r.t);

    const Region expect = w > b.tau_accept   ? Region::Accept
                          : w < b.tau_reject ? Region::Reject
                                             : Region::Uncertain;
    bool region_ok = r.region == expect;
    if (r.action == Action::Accept) region_ok = region_ok && r.region == Region::Accept;
    if (r.action == Action::Reject) region_ok = region_ok && r.region == Region::Reject;
    if (r.region == Region::Uncertain) region_ok = region_ok && sv && !r.explored;
    if (r.explored) region_ok = region_ok && sv && r.region != Region::Uncertain;
    if (!region_ok) bad_region = bad_region.value_or(r.t);

    const double q_expect = r.region == Region::Accept   ? config.q_accept
                            : r.region == Region::Reject ? config.q_reject
                                                         : 1.0;
    if (r.q_t != q_expect) bad_q = bad_q.value_or(r.t);

    if (sv != r.g_observed.has_value() || (r.g_observed && *r.g_observed != latent[i])) {
      bad_label = bad_label.value_or(r.t);
    }

    if (sv && r.g_observed) {
      const int g = r.g_observed->value();
      const double x_a = g == 0 ? (w > b.tau_accept ? 1.0 : 0.0) - config.alpha : 0.0;
      const double tau_a = std::max(b.tau_reject, b.tau_accept + eta * x_a / r.q_t);
      const double x_r = g == 1 ? config.beta - (w < b.tau_reject ? 1.0 : 0.0) : 0.0;
      const double tau_r = std::min(tau_a, b.tau_reject + eta * x_r / r.q_t);
      auto close = [](double u, double v) { return std::abs(u - v) <= 1e-12 * (1.0 + std::abs(v)); };
      if (!close(a.tau_accept, tau_a) || !close(a.tau_reject, tau_r)) {
        bad_update = bad_update.value_or(r.t);
      }
    }

    sum_a += accept_error_estimate(r, config.alpha);
    sum_r += reject_error_estimate(r, config.beta);
    if (!r.g_observed || *r.g_observed == latent[i]) ledger.record(r, latent[i]);
  }

  const double rhs_a = (fin.tau_accept - init.tau_accept) / eta;
  const double rhs_r = (init.tau_reject - fin.tau_reject) / eta;
  double tol = opts.telescoping_tolerance;
  if (opts.accumulation_allowance) {
    const double scale = 1.0 + std::max(std::abs(lo), std::abs(hi));
    tol += 8.0 * static_cast<double>(records.size()) * std::numeric_limits<double>::epsilon() *
           scale / eta;
  }
  rep.telescoping_accept_gap = rhs_a - sum_a;
  rep.telescoping_reject_gap = rhs_r - sum_r;
  rep.tau_min = lo;
  rep.tau_max = hi;

  auto add = [&](std::string name, bool ok, std::string detail) {
    rep.claims.push_back({std::move(name), ok, std::move(detail)});
  };
  auto first = [](const std::optional<std::uint64_t>& v, const std::string& ok) {
    return v ? at_round(*v) : ok;
  };

  add("telescoping_accept", sum_a <= rhs_a + tol,
      "sum=" + fmt(sum_a) + " bound=" + fmt(rhs_a) + " tol=" + fmt(tol));
  add("telescoping_reject", sum_r <= rhs_r + tol,
      "sum=" + fmt(sum_r) + " bound=" + fmt(rhs_r) + " tol=" + fmt(tol));
  add("threshold_band", !bad_band,
      first(bad_band, "range [" + fmt(lo) + ", " + fmt(hi) + "] within [" + fmt(band_lo) + ", " +
                          fmt(band_hi) + "]"));
  add("ordering", !bad_order, first(bad_order, "tau_R <= tau_A throughout"));
  add("update_locality", !bad_locality, first(bad_locality, "thresholds move only on SV rounds"));
  add("update_rule", !bad_update, first(bad_update, "every SV update reproduced"));
  add("action_region", !bad_region, first(bad_region, "actions consistent with regions"));
  add("query_probability", !bad_q, first(bad_q, "q_t matches the region"));
  add("labels", !bad_label, first(bad_label, "observed labels present iff SV and match latent"));
  add("continuity", !bad_continuity,
      first(bad_continuity, "records chain from the initial thresholds"));
  const bool dom = ledger.type1_policy <= ledger.type1_threshold &&
                   ledger.type2_policy <= ledger.type2_threshold;
  add("domination", dom,
      "type1 " + std::to_string(ledger.type1_policy) + "<=" +
          std::to_string(ledger.type1_threshold) + ", type2 " +
          std::to_string(ledger.type2_policy) + "<=" + std::to_string(ledger.type2_threshold));
  return rep;
}

ClaimReport check_claims(const Trace& trace, const ClaimOptions& opts) {
  return check_claims(trace.records, trace.latent, trace.policy, opts);
}

// ---- diagnostics ----

Diagnostics diagnose(const std::vector<streams::StreamItem>& items, std::size_t nbins) {
  if (nbins < 1) throw ValidationError("bins", "must be at least 1");
  Diagnostics d;
  d.count = items.size();
  d.bins.resize(nbins);
  for (std::size_t i = 0; i < nbins; ++i) {
    d.bins[i].lower = static_cast<double>(i) / nbins;
    d.bins[i].upper = static_cast<double>(i + 1) / nbins;
  }
  if (items.empty()) return d;

  std::vector<double> sharp;
  sharp.reserve(items.size());
  double s1 = 0, s2 = 0, sum_c = 0, sum_i = 0, brier = 0;
  std::uint64_t n_c = 0;
  std::vector<double> bin_w(nbins, 0.0), bin_g(nbins, 0.0);
  for (const auto& it : items) {
    const double w = it.w.value();
    const int g = it.g_latent.value();
    const double s = std::abs(w - 0.5);
    sharp.push_back(s);
    s1 += s;
    s2 += s * s;
    if (g == 1) {
      sum_c += w;
      ++n_c;
    } else {
      sum_i += w;
    }
    brier += (w - g) * (w - g);
    const std::size_t b = std::min(nbins - 1, static_cast<std::size_t>(w * nbins));
    ++d.bins[b].count;
    bin_w[b] += w;
    bin_g[b] += g;
  }
  const double n = static_cast<double>(items.size());
  d.sharpness_mean = s1 / n;
  d.sharpness_std = std::sqrt(std::max(0.0, s2 / n - d.sharpness_mean * d.sharpness_mean));
  const std::size_t mid = sharp.size() / 2;
  std::nth_element(sharp.begin(), sharp.begin() + mid, sharp.end());
  if (sharp.size() % 2 == 1) {
    d.sharpness_median = sharp[mid];
  } else {
    const double upper = sharp[mid];
    const double lower = *std::max_element(sharp.begin(), sharp.begin() + mid);
    d.sharpness_median = 0.5 * (lower + upper);
  }
  const std::uint64_t n_i = items.size() - n_c;
  d.mean_correct = n_c ? sum_c / n_c : 0.0;
  d.mean_incorrect = n_i ? sum_i / n_i : 0.0;
  d.separation = d.mean_correct - d.mean_incorrect;
  d.base_accuracy = n_c / n;
  d.brier = brier / n;
  for (std::size_t b = 0; b < nbins; ++b) {
    if (d.bins[b].count == 0) continue;
    d.bins[b].mean_w = bin_w[b] / d.bins[b].count;
    d.bins[b].frac_correct = bin_g[b] / d.bins[b].count;
  }
  return d;
}

Diagnostics diagnose(const streams::StreamSpec& spec, std::uint64_t samples, std::size_t bins) {
  return diagnose(streams::sample_items(spec, samples), bins);
}

}  // namespace ssv::experiments
