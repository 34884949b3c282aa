// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ssv/cli.hpp"
#include "ssv/experiments.hpp"
#include "ssv/metrics.hpp"
#include "ssv/policy.hpp"
#include "ssv/population.hpp"
#include "ssv/random.hpp"
#include "ssv/serialization.hpp"
#include "ssv/streams.hpp"

namespace fs = std::filesystem;
using namespace ssv;
using experiments::RunSpec;
using streams::StreamSpec;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(Outcome& o, bool ok, const std::string& what) {
  if (!ok) o.passed = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += (ok ? "" : "!") + what;
}

PolicyConfig policy(double alpha, double beta, double eta, double q) {
  PolicyConfig c;
  c.alpha = alpha;
  c.beta = beta;
  c.eta = eta;
  c.q_accept = q;
  c.q_reject = q;
  return c;
}

// ---- 1: finite-sample error control ----

Outcome error_control() {
  Outcome o;
  std::vector<std::pair<double, double>> targets{{0.15, 0.15}};
  for (double a : {0.05, 0.10, 0.20})
    for (double b : {0.05, 0.10, 0.20}) targets.emplace_back(a, b);
  for (auto [alpha, beta] : targets) {
    RunSpec spec;
    spec.policy = policy(alpha, beta, 0.05, 0.1);
    spec.stream = streams::preset_math_like_calibrated(streams::Level::Easy);
    spec.horizon = 50000;
    spec.repetitions = 100;
    spec.seed_base = 1000;
    const auto traces = experiments::run(spec, 0, {.keep_records = false});
    int ok = 0;
    for (const auto& t : traces) ok += experiments::verify_bound(t, 0.05).passed() ? 1 : 0;
    note(o, ok >= 90, fmt("(%.2f,%.2f) %d/100", alpha, beta, ok));
  }
  return o;
}

// ---- 2: running errors settle near the targets ----

Outcome convergence() {
  Outcome o;
  const double target = 0.15;
  const std::vector<std::pair<std::string, StreamSpec>> cases{
      {"uniform", streams::preset("uniform")},
      {"easy", streams::preset("math_easy_calibrated")},
      {"medium", streams::preset("math_medium_calibrated")},
      {"hard", streams::preset("math_hard_calibrated")},
      {"drift", streams::preset("drift")},
  };
  for (const auto& [name, stream] : cases) {
    RunSpec spec;
    spec.policy = policy(target, target, 0.05, 0.1);
    spec.stream = stream;
    spec.horizon = 100000;
    spec.seed_base = 7;
    const auto t = experiments::run_once(spec, 0, {.keep_records = false});
    const double e1 = err_type1(t.ledger);
    const double e2 = err_type2(t.ledger);
    const bool ok = t.rounds == 100000 && std::abs(e1 - target) <= 0.03 &&
                    std::abs(e2 - target) <= 0.03;
    note(o, ok, fmt("%s %.4f/%.4f (threshold %.4f/%.4f)", name.c_str(), e1, e2,
                    err_type1_threshold(t.ledger), err_type2_threshold(t.ledger)));
  }
  return o;
}

// ---- 3: exact trace claims over a fuzz of configurations ----

ScoreDistribution random_score(Rng& rng) {
  switch (static_cast<int>(rng.uniform() * 5)) {
    case 0: return dist::Uniform{};
    case 1: return dist::PointMass{rng.uniform()};
    case 2: return dist::Beta{0.1 + 5 * rng.uniform(), 0.1 + 5 * rng.uniform()};
    case 3:
      return dist::BetaMixture{rng.uniform(), {0.2 + 4 * rng.uniform(), 0.2 + 4 * rng.uniform()},
                               {0.2 + 4 * rng.uniform(), 0.2 + 4 * rng.uniform()}};
    default: {
      dist::Grid g;
      const int k = 1 + static_cast<int>(rng.uniform() * 6);
      double total = 0.0;
      for (int i = 0; i < k; ++i) {
        g.atoms.push_back(rng.uniform());
        g.weights.push_back(0.05 + rng.uniform());
        total += g.weights.back();
      }
      for (double& w : g.weights) w /= total;
      return g;
    }
  }
}

StreamSpec random_stream(Rng& rng) {
  switch (static_cast<int>(rng.uniform() * 5)) {
    case 0: return {streams::Calibrated{random_score(rng)}, 0};
    case 1:
      return {streams::Miscalibrated{random_score(rng), streams::Link::power(0.3 + 3 * rng.uniform())},
              0};
    case 2: {
      streams::Drift d;
      const int k = 1 + static_cast<int>(rng.uniform() * 3);
      for (int i = 0; i < k; ++i)
        d.segments.push_back({random_score(rng), 1 + static_cast<std::uint64_t>(rng.uniform() * 600)});
      return {d, 0};
    }
    case 3: {
      streams::BestOfN b;
      b.problems = 1 + static_cast<std::uint64_t>(rng.uniform() * 300);
      b.budget = 1 + static_cast<std::uint32_t>(rng.uniform() * 6);
      b.difficulty = dist::Beta{0.5 + 3 * rng.uniform(), 0.5 + 3 * rng.uniform()};
      b.correct_scores = random_score(rng);
      b.incorrect_scores = random_score(rng);
      return {b, 0};
    }
    default: {
      streams::Stepwise s;
      s.episodes = 1 + static_cast<std::uint64_t>(rng.uniform() * 60);
      s.steps = 1 + static_cast<std::uint32_t>(rng.uniform() * 8);
      s.step_correct = rng.uniform();
      s.retry_budget = 1 + static_cast<std::uint32_t>(rng.uniform() * 4);
      s.correct_scores = random_score(rng);
      s.incorrect_scores = random_score(rng);
      return {s, 0};
    }
  }
}

PolicyConfig random_policy(Rng& rng) {
  PolicyConfig c;
  c.alpha = 0.01 + 0.98 * rng.uniform();
  c.beta = 0.01 + 0.98 * rng.uniform();
  c.eta = std::exp(std::log(1e-3) + rng.uniform() * (std::log(1.0) - std::log(1e-3)));
  c.q_accept = 0.01 + 0.99 * rng.uniform();
  c.q_reject = 0.01 + 0.99 * rng.uniform();
  double lo = rng.uniform(), hi = rng.uniform();
  if (lo > hi) std::swap(lo, hi);
  c.tau_reject_init = lo;
  c.tau_accept_init = hi;
  return c;
}

Outcome exact_claims() {
  Outcome o;
  Rng rng(derive_seed(20241015, 3));
  const int cases = 10000;
  int failures = 0;
  double worst_gap = INFINITY;
  double tau_min = INFINITY, tau_max = -INFINITY;
  int band_violations = 0, domination_violations = 0;
  std::string first_failure;
  for (int i = 0; i < cases; ++i) {
    RunSpec spec;
    spec.policy = random_policy(rng);
    spec.stream = random_stream(rng);
    spec.horizon = 1 + static_cast<std::uint64_t>(rng.uniform() * 1000);
    spec.seed_base = derive_seed(99, static_cast<std::uint64_t>(i));
    const auto trace = experiments::run_once(spec, 0);
    const auto rep = experiments::check_claims(trace);  // strict 1e-9, no allowance
    worst_gap = std::min({worst_gap, rep.telescoping_accept_gap, rep.telescoping_reject_gap});
    tau_min = std::min(tau_min, rep.tau_min + spec.policy.eta / spec.policy.q_min());
    tau_max = std::max(tau_max, rep.tau_max - 1.0 - spec.policy.eta / spec.policy.q_min());
    for (const auto& c : rep.claims) {
      if (c.passed) continue;
      if (c.name == "threshold_band") ++band_violations;
      if (c.name == "domination") ++domination_violations;
      if (first_failure.empty()) first_failure = fmt("case %d %s", i, c.name.c_str());
    }
    if (!rep.passed()) ++failures;
  }
  note(o, failures == 0, fmt("%d/%d traces fail", failures, cases));
  note(o, worst_gap >= -1e-9, fmt("min telescoping gap %.3g", worst_gap));
  note(o, band_violations == 0, fmt("band violations %d (min lower margin %.3g, max upper excess %.3g)",
                                    band_violations, tau_min, tau_max));
  note(o, domination_violations == 0, fmt("domination violations %d", domination_violations));
  if (!first_failure.empty()) note(o, false, "first " + first_failure);
  return o;
}

// ---- 4: importance-weighted signals are unbiased ----

Outcome unbiased_signals() {
  Outcome o;
  Rng rng(derive_seed(4242, 4));
  const int draws = 1000000;
  int bad = 0;
  double worst_z = 0.0;
  for (int c = 0; c < 20; ++c) {
    PolicyConfig cfg;
    cfg.alpha = 0.02 + 0.5 * rng.uniform();
    cfg.beta = 0.02 + 0.5 * rng.uniform();
    cfg.eta = 1e-12;  // keeps the thresholds fixed to ~1e-6 over all draws
    cfg.q_accept = 0.05 + 0.9 * rng.uniform();
    cfg.q_reject = 0.05 + 0.9 * rng.uniform();
    cfg.tau_reject_init = 0.1 + 0.3 * rng.uniform();
    cfg.tau_accept_init = 0.6 + 0.3 * rng.uniform();
    cfg.seed = derive_seed(5, static_cast<std::uint64_t>(c));
    // Cycle through the three regions; stay clear of the thresholds.
    double w;
    switch (c % 3) {
      case 0: w = cfg.tau_accept_init + 0.01 + (0.99 - cfg.tau_accept_init) * rng.uniform(); break;
      case 1: w = (cfg.tau_reject_init - 0.01) * rng.uniform(); break;
      default: w = cfg.tau_reject_init + 0.01 + (cfg.tau_accept_init - cfg.tau_reject_init - 0.02) * rng.uniform();
    }
    const int g = rng.uniform() < 0.5 ? 0 : 1;
    const double in_accept = w > cfg.tau_accept_init ? 1.0 : 0.0;
    const double in_reject = w < cfg.tau_reject_init ? 1.0 : 0.0;
    const double q = in_accept ? cfg.q_accept : in_reject ? cfg.q_reject : 1.0;
    const double e_acc = (g == 0) * (in_accept - cfg.alpha);
    const double e_rej = (g == 1) * (cfg.beta - in_reject);

    SelectiveVerifier pol(cfg);
    long double s_acc = 0, ss_acc = 0, s_rej = 0, ss_rej = 0;
    bool region_stable = true;
    for (int i = 0; i < draws; ++i) {
      const auto& rec = pol.decide(WeakScore(w));
      const bool observed = rec.action == Action::StrongVerify;
      if (std::abs(rec.q_t - q) > 0) region_stable = false;
      const double o_over_q = observed ? 1.0 / q : 0.0;
      const double a = (g == 0) * o_over_q * (in_accept - cfg.alpha);
      const double r = (g == 1) * o_over_q * (cfg.beta - in_reject);
      s_acc += a;
      ss_acc += a * a;
      s_rej += r;
      ss_rej += r * r;
      if (observed)
        pol.feedback(StrongLabel(g));
      else
        pol.advance_without_feedback();
    }
    auto z = [&](long double s, long double ss, double e) {
      const double m = static_cast<double>(s / draws);
      const double var = std::max(0.0, static_cast<double>(ss / draws) - m * m);
      const double se = std::sqrt(var / (draws - 1));
      if (se == 0.0) return std::abs(m - e) <= 1e-12 ? 0.0 : INFINITY;
      return std::abs(m - e) / se;
    };
    const double za = z(s_acc, ss_acc, e_acc);
    const double zr = z(s_rej, ss_rej, e_rej);
    worst_z = std::max({worst_z, za, zr});
    if (!region_stable || za > 4.0 || zr > 4.0) {
      ++bad;
      note(o, false, fmt("context %d w=%.3f g=%d q=%.3f z=%.2f/%.2f", c, w, g, q, za, zr));
    }
  }
  note(o, bad == 0, fmt("%d/20 contexts outside 4 se, max |z| %.2f", bad, worst_z));
  return o;
}

// ---- 5: population value against per-atom brute force ----

Outcome population_oracle() {
  Outcome o;
  Rng rng(derive_seed(555, 5));
  const std::size_t atoms = 1001;
  int value_bad = 0, assign_bad = 0, ties = 0;
  double worst_ratio = 0.0;
  for (int i = 0; i < 200; ++i) {
    ScoreDistribution score;
    switch (i % 4) {
      case 0: score = dist::Uniform{}; break;
      case 1: score = dist::Beta{0.3 + 6 * rng.uniform(), 0.3 + 6 * rng.uniform()}; break;
      case 2:
        score = dist::BetaMixture{rng.uniform(), {0.5 + 5 * rng.uniform(), 0.5 + 5 * rng.uniform()},
                                  {0.5 + 5 * rng.uniform(), 0.5 + 5 * rng.uniform()}};
        break;
      default: {
        dist::Grid g = dist::Grid::uniform(atoms);
        double total = 0.0;
        for (double& w : g.weights) total += (w = rng.uniform());
        for (double& w : g.weights) w /= total;
        score = g;
      }
    }
    const double l1 = rng.uniform() < 0.05 ? 0.0 : 3 * rng.uniform();
    const double l2 = rng.uniform() < 0.05 ? 0.0 : 3 * rng.uniform();
    const auto spec = population::PopulationSpec::make_calibrated(score, l1, l2);
    const auto [a, b] = population::effective_weights(spec);
    const double v = population::value(spec);

    population::PopulationSpec grid_spec = spec;
    grid_spec.score = discretize(score, atoms);
    grid_spec.calibrated = false;
    const auto bf = population::brute_force_value(grid_spec);
    const double bound = population::grid_resolution_bound({a, b}, atoms);
    const double err = std::abs(v - bf.value);
    if (err > bound) ++value_bad;
    if (bound > 0) worst_ratio = std::max(worst_ratio, err / bound);

    const auto pol = population::optimal_policy(a, b);
    const auto grid = std::get<dist::Grid>(grid_spec.score);
    for (std::size_t k = 0; k < grid.atoms.size(); ++k) {
      const double w = grid.atoms[k];
      const double costs[3] = {1.0, a * (1 - w), b * w};
      const double best = std::min({costs[0], costs[1], costs[2]});
      int minimal = 0;
      for (double c : costs) minimal += std::abs(c - best) <= 1e-12 * std::max(1.0, best);
      if (minimal > 1) {
        ++ties;
        continue;
      }
      if (pol.action_at(w) != bf.assignment[k]) ++assign_bad;
    }
  }
  note(o, value_bad == 0, fmt("value outside grid bound %d/200 (max err/bound %.3f)", value_bad, worst_ratio));
  note(o, assign_bad == 0, fmt("assignment mismatches %d (%d ties skipped)", assign_bad, ties));

  const auto uni = population::PopulationSpec::make_calibrated(dist::Uniform{}, 2.0, 2.0);
  const auto [a, b] = population::effective_weights(uni);
  const double vq = population::value(uni);
  note(o, a == 4.0 && b == 4.0 && std::abs(vq - 0.75) <= 1e-9, fmt("uniform quadrature %.12f", vq));
  const auto pol = population::optimal_policy(a, b);
  Rng mc(derive_seed(8, 8));
  double s = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double w = mc.uniform();
    s += population::pointwise_cost(w, pol.action_at(w), a, b);
  }
  note(o, std::abs(s / n - 0.75) <= 1e-3, fmt("uniform Monte Carlo %.5f", s / n));
  return o;
}

// ---- 6: accuracy / cost frontier ----

experiments::SweepSpec frontier_spec(const StreamSpec& stream, std::vector<experiments::Target> targets) {
  experiments::SweepSpec s;
  s.targets = std::move(targets);
  s.base.policy = policy(0.15, 0.15, 0.005, 0.1);
  s.base.stream = stream;
  s.base.horizon = std::nullopt;
  s.base.repetitions = 20;
  s.base.seed_base = 2024;
  return s;
}

Outcome frontier() {
  Outcome o;
  const std::vector<double> levels{0.01, 0.05, 0.1, 0.2, 0.3};
  std::vector<experiments::Target> targets;
  for (double l : levels) targets.push_back({l, l});
  const auto pts = experiments::sweep(frontier_spec(streams::preset("math_easy"), targets), 0);
  const auto& oracle = pts[levels.size()];
  const auto& weak = pts[levels.size() + 1];
  o.detail = fmt("oracle %.4f@%.3f weak-only %.4f", oracle.accuracy, oracle.strong_per_problem,
                 weak.accuracy);
  bool below_oracle = true, above_weak = true, monotone = true;
  std::string above_detail;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& p = pts[i];
    const double se_o = std::hypot(p.accuracy_stderr, oracle.accuracy_stderr);
    const double se_w = std::hypot(p.accuracy_stderr, weak.accuracy_stderr);
    if (p.accuracy > oracle.accuracy + 2 * se_o) below_oracle = false;
    if (p.accuracy < weak.accuracy - 2 * se_w) {
      above_weak = false;
      above_detail += fmt(" %.2f", levels[i]);
    }
    if (i > 0 && p.strong_per_problem > pts[i - 1].strong_per_problem) monotone = false;
    o.detail += fmt("; a=%.2f %.4f+-%.4f@%.3f", levels[i], p.accuracy, p.accuracy_stderr,
                    p.strong_per_problem);
  }
  note(o, below_oracle, "adaptive <= oracle");
  note(o, above_weak, "adaptive >= weak-only" + (above_weak ? std::string() : " fails at" + above_detail));
  note(o, monotone, "strong calls non-increasing");

  const auto& easy5 = pts[1];
  const bool easy_ok = easy5.accuracy >= 0.9 * oracle.accuracy &&
                       easy5.strong_per_problem <= 0.5 * oracle.strong_per_problem;
  note(o, easy_ok, fmt("easy@0.05 acc ratio %.3f strong ratio %.3f", easy5.accuracy / oracle.accuracy,
                       easy5.strong_per_problem / oracle.strong_per_problem));

  const auto amb = experiments::sweep(frontier_spec(streams::preset("ambiguous"), {{0.05, 0.05}}), 0);
  const bool amb_ok = amb[0].accuracy >= 0.9 * amb[1].accuracy &&
                      amb[0].strong_per_problem <= 0.5 * amb[1].strong_per_problem;
  note(o, !amb_ok, fmt("ambiguous@0.05 acc ratio %.3f strong ratio %.3f (must not qualify)",
                       amb[0].accuracy / amb[1].accuracy,
                       amb[0].strong_per_problem / amb[1].strong_per_problem));
  return o;
}

// ---- 7: preset diagnostics ----

Outcome diagnostics() {
  Outcome o;
  struct Row {
    const char* name;
    double mu1, mu0, sep;
  };
  const Row rows[] = {{"math_easy", 0.90, 0.33, 0.57},
                      {"math_medium", 0.86, 0.32, 0.54},
                      {"math_hard", 0.64, 0.26, 0.37}};
  std::vector<double> sharp;
  for (const auto& r : rows) {
    const auto d = experiments::diagnose(streams::preset(r.name), 200000);
    const bool ok = std::abs(d.mean_correct - r.mu1) <= 0.03 && std::abs(d.mean_incorrect - r.mu0) <= 0.03 &&
                    std::abs(d.separation - r.sep) <= 0.03;
    note(o, ok, fmt("%s mu1 %.3f mu0 %.3f sep %.3f base %.3f sharp %.3f", r.name, d.mean_correct,
                    d.mean_incorrect, d.separation, d.base_accuracy, d.sharpness_mean));
    sharp.push_back(d.sharpness_mean);
  }
  note(o, sharp[0] > sharp[1] && sharp[1] > sharp[2], "sharpness easy > medium > hard");
  return o;
}

// ---- 8: determinism ----

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("ssv_accept_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int invoke(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "ssv");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream os, es;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), os, es);
  if (out) *out = os.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  TempDir dir;
  const auto cfg = dir.path / "cfg.json";
  std::ofstream(cfg) << R"({"policy": {"alpha": 0.1, "beta": 0.2, "eta": 0.05},
                            "stream": {"preset": "math_medium"}, "seed_base": 17})";
  const auto t1 = dir.path / "a.jsonl";
  const auto t2 = dir.path / "b.jsonl";
  const int c1 = invoke({"simulate", "-c", cfg.string(), "-o", t1.string(), "problems=300"});
  const int c2 = invoke({"simulate", "-c", cfg.string(), "-o", t2.string(), "problems=300", "-j", "4"});
  const std::string b1 = slurp(t1), b2 = slurp(t2);
  note(o, c1 == 0 && c2 == 0 && !b1.empty() && b1 == b2, fmt("simulate traces identical (%zu bytes)", b1.size()));

  const std::vector<std::string> common{"sweep", "preset=math_easy", "problems=200", "reps=4"};
  auto with = [&](std::vector<std::string> extra, std::string* out = nullptr) {
    auto a = common;
    a.insert(a.end(), extra.begin(), extra.end());
    return invoke(a, out);
  };
  std::string serial, merged;
  const int cs = with({}, &serial);
  std::vector<std::string> merge{"--merge"};
  bool shards_ok = true;
  for (int i = 0; i < 3; ++i) {
    const auto s = dir.path / ("shard" + std::to_string(i) + ".jsonl");
    shards_ok &= with({"--shard", fmt("%d/3", i), "-o", s.string()}) == 0;
    merge.push_back(s.string());
  }
  const int cm = with(merge, &merged);
  note(o, cs == 0 && shards_ok && cm == 0 && !serial.empty() && merged == serial,
       "cli sharded sweep == serial");

  auto lib = frontier_spec(streams::preset_math_like(streams::Level::Medium, 200), {{0.05, 0.05}, {0.2, 0.2}});
  lib.base.repetitions = 5;
  const auto ref = experiments::sweep(lib, 1);
  std::vector<experiments::JobResult> jobs;
  for (std::size_t i = 0; i < 4; ++i) {
    auto part = experiments::sweep_jobs(lib, {i, 4}, 2);
    jobs.insert(jobs.end(), part.begin(), part.end());
  }
  note(o, experiments::aggregate(lib, jobs) == ref, "library sharded sweep == serial");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 error control", error_control},     {"2 convergence", convergence},
      {"3 exact claims", exact_claims},       {"4 unbiased signals", unbiased_signals},
      {"5 population oracle", population_oracle}, {"6 pareto frontier", frontier},
      {"7 diagnostics", diagnostics},         {"8 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %s (%.1fs): %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.passed ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
