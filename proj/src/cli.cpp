#include "ssv/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ssv/error.hpp"
#include "ssv/serialization.hpp"

namespace ssv::cli {

namespace {

struct Options {
  std::optional<std::string> config;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::string format;
  unsigned threads = 0;
  std::vector<std::string> overrides;
  std::vector<std::string> traces;
  double check_delta = 0.05;
  std::string shard;
  std::vector<std::string> merge;
};

class Sink {
 public:
  Sink(const Options& o, std::string default_name, std::ostream& out) : out_(out) {
    if (o.output) {
      path_ = *o.output;
    } else if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) {
      path_ = (std::filesystem::path(dir) / default_name).string();
    }
  }

  std::ostream& stream() { return buf_; }

  void commit(std::ostream& err) {
    if (path_) {
      io::write_file_atomic(*path_, buf_.str());
      err << "wrote " << *path_ << '\n';
    } else {
      out_ << buf_.str();
      out_.flush();
    }
  }

 private:
  std::ostream& out_;
  std::optional<std::string> path_;
  std::ostringstream buf_;
};

io::Config load(const Options& o) {
  std::vector<std::string> ov = o.overrides;
  if (o.seed) ov.push_back("seed_base=" + std::to_string(*o.seed));
  return io::load_config(o.config, ov);
}

experiments::SweepSpec sweep_spec(const io::Config& c) {
  experiments::SweepSpec s;
  s.targets = c.sweep.targets;
  s.base = c.run;
  s.anchors = c.sweep.anchors;
  return s;
}

experiments::Shard parse_shard(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) throw std::invalid_argument("no slash");
    experiments::Shard s;
    s.index = std::stoul(text.substr(0, slash));
    s.count = std::stoul(text.substr(slash + 1));
    return s;
  } catch (const std::logic_error&) {
    throw ValidationError("shard", "expected INDEX/COUNT, got '" + text + "'");
  }
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const io::Config cfg = load(o);
  const auto traces = experiments::run(cfg.run, o.threads);
  Sink sink(o, "trace.jsonl", out);
  for (const auto& t : traces) io::write_trace(sink.stream(), cfg, t);
  sink.commit(err);
  return kOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const io::Config cfg = load(o);
  const auto spec = sweep_spec(cfg);
  if (!o.shard.empty()) {
    const auto jobs = experiments::sweep_jobs(spec, parse_shard(o.shard), o.threads);
    Sink sink(o, "sweep_shard.jsonl", out);
    for (const auto& j : jobs) sink.stream() << io::to_json(j).dump() << '\n';
    sink.commit(err);
    return kOk;
  }
  std::vector<experiments::ParetoPoint> points;
  if (!o.merge.empty()) {
    std::vector<experiments::JobResult> jobs;
    for (const auto& path : o.merge) {
      std::ifstream in(path);
      if (!in) throw IoError("cannot read '" + path + "'");
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
          jobs.push_back(io::job_from_json(io::json::parse(line)));
        } catch (const io::json::parse_error&) {
          throw FormatError(path + ": not JSON");
        }
      }
    }
    try {
      points = experiments::aggregate(spec, std::move(jobs));
    } catch (const ContractError& e) {
      throw FormatError(e.what());
    }
  } else {
    points = experiments::sweep(spec, o.threads);
  }
  const bool json_out = o.format == "json";
  Sink sink(o, json_out ? "sweep.json" : "sweep.csv", out);
  if (json_out) {
    io::json arr = io::json::array();
    for (const auto& p : points) arr.push_back(io::to_json(p));
    sink.stream() << arr.dump(2) << '\n';
  } else {
    io::write_sweep_csv(sink.stream(), points);
  }
  sink.commit(err);
  return kOk;
}

int cmd_population(const Options& o, std::ostream& out, std::ostream& err) {
  const io::Config cfg = load(o);
  Sink sink(o, "population.jsonl", out);
  for (const auto& [l1, l2] : cfg.population.pairs) {
    sink.stream() << io::population_line(l1, l2, cfg.population).dump() << '\n';
  }
  sink.commit(err);
  return kOk;
}

int cmd_diagnose(const Options& o, std::ostream& out, std::ostream& err) {
  const io::Config cfg = load(o);
  const auto d = experiments::diagnose(cfg.run.stream, cfg.diagnose.samples, cfg.diagnose.bins);
  const bool csv = o.format == "csv";
  Sink sink(o, csv ? "diagnose.csv" : "diagnose.json", out);
  if (csv) {
    sink.stream() << "lower,upper,count,mean_w,frac_correct\n";
    for (const auto& b : d.bins) {
      sink.stream() << io::format_double(b.lower) << ',' << io::format_double(b.upper) << ','
                    << b.count << ',' << io::format_double(b.mean_w) << ','
                    << io::format_double(b.frac_correct) << '\n';
    }
  } else {
    sink.stream() << io::to_json(d).dump(2) << '\n';
  }
  sink.commit(err);
  return kOk;
}

int cmd_check(const Options& o, std::ostream& out) {
  if (!(o.check_delta > 0.0 && o.check_delta < 1.0)) {
    throw ValidationError("delta", "must lie in (0,1)");
  }
  bool all = true;
  auto line = [&](bool ok, const std::string& name, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    all = all && ok;
  };
  for (const auto& path : o.traces) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    const auto blocks = io::read_trace(in);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const auto& b = blocks[k];
      out << "== " << path << " block " << k << " (" << b.records.size() << " rounds)\n";
      ErrorLedger ledger;
      bool labels_ok = true;
      for (std::size_t i = 0; i < b.records.size(); ++i) {
        try {
          ledger.record(b.records[i], b.latent[i]);
        } catch (const ConsistencyError&) {
          labels_ok = false;
        }
      }
      const auto bound = experiments::verify_bound(ledger, b.policy, o.check_delta);
      auto ineq = [&](const char* name, const char* nsym, const experiments::InequalityReport& r) {
        if (r.vacuous) {
          line(true, name, std::string("vacuous: ") + nsym + "=0");
          return;
        }
        std::ostringstream d;
        d << "err=" << r.error << " <= target+Delta=" << r.target << "+" << r.slack << " ("
          << nsym << "=" << r.n << ", margin " << r.margin << ")";
        line(r.passed, name, d.str());
      };
      ineq("type1_bound", "N0", bound.type1);
      ineq("type2_bound", "N1", bound.type2);

      const auto claims = experiments::check_claims(
          b.records, b.latent, b.policy, {.telescoping_tolerance = 1e-9, .accumulation_allowance = true});
      for (const auto& c : claims.claims) line(c.passed, c.name, c.detail);
      if (!labels_ok) line(false, "ledger", "observed label contradicts latent label");

      if (b.summary) {
        const auto& s = *b.summary;
        bool same = s.contains("ledger") && s["ledger"].is_object();
        if (same) {
          const auto& l = s["ledger"];
          auto eq = [&](const char* key, std::uint64_t v) {
            return l.contains(key) && l[key].is_number_unsigned() && l[key].get<std::uint64_t>() == v;
          };
          same = eq("n0", ledger.n0) && eq("n1", ledger.n1) && eq("type1_policy", ledger.type1_policy) &&
                 eq("type2_policy", ledger.type2_policy) &&
                 eq("type1_threshold", ledger.type1_threshold) &&
                 eq("type2_threshold", ledger.type2_threshold) && eq("sv_count", ledger.sv_count) &&
                 eq("total", ledger.total);
        }
        line(same, "summary_ledger", same ? "summary matches recomputed tallies"
                                          : "summary disagrees with recomputed tallies");
      } else {
        line(false, "summary_ledger", "missing summary line");
      }
    }
  }
  out << (all ? "ALL PASS" : "SOME CHECKS FAILED") << '\n';
  return all ? kOk : kCheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective strong verification: online two-threshold policy, population theory "
               "and synthetic experiments",
               "ssv"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--output,-o", o.output, "Output file (default: $SSV_OUTPUT_DIR/<name> or stdout)");
  app.add_option("--seed", o.seed, "Override seed_base");
  app.add_option("--threads,-j", o.threads, "Worker threads (0 = hardware concurrency)");

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config,-c", o.config, "JSON config file");
    sub->add_option("overrides", o.overrides, "key=value overrides (dotted path or alias)");
  };
  auto* sim = app.add_subcommand("simulate", "Run the policy against a stream and write a JSONL trace");
  with_config(sim);
  auto* swp = app.add_subcommand("sweep", "Sweep (alpha, beta) targets and write Pareto points");
  with_config(swp);
  swp->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  swp->add_option("--shard", o.shard, "Run only shard INDEX/COUNT and write job lines");
  swp->add_option("--merge", o.merge, "Aggregate job-line files from shards");
  auto* pop = app.add_subcommand("population", "Optimal policy and value per (lambda1, lambda2) pair");
  with_config(pop);
  auto* chk = app.add_subcommand("check", "Verify error bounds and trace invariants");
  chk->add_option("traces", o.traces, "Trace files")->required();
  chk->add_option("--delta", o.check_delta, "Confidence parameter for the bounds");
  auto* dia = app.add_subcommand("diagnose", "Sharpness and calibration statistics of a stream");
  with_config(dia);
  dia->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kIoOrParse;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o, out, err);
    if (swp->parsed()) return cmd_sweep(o, out, err);
    if (pop->parsed()) return cmd_population(o, out, err);
    if (chk->parsed()) return cmd_check(o, out);
    if (dia->parsed()) return cmd_diagnose(o, out, err);
  } catch (const ValidationError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kValidation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoOrParse;
  } catch (const FormatError& e) {
    err << "parse error: " << e.what() << '\n';
    return kIoOrParse;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kIoOrParse;
}

}  // namespace ssv::cli
