#include "ssv/serialization.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "ssv/error.hpp"

namespace ssv::io {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Strict object reader: every key must be consumed, types are checked and
// reported with the dotted field name.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_.empty() ? "config" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    return convert<T>(j_.at(key), join(path_, key));
  }

  template <class T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!has(key)) throw ValidationError(join(path_, key), "missing");
    return convert<T>(j_.at(key), join(path_, key));
  }

  template <class T>
  std::optional<T> optional(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return convert<T>(j_.at(key), join(path_, key));
  }

  void skip(const std::string& key) { used_.insert(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ValidationError(join(path_, it.key()), "unknown key");
    }
  }

  std::string field(const std::string& key) const { return join(path_, key); }

  template <class T>
  static T convert(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(field, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError(field, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError(field, "expected a number");
      return v.get<T>();
    } else {
      static_assert(std::is_integral_v<T>);
      if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
      if (v.is_number_integer()) {
        if (v.get<std::int64_t>() < 0) throw ValidationError(field, "must be nonnegative");
        return static_cast<T>(v.get<std::int64_t>());
      }
      throw ValidationError(field, "expected a nonnegative integer");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json beta_json(const dist::Beta& b) { return {{"a", b.a}, {"b", b.b}}; }

dist::Beta beta_from(const json& j, const std::string& field) {
  Reader r(j, field);
  dist::Beta b;
  if (r.has("mean")) {
    const double m = r.require<double>("mean");
    const double c = r.require<double>("concentration");
    b = dist::Beta::from_mean(m, c);
  } else {
    b.a = r.require<double>("a");
    b.b = r.require<double>("b");
  }
  r.finish();
  return b;
}

std::vector<double> number_array(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field, "expected an array");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(Reader::convert<double>(v, field));
  return out;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// ---- distributions ----

json to_json(const ScoreDistribution& d) {
  return std::visit(
      Overloaded{
          [](const dist::PointMass& p) -> json { return {{"family", "point"}, {"value", p.value}}; },
          [](const dist::Uniform&) -> json { return {{"family", "uniform"}}; },
          [](const dist::Beta& b) -> json {
            return {{"family", "beta"}, {"a", b.a}, {"b", b.b}};
          },
          [](const dist::BetaMixture& m) -> json {
            return {{"family", "beta_mixture"},
                    {"weight", m.weight},
                    {"first", beta_json(m.first)},
                    {"second", beta_json(m.second)}};
          },
          [](const dist::Grid& g) -> json {
            return {{"family", "grid"}, {"atoms", g.atoms}, {"weights", g.weights}};
          },
      },
      d);
}

ScoreDistribution distribution_from_json(const json& j, const std::string& field) {
  Reader r(j, field);
  const auto family = r.require<std::string>("family");
  ScoreDistribution d;
  if (family == "point") {
    d = dist::PointMass{r.require<double>("value")};
  } else if (family == "uniform") {
    d = dist::Uniform{};
  } else if (family == "beta") {
    json body = j;
    body.erase("family");
    for (const auto& k : {"a", "b", "mean", "concentration"}) r.skip(k);
    d = beta_from(body, field);
  } else if (family == "beta_mixture") {
    dist::BetaMixture m;
    m.weight = r.require<double>("weight");
    m.first = beta_from(r.raw("first"), r.field("first"));
    m.second = beta_from(r.raw("second"), r.field("second"));
    d = m;
  } else if (family == "grid") {
    dist::Grid g;
    if (r.has("uniform")) {
      g = dist::Grid::uniform(r.require<std::size_t>("uniform"));
    } else {
      g.atoms = number_array(r.raw("atoms"), r.field("atoms"));
      g.weights = number_array(r.raw("weights"), r.field("weights"));
    }
    d = g;
  } else {
    throw ValidationError(r.field("family"), "unknown family '" + family + "'");
  }
  r.finish();
  validate(d, field);
  return d;
}

// ---- policy ----

json to_json(const PolicyConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"eta", c.eta},
          {"q_accept", c.q_accept},
          {"q_reject", c.q_reject},
          {"tau_reject_init", c.tau_reject_init},
          {"tau_accept_init", c.tau_accept_init},
          {"seed", c.seed}};
}

PolicyConfig policy_from_json(const json& j) {
  Reader r(j, "policy");
  PolicyConfig c;
  c.alpha = r.get("alpha", c.alpha);
  c.beta = r.get("beta", c.beta);
  c.eta = r.get("eta", c.eta);
  c.q_accept = r.get("q_accept", c.q_accept);
  c.q_reject = r.get("q_reject", c.q_reject);
  c.tau_reject_init = r.get("tau_reject_init", c.tau_reject_init);
  c.tau_accept_init = r.get("tau_accept_init", c.tau_accept_init);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

// ---- streams ----

namespace {

json link_json(const streams::Link& l) {
  switch (l.kind) {
    case streams::Link::Kind::Identity: return {{"kind", "identity"}};
    case streams::Link::Kind::Power: return {{"kind", "power"}, {"exponent", l.exponent}};
    case streams::Link::Kind::Affine:
      return {{"kind", "affine"}, {"intercept", l.intercept}, {"slope", l.slope}};
  }
  return {};
}

streams::Link link_from(const json& j) {
  Reader r(j, "stream.link");
  const auto kind = r.require<std::string>("kind");
  streams::Link l;
  if (kind == "identity") {
  } else if (kind == "power") {
    l = streams::Link::power(r.require<double>("exponent"));
  } else if (kind == "affine") {
    l = streams::Link::affine(r.require<double>("intercept"), r.require<double>("slope"));
  } else {
    throw ValidationError("stream.link.kind", "unknown link '" + kind + "'");
  }
  r.finish();
  return l;
}

}  // namespace

json to_json(const streams::StreamSpec& s) {
  json j = std::visit(
      Overloaded{
          [](const streams::Calibrated& c) -> json {
            return {{"type", "calibrated"}, {"score", to_json(c.score)}};
          },
          [](const streams::Miscalibrated& m) -> json {
            return {{"type", "miscalibrated"}, {"score", to_json(m.score)}, {"link", link_json(m.link)}};
          },
          [](const streams::Drift& d) -> json {
            json segs = json::array();
            for (const auto& seg : d.segments) {
              segs.push_back({{"score", to_json(seg.score)}, {"length", seg.length}});
            }
            return {{"type", "drift"}, {"segments", segs}};
          },
          [](const streams::BestOfN& b) -> json {
            return {{"type", "best_of_n"},
                    {"problems", b.problems},
                    {"budget", b.budget},
                    {"difficulty", to_json(b.difficulty)},
                    {"correct", to_json(b.correct_scores)},
                    {"incorrect", to_json(b.incorrect_scores)}};
          },
          [](const streams::Stepwise& s) -> json {
            return {{"type", "stepwise"},
                    {"episodes", s.episodes},
                    {"steps", s.steps},
                    {"step_correct", s.step_correct},
                    {"correct", to_json(s.correct_scores)},
                    {"incorrect", to_json(s.incorrect_scores)},
                    {"retry_budget", s.retry_budget}};
          },
      },
      s.variant);
  j["seed"] = s.seed;
  return j;
}

streams::StreamSpec stream_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("stream", "expected an object");
  if (j.contains("preset")) {
    // Expand the preset, then let the remaining keys patch it.
    json patched = to_json(streams::preset(Reader::convert<std::string>(j.at("preset"), "stream.preset")));
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "preset") patched[it.key()] = it.value();
    }
    return stream_from_json(patched);
  }
  Reader r(j, "stream");
  streams::StreamSpec s;
  const auto type = r.require<std::string>("type");
  auto score = [&](const std::string& key) { return distribution_from_json(r.raw(key), r.field(key)); };
  if (type == "calibrated") {
    s.variant = streams::Calibrated{score("score")};
  } else if (type == "miscalibrated") {
    streams::Miscalibrated m{score("score"), {}};
    m.link = link_from(r.raw("link"));
    s.variant = m;
  } else if (type == "drift") {
    streams::Drift d;
    const json& segs = r.raw("segments");
    if (!segs.is_array()) throw ValidationError("stream.segments", "expected an array");
    for (const auto& seg : segs) {
      Reader sr(seg, "stream.segments");
      streams::DriftSegment ds;
      ds.score = distribution_from_json(sr.raw("score"), "stream.segments.score");
      ds.length = sr.require<std::uint64_t>("length");
      sr.finish();
      d.segments.push_back(ds);
    }
    s.variant = d;
  } else if (type == "best_of_n") {
    streams::BestOfN b;
    b.problems = r.get<std::uint64_t>("problems", b.problems);
    b.budget = r.get<std::uint32_t>("budget", b.budget);
    if (r.has("difficulty")) b.difficulty = score("difficulty");
    if (r.has("correct")) b.correct_scores = score("correct");
    if (r.has("incorrect")) b.incorrect_scores = score("incorrect");
    for (const auto& k : {"difficulty", "correct", "incorrect"}) r.skip(k);
    s.variant = b;
  } else if (type == "stepwise") {
    streams::Stepwise w;
    w.episodes = r.get<std::uint64_t>("episodes", w.episodes);
    w.steps = r.get<std::uint32_t>("steps", w.steps);
    w.step_correct = r.get("step_correct", w.step_correct);
    w.retry_budget = r.get<std::uint32_t>("retry_budget", w.retry_budget);
    if (r.has("correct")) w.correct_scores = score("correct");
    if (r.has("incorrect")) w.incorrect_scores = score("incorrect");
    for (const auto& k : {"correct", "incorrect"}) r.skip(k);
    s.variant = w;
  } else {
    throw ValidationError("stream.type", "unknown stream type '" + type + "'");
  }
  s.seed = r.get<std::uint64_t>("seed", 0);
  r.finish();
  s.validate();
  return s;
}

// ---- whole config ----

void Config::validate() const {
  run.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta", "must lie in (0,1)");
  if (sweep.targets.empty()) throw ValidationError("sweep.targets", "must not be empty");
  ssv::validate(population.score, "population.score");
  if (population.grid_atoms < 2) throw ValidationError("population.grid_atoms", "must be at least 2");
  if (!(population.quadrature_tolerance > 0.0)) {
    throw ValidationError("population.quadrature_tolerance", "must be positive");
  }
  for (const auto& [l1, l2] : population.pairs) {
    if (!(l1 >= 0.0 && l2 >= 0.0)) throw ValidationError("population.pairs", "lambdas must be nonnegative");
  }
  if (population.alpha1 && !(*population.alpha1 > 0.0 && *population.alpha1 < 1.0)) {
    throw ValidationError("population.alpha1", "must lie in (0,1)");
  }
  if (diagnose.bins < 1) throw ValidationError("diagnose.bins", "must be at least 1");
}

json to_json(const Config& c) {
  json targets = json::array();
  for (const auto& t : c.sweep.targets) targets.push_back({t.alpha, t.beta});
  json pairs = json::array();
  for (const auto& [l1, l2] : c.population.pairs) pairs.push_back({l1, l2});
  return {
      {"policy", to_json(c.run.policy)},
      {"stream", to_json(c.run.stream)},
      {"horizon", c.run.horizon ? json(*c.run.horizon) : json(nullptr)},
      {"repetitions", c.run.repetitions},
      {"seed_base", c.run.seed_base},
      {"delta", c.delta},
      {"sweep", {{"targets", targets}, {"anchors", c.sweep.anchors}}},
      {"population",
       {{"score", to_json(c.population.score)},
        {"alpha1", c.population.alpha1 ? json(*c.population.alpha1) : json(nullptr)},
        {"pairs", pairs},
        {"grid_atoms", c.population.grid_atoms},
        {"quadrature_tolerance", c.population.quadrature_tolerance}}},
      {"diagnose", {{"samples", c.diagnose.samples}, {"bins", c.diagnose.bins}}},
  };
}

namespace {

std::pair<double, double> number_pair(const json& v, const std::string& field) {
  if (v.is_number()) {
    const double x = v.get<double>();
    return {x, x};
  }
  if (!v.is_array() || v.size() != 2) throw ValidationError(field, "expected a number or a pair");
  return {Reader::convert<double>(v[0], field), Reader::convert<double>(v[1], field)};
}

}  // namespace

Config config_from_json(const json& j) {
  Reader r(j, "");
  Config c;
  if (r.has("policy")) c.run.policy = policy_from_json(r.raw("policy"));
  if (r.has("stream")) c.run.stream = stream_from_json(r.raw("stream"));
  r.skip("policy");
  r.skip("stream");
  if (j.contains("horizon")) {
    r.skip("horizon");
    c.run.horizon = j.at("horizon").is_null()
                        ? std::nullopt
                        : std::optional<std::uint64_t>(
                              Reader::convert<std::uint64_t>(j.at("horizon"), "horizon"));
  }
  c.run.repetitions = r.get<std::uint32_t>("repetitions", c.run.repetitions);
  c.run.seed_base = r.get<std::uint64_t>("seed_base", c.run.seed_base);
  c.delta = r.get("delta", c.delta);

  if (r.has("sweep")) {
    Reader s(r.raw("sweep"), "sweep");
    if (s.has("targets")) {
      const json& t = s.raw("targets");
      if (!t.is_array()) throw ValidationError("sweep.targets", "expected an array");
      c.sweep.targets.clear();
      for (const auto& v : t) {
        auto [a, b] = number_pair(v, "sweep.targets");
        c.sweep.targets.push_back({a, b});
      }
    }
    s.skip("targets");
    c.sweep.anchors = s.get("anchors", c.sweep.anchors);
    s.finish();
  }
  r.skip("sweep");

  if (r.has("population")) {
    Reader p(r.raw("population"), "population");
    if (p.has("score")) c.population.score = distribution_from_json(p.raw("score"), "population.score");
    p.skip("score");
    c.population.alpha1 = p.optional<double>("alpha1");
    if (p.has("pairs")) {
      const json& t = p.raw("pairs");
      if (!t.is_array()) throw ValidationError("population.pairs", "expected an array");
      c.population.pairs.clear();
      for (const auto& v : t) c.population.pairs.push_back(number_pair(v, "population.pairs"));
    }
    p.skip("pairs");
    c.population.grid_atoms = p.get<std::size_t>("grid_atoms", c.population.grid_atoms);
    c.population.quadrature_tolerance =
        p.get("quadrature_tolerance", c.population.quadrature_tolerance);
    p.finish();
  }
  r.skip("population");

  if (r.has("diagnose")) {
    Reader d(r.raw("diagnose"), "diagnose");
    c.diagnose.samples = d.get<std::uint64_t>("samples", c.diagnose.samples);
    c.diagnose.bins = d.get<std::size_t>("bins", c.diagnose.bins);
    d.finish();
  }
  r.skip("diagnose");
  r.finish();
  c.validate();
  return c;
}

// ---- overrides ----

namespace {

const std::map<std::string, std::vector<std::string>>& alias_table() {
  static const std::map<std::string, std::vector<std::string>> table{
      {"alpha", {"policy.alpha"}},
      {"beta", {"policy.beta"}},
      {"eta", {"policy.eta"}},
      {"q", {"policy.q_accept", "policy.q_reject"}},
      {"q_accept", {"policy.q_accept"}},
      {"q_reject", {"policy.q_reject"}},
      {"tau_reject_init", {"policy.tau_reject_init"}},
      {"tau_accept_init", {"policy.tau_accept_init"}},
      {"horizon", {"horizon"}},
      {"T", {"horizon"}},
      {"reps", {"repetitions"}},
      {"repetitions", {"repetitions"}},
      {"seed", {"seed_base"}},
      {"delta", {"delta"}},
      {"problems", {"stream.problems"}},
      {"samples", {"diagnose.samples"}},
  };
  return table;
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

void set_path(json& doc, const std::string& path, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) {
      throw ValidationError(path, "unknown configuration key");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

}  // namespace

std::vector<std::string> override_aliases() {
  std::vector<std::string> out{"preset"};
  for (const auto& [k, v] : alias_table()) out.push_back(k);
  return out;
}

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError(assignment, "override must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  if (key == "preset" || key == "stream.preset") {
    const streams::StreamSpec s = streams::preset(text);
    doc["stream"] = to_json(s);
    // Task presets run to exhaustion.
    if (s.reactive()) doc["horizon"] = nullptr;
    return;
  }
  const json value = parse_value(text);
  auto it = alias_table().find(key);
  if (it != alias_table().end()) {
    for (const auto& path : it->second) set_path(doc, path, value);
    return;
  }
  set_path(doc, key, value);
}

Config load_config(const std::optional<std::string>& path,
                   const std::vector<std::string>& overrides) {
  json raw = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot read config '" + *path + "'");
    try {
      raw = json::parse(in);
    } catch (const json::parse_error& e) {
      throw FormatError("config '" + *path + "' is not valid JSON: " + e.what());
    }
  }
  json doc = to_json(config_from_json(raw));
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

// ---- traces ----

json record_to_json(const DecisionRecord& rec, StrongLabel g_latent) {
  json j;
  j["t"] = rec.t;
  j["w"] = rec.w.value();
  j["region"] = std::string(to_string(rec.region));
  j["action"] = std::string(to_string(rec.action));
  j["q_t"] = rec.q_t;
  j["explored"] = rec.explored;
  if (rec.g_observed) j["g_observed"] = rec.g_observed->value();
  j["g_latent"] = g_latent.value();
  j["tau_R_before"] = rec.thresholds_before.tau_reject;
  j["tau_A_before"] = rec.thresholds_before.tau_accept;
  j["tau_R_after"] = rec.thresholds_after.tau_reject;
  j["tau_A_after"] = rec.thresholds_after.tau_accept;
  return j;
}

std::pair<DecisionRecord, StrongLabel> record_from_json(const json& j) {
  try {
    Reader r(j, "record");
    DecisionRecord rec;
    rec.t = r.require<std::uint64_t>("t");
    rec.w = WeakScore(r.require<double>("w"));
    rec.region = parse_region(r.require<std::string>("region"));
    rec.action = parse_action(r.require<std::string>("action"));
    rec.q_t = r.require<double>("q_t");
    rec.explored = r.require<bool>("explored");
    if (auto g = r.optional<int>("g_observed")) rec.g_observed = StrongLabel(*g);
    const StrongLabel latent(r.require<int>("g_latent"));
    rec.thresholds_before = {r.require<double>("tau_R_before"), r.require<double>("tau_A_before")};
    rec.thresholds_after = {r.require<double>("tau_R_after"), r.require<double>("tau_A_after")};
    r.finish();
    return {rec, latent};
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("malformed trace record: ") + e.what());
  }
}

namespace {

json ledger_json(const ErrorLedger& l) {
  return {{"n0", l.n0},
          {"n1", l.n1},
          {"type1_policy", l.type1_policy},
          {"type2_policy", l.type2_policy},
          {"type1_threshold", l.type1_threshold},
          {"type2_threshold", l.type2_threshold},
          {"sv_count", l.sv_count},
          {"total", l.total}};
}

json outcome_json(const std::optional<streams::TaskOutcome>& o) {
  if (!o) return nullptr;
  return {{"problems_total", o->problems_total},
          {"problems_correct", o->problems_correct},
          {"accuracy", o->accuracy()},
          {"strong_calls_per_problem", o->strong_calls_per_problem},
          {"weak_calls_per_problem", o->weak_calls_per_problem}};
}

}  // namespace

json trace_summary(const experiments::Trace& trace, double delta) {
  const ErrorLedger& l = trace.ledger;
  const auto bound = experiments::verify_bound(l, trace.policy, delta);
  return {{"type", "summary"},
          {"rounds", trace.rounds},
          {"err_type1", err_type1(l)},
          {"err_type2", err_type2(l)},
          {"sv_rate", sv_rate(l)},
          {"err_type1_threshold", err_type1_threshold(l)},
          {"err_type2_threshold", err_type2_threshold(l)},
          {"ledger", ledger_json(l)},
          {"delta", delta},
          {"delta_type1", bound.type1.slack},
          {"delta_type2", bound.type2.slack},
          {"bound_type1", bound.type1.target + bound.type1.slack},
          {"bound_type2", bound.type2.target + bound.type2.slack},
          {"final_thresholds", {{"tau_R", trace.final.tau_reject}, {"tau_A", trace.final.tau_accept}}},
          {"outcome", outcome_json(trace.outcome)}};
}

void write_trace(std::ostream& os, const Config& config, const experiments::Trace& trace) {
  json header{{"type", "header"},
              {"version", kTraceVersion},
              {"repetition", trace.repetition},
              {"config", to_json(config)},
              {"policy", to_json(trace.policy)},
              {"stream", to_json(trace.stream)}};
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    os << record_to_json(trace.records[i], trace.latent[i]).dump() << '\n';
  }
  os << trace_summary(trace, config.delta).dump() << '\n';
}

std::vector<TraceBlock> read_trace(std::istream& is) {
  std::vector<TraceBlock> blocks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": not JSON");
    }
    if (!j.is_object()) throw FormatError("line " + std::to_string(lineno) + ": expected an object");
    const std::string type = j.contains("type") && j["type"].is_string() ? j["type"].get<std::string>() : "";
    if (type == "header") {
      if (!j.contains("version") || j["version"] != kTraceVersion) {
        throw FormatError("line " + std::to_string(lineno) + ": unsupported trace version");
      }
      TraceBlock b;
      b.header = j;
      try {
        b.policy = policy_from_json(j.at("policy"));
      } catch (const std::exception& e) {
        throw FormatError("line " + std::to_string(lineno) + ": bad policy echo: " + e.what());
      }
      blocks.push_back(std::move(b));
    } else if (type == "summary") {
      if (blocks.empty() || blocks.back().summary) {
        throw FormatError("line " + std::to_string(lineno) + ": summary without a header");
      }
      blocks.back().summary = j;
    } else if (type.empty()) {
      if (blocks.empty() || blocks.back().summary) {
        throw FormatError("line " + std::to_string(lineno) + ": record outside a block");
      }
      try {
        auto [rec, g] = record_from_json(j);
        blocks.back().records.push_back(rec);
        blocks.back().latent.push_back(g);
      } catch (const FormatError& e) {
        throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
      }
    } else {
      throw FormatError("line " + std::to_string(lineno) + ": unknown line type '" + type + "'");
    }
  }
  if (blocks.empty()) throw FormatError("trace has no header");
  return blocks;
}

// ---- sweep tables ----

std::vector<std::string> sweep_columns() {
  return {"alpha", "beta", "accuracy", "accuracy_stderr", "strong_per_problem", "weak_per_problem",
          "err1", "err2", "reps", "is_oracle", "is_weak_only"};
}

void write_sweep_csv(std::ostream& os, const std::vector<experiments::ParetoPoint>& points) {
  const auto cols = sweep_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& p : points) {
    os << opt(p.alpha) << ',' << opt(p.beta) << ',' << format_double(p.accuracy) << ','
       << format_double(p.accuracy_stderr) << ',' << format_double(p.strong_per_problem) << ','
       << format_double(p.weak_per_problem) << ',' << opt(p.err1) << ',' << opt(p.err2) << ','
       << p.reps << ',' << (p.is_oracle ? 1 : 0) << ',' << (p.is_weak_only ? 1 : 0) << '\n';
  }
}

namespace {

double parse_double(const std::string& s, const std::string& field) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("column " + field + ": not a number: '" + s + "'");
  }
  return x;
}

}  // namespace

std::vector<experiments::ParetoPoint> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty sweep table");
  const auto cols = sweep_columns();
  {
    std::string expect;
    for (std::size_t i = 0; i < cols.size(); ++i) expect += (i ? "," : "") + cols[i];
    if (line != expect) throw FormatError("unexpected sweep header: " + line);
  }
  std::vector<experiments::ParetoPoint> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != cols.size()) throw FormatError("sweep row has wrong column count: " + line);
    auto opt = [&](std::size_t i) {
      return cells[i].empty() ? std::nullopt : std::optional<double>(parse_double(cells[i], cols[i]));
    };
    experiments::ParetoPoint p;
    p.alpha = opt(0);
    p.beta = opt(1);
    p.accuracy = parse_double(cells[2], cols[2]);
    p.accuracy_stderr = parse_double(cells[3], cols[3]);
    p.strong_per_problem = parse_double(cells[4], cols[4]);
    p.weak_per_problem = parse_double(cells[5], cols[5]);
    p.err1 = opt(6);
    p.err2 = opt(7);
    p.reps = static_cast<std::uint32_t>(parse_double(cells[8], cols[8]));
    p.is_oracle = cells[9] == "1";
    p.is_weak_only = cells[10] == "1";
    out.push_back(p);
  }
  return out;
}

json to_json(const experiments::ParetoPoint& p) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"alpha", opt(p.alpha)},
          {"beta", opt(p.beta)},
          {"accuracy", p.accuracy},
          {"accuracy_stderr", p.accuracy_stderr},
          {"strong_per_problem", p.strong_per_problem},
          {"weak_per_problem", p.weak_per_problem},
          {"err1", opt(p.err1)},
          {"err2", opt(p.err2)},
          {"reps", p.reps},
          {"is_oracle", p.is_oracle},
          {"is_weak_only", p.is_weak_only}};
}

json to_json(const experiments::JobResult& j) {
  return {{"row", j.row},
          {"rep", j.rep},
          {"accuracy", j.accuracy},
          {"strong_per_problem", j.strong_per_problem},
          {"weak_per_problem", j.weak_per_problem},
          {"err1", j.err1},
          {"err2", j.err2}};
}

experiments::JobResult job_from_json(const json& j) {
  try {
    Reader r(j, "job");
    experiments::JobResult out;
    out.row = r.require<std::size_t>("row");
    out.rep = r.require<std::uint32_t>("rep");
    out.accuracy = r.require<double>("accuracy");
    out.strong_per_problem = r.require<double>("strong_per_problem");
    out.weak_per_problem = r.require<double>("weak_per_problem");
    out.err1 = r.require<double>("err1");
    out.err2 = r.require<double>("err2");
    r.finish();
    return out;
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("malformed job line: ") + e.what());
  }
}

// ---- population and diagnostics ----

json population_line(double lambda1, double lambda2, const PopulationConfig& cfg) {
  population::PopulationSpec spec;
  if (cfg.alpha1) {
    spec.score = cfg.score;
    spec.lambda1 = lambda1;
    spec.lambda2 = lambda2;
    spec.alpha1 = *cfg.alpha1;
    spec.alpha0 = 1.0 - *cfg.alpha1;
    spec.calibrated = false;
  } else {
    spec = population::PopulationSpec::make_calibrated(cfg.score, lambda1, lambda2);
  }
  const auto w = population::effective_weights(spec);
  const auto pol = population::optimal_policy(w.a, w.b);
  json j{{"lambda1", lambda1},
         {"lambda2", lambda2},
         {"a", w.a},
         {"b", w.b},
         {"policy_kind", std::string(population::to_string(pol.kind))}};
  if (pol.kind == population::OptimalPolicy::Kind::ThreeRegion) {
    j["t_low"] = pol.t_low;
    j["t_high"] = pol.t_high;
  } else if (pol.kind == population::OptimalPolicy::Kind::TwoRegion) {
    j["w_star"] = pol.w_star;
  }
  j["value"] = population::value(spec, {cfg.quadrature_tolerance});

  population::PopulationSpec grid = spec;
  grid.score = discretize(spec.score, cfg.grid_atoms);
  grid.calibrated = false;
  j["brute_force_value"] = population::brute_force_value(grid).value;
  j["grid_tolerance"] = is_discrete(spec.score)
                            ? 0.0
                            : population::grid_resolution_bound(w, cfg.grid_atoms) +
                                  cfg.quadrature_tolerance;
  return j;
}

json to_json(const experiments::Diagnostics& d) {
  json bins = json::array();
  for (const auto& b : d.bins) {
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper},
                    {"count", b.count},
                    {"mean_w", b.mean_w},
                    {"frac_correct", b.frac_correct}});
  }
  return {{"count", d.count},
          {"sharpness_mean", d.sharpness_mean},
          {"sharpness_median", d.sharpness_median},
          {"sharpness_std", d.sharpness_std},
          {"mean_correct", d.mean_correct},
          {"mean_incorrect", d.mean_incorrect},
          {"separation", d.separation},
          {"base_accuracy", d.base_accuracy},
          {"brier", d.brier},
          {"calibration", bins}};
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto '" + path + "'");
  }
}

}  // namespace ssv::io
