#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ssv/experiments.hpp"
#include "ssv/population.hpp"

namespace ssv::io {

using nlohmann::json;

inline constexpr int kTraceVersion = 1;

struct PopulationConfig {
  ScoreDistribution score = dist::Uniform{};
  /// Empty means calibrated: alpha1 = E[W].
  std::optional<double> alpha1;
  std::vector<std::pair<double, double>> pairs{{2.0, 2.0}};
  std::size_t grid_atoms = 1001;
  double quadrature_tolerance = 1e-9;
  friend bool operator==(const PopulationConfig&, const PopulationConfig&) = default;
};

struct SweepConfig {
  std::vector<experiments::Target> targets{
      {0.01, 0.01}, {0.05, 0.05}, {0.1, 0.1}, {0.2, 0.2}, {0.3, 0.3}};
  bool anchors = true;
  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct DiagnoseConfig {
  std::uint64_t samples = 100000;
  std::size_t bins = 20;
  friend bool operator==(const DiagnoseConfig&, const DiagnoseConfig&) = default;
};

/// Everything a CLI invocation can be configured with.
struct Config {
  experiments::RunSpec run;
  double delta = 0.05;
  SweepConfig sweep;
  PopulationConfig population;
  DiagnoseConfig diagnose;

  void validate() const;
  friend bool operator==(const Config&, const Config&) = default;
};

// Conversions. Readers reject unknown keys and wrong types with
// ValidationError naming the dotted field.
json to_json(const ScoreDistribution& d);
ScoreDistribution distribution_from_json(const json& j, const std::string& field);
json to_json(const PolicyConfig& c);
PolicyConfig policy_from_json(const json& j);
json to_json(const streams::StreamSpec& s);
streams::StreamSpec stream_from_json(const json& j);
json to_json(const Config& c);
Config config_from_json(const json& j);

/// Applies `key=value`. Keys are dotted paths into the normalized config
/// document or one of the short aliases (alpha, beta, eta, q, horizon,
/// reps, seed, delta, preset, problems, samples). The value is read as JSON
/// when it parses, otherwise as a string.
void apply_override(json& doc, const std::string& assignment);

/// Reads an optional config file, normalizes it, then applies overrides.
/// IoError when the file is unreadable, FormatError when it is not JSON.
Config load_config(const std::optional<std::string>& path,
                   const std::vector<std::string>& overrides);

std::vector<std::string> override_aliases();

// ---- traces ----

json record_to_json(const DecisionRecord& rec, StrongLabel g_latent);
std::pair<DecisionRecord, StrongLabel> record_from_json(const json& j);

json trace_summary(const experiments::Trace& trace, double delta);

/// Header line, one line per round, summary line.
void write_trace(std::ostream& os, const Config& config, const experiments::Trace& trace);

struct TraceBlock {
  json header;
  PolicyConfig policy;
  std::vector<DecisionRecord> records;
  std::vector<StrongLabel> latent;
  std::optional<json> summary;
};

/// FormatError on malformed lines.
std::vector<TraceBlock> read_trace(std::istream& is);

// ---- sweep tables ----

std::vector<std::string> sweep_columns();
void write_sweep_csv(std::ostream& os, const std::vector<experiments::ParetoPoint>& points);
std::vector<experiments::ParetoPoint> read_sweep_csv(std::istream& is);
json to_json(const experiments::ParetoPoint& p);

json to_json(const experiments::JobResult& j);
experiments::JobResult job_from_json(const json& j);

// ---- population and diagnostics ----

json population_line(double lambda1, double lambda2, const PopulationConfig& cfg);
json to_json(const experiments::Diagnostics& d);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace ssv::io
