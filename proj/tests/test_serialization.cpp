#include <sstream>

#include "doctest.h"
#include "ssv/error.hpp"
#include "ssv/serialization.hpp"

using namespace ssv;
using namespace ssv::io;

TEST_CASE("default config round-trips through JSON") {
  const Config c;
  CHECK(config_from_json(to_json(c)) == c);
  CHECK(config_from_json(json::object()) == c);
}

TEST_CASE("every stream variant round-trips") {
  std::vector<streams::StreamSpec> specs{
      {streams::Calibrated{dist::Beta{2, 3}}, 1},
      {streams::Miscalibrated{dist::Uniform{}, streams::Link::power(2)}, 2},
      {streams::Miscalibrated{dist::Uniform{}, streams::Link::affine(0.1, 0.5)}, 2},
      streams::preset("drift"),
      streams::preset_math_like(streams::Level::Medium, 77),
      streams::preset_math_like_calibrated(streams::Level::Hard),
      {streams::Stepwise{}, 9},
      {streams::Calibrated{dist::Grid{{0.2, 0.7}, {0.25, 0.75}}}, 3},
  };
  for (const auto& s : specs) {
    const auto back = stream_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
  }
}

TEST_CASE("presets expand and accept patches") {
  const auto s = stream_from_json(json{{"preset", "math_easy"}, {"problems", 123}, {"seed", 5}});
  const auto& b = std::get<streams::BestOfN>(s.variant);
  CHECK(b.problems == 123);
  CHECK(s.seed == 5);
}

TEST_CASE("unknown keys and wrong types are validation errors") {
  CHECK_THROWS_AS(config_from_json(json{{"polcy", json::object()}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"policy", {{"alpha", "high"}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"policy", {{"alpah", 0.1}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"stream", {{"type", "calibrated"}, {"score", {{"family", "gamma"}}}}}}),
                  ValidationError);
  try {
    config_from_json(json{{"policy", {{"q_accept", 0.0}}}});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "q_accept");
  }
}

TEST_CASE("overrides") {
  json doc = to_json(Config{});
  apply_override(doc, "alpha=0.05");
  apply_override(doc, "policy.eta=0.01");
  apply_override(doc, "q=0.2");
  apply_override(doc, "T=77");
  const Config c = config_from_json(doc);
  CHECK(c.run.policy.alpha == 0.05);
  CHECK(c.run.policy.eta == 0.01);
  CHECK(c.run.policy.q_accept == 0.2);
  CHECK(c.run.policy.q_reject == 0.2);
  CHECK(c.run.horizon == 77u);

  apply_override(doc, "preset=math_hard");
  const Config h = config_from_json(doc);
  CHECK(h.run.stream.reactive());
  CHECK_FALSE(h.run.horizon.has_value());

  CHECK_THROWS_AS(apply_override(doc, "nonsense=1"), ValidationError);
  CHECK_THROWS_AS(apply_override(doc, "policy.nonsense=1"), ValidationError);
  CHECK_THROWS_AS(apply_override(doc, "alpha"), ValidationError);
}

TEST_CASE("records round-trip") {
  DecisionRecord r;
  r.t = 12;
  r.w = WeakScore(0.123456789012345);
  r.region = Region::Accept;
  r.action = Action::StrongVerify;
  r.q_t = 0.1;
  r.explored = true;
  r.g_observed = StrongLabel(0);
  r.thresholds_before = {0.1, 0.2};
  r.thresholds_after = {0.1, 0.65000000000000013};
  const auto [back, g] = record_from_json(json::parse(record_to_json(r, StrongLabel(0)).dump()));
  CHECK(back == r);
  CHECK(g == StrongLabel(0));
  CHECK_THROWS_AS(record_from_json(json{{"t", 1}}), FormatError);
}

TEST_CASE("sweep CSV round-trips") {
  std::vector<experiments::ParetoPoint> pts(3);
  pts[0].alpha = 0.1;
  pts[0].beta = 0.3;
  pts[0].accuracy = 0.9876543210123;
  pts[0].accuracy_stderr = 1.0 / 3.0;
  pts[0].err1 = 0.01;
  pts[0].err2 = 0.02;
  pts[0].reps = 20;
  pts[1].is_oracle = true;
  pts[1].err1 = 0.0;
  pts[1].err2 = 0.0;
  pts[2].is_weak_only = true;
  pts[2].weak_per_problem = 4;
  std::stringstream ss;
  write_sweep_csv(ss, pts);
  CHECK(read_sweep_csv(ss) == pts);

  std::stringstream bad("alpha,beta\n1,2\n");
  CHECK_THROWS_AS(read_sweep_csv(bad), FormatError);
}

TEST_CASE("shortest round-trip doubles") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456.789, 0.0}) {
    CHECK(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("malformed traces") {
  std::stringstream empty("");
  CHECK_THROWS_AS(read_trace(empty), FormatError);
  std::stringstream junk("not json\n");
  CHECK_THROWS_AS(read_trace(junk), FormatError);
  std::stringstream orphan(R"({"t":1})" "\n");
  CHECK_THROWS_AS(read_trace(orphan), FormatError);
}
