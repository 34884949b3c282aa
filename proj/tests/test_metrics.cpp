#include <cmath>

#include "doctest.h"
#include "ssv/error.hpp"
#include "ssv/metrics.hpp"

using namespace ssv;

namespace {

DecisionRecord make(double w, Action a, Thresholds th, std::optional<int> g = {}) {
  DecisionRecord r;
  r.w = WeakScore(w);
  r.action = a;
  r.region = classify(r.w, th);
  r.thresholds_before = th;
  r.thresholds_after = th;
  if (g) r.g_observed = StrongLabel(*g);
  return r;
}

const Thresholds kTh{0.1, 0.9};

}  // namespace

TEST_CASE("record unfolds the definitions") {
  ErrorLedger l;
  l.record(make(0.95, Action::Accept, kTh), StrongLabel(0));
  CHECK(l.type1_policy == 1);
  CHECK(l.type1_threshold == 1);
  CHECK(l.n0 == 1);

  ErrorLedger m;
  m.record(make(0.5, Action::StrongVerify, kTh, 1), StrongLabel(1));
  CHECK(m.n1 == 1);
  CHECK(m.sv_count == 1);
  CHECK(m.type1_policy + m.type2_policy + m.type1_threshold + m.type2_threshold == 0);

  ErrorLedger k;
  k.record(make(0.95, Action::StrongVerify, kTh, 0), StrongLabel(0));
  CHECK(k.type1_threshold == 1);
  CHECK(k.type1_policy == 0);
}

TEST_CASE("observed label must match latent label") {
  ErrorLedger l;
  CHECK_THROWS_AS(l.record(make(0.5, Action::StrongVerify, kTh, 1), StrongLabel(0)),
                  ConsistencyError);
}

TEST_CASE("empty ledger rates are zero") {
  const ErrorLedger l;
  CHECK(err_type1(l) == 0.0);
  CHECK(err_type2(l) == 0.0);
  CHECK(sv_rate(l) == 0.0);
  CHECK(err_type1_threshold(l) == 0.0);
  CHECK(err_type2_threshold(l) == 0.0);
}

TEST_CASE("all-wrong accepts") {
  ErrorLedger l;
  l.n0 = 4;
  l.type1_policy = 4;
  l.total = 4;
  CHECK(err_type1(l) == 1.0);
}

TEST_CASE("six-round hand trace") {
  ErrorLedger l;
  l.record(make(0.95, Action::Accept, kTh), StrongLabel(0));          // type-I
  l.record(make(0.95, Action::Accept, kTh), StrongLabel(1));
  l.record(make(0.05, Action::Reject, kTh), StrongLabel(1));          // type-II
  l.record(make(0.05, Action::Reject, kTh), StrongLabel(1));          // type-II
  l.record(make(0.5, Action::StrongVerify, kTh, 0), StrongLabel(0));
  l.record(make(0.05, Action::StrongVerify, kTh, 0), StrongLabel(0));
  CHECK(l.n0 == 3);
  CHECK(l.n1 == 3);
  CHECK(l.total == 6);
  CHECK(err_type1(l) == doctest::Approx(1.0 / 3));
  CHECK(err_type2(l) == doctest::Approx(2.0 / 3));
  CHECK(sv_rate(l) == doctest::Approx(1.0 / 3));
}

TEST_CASE("ledger merge is componentwise") {
  ErrorLedger a, b, c;
  a.record(make(0.95, Action::Accept, kTh), StrongLabel(0));
  b.record(make(0.05, Action::Reject, kTh), StrongLabel(1));
  c.record(make(0.5, Action::StrongVerify, kTh, 1), StrongLabel(1));
  CHECK((a + b) + c == a + (b + c));
  CHECK(a + b == b + a);
  const ErrorLedger s = a + b + c;
  CHECK(s.total == 3);
  CHECK(s.n0 + s.n1 == s.total);
}

TEST_CASE("delta bound") {
  CHECK(delta_bound({0, 0.05, 0.05, 0.1}) == 0.0);
  // 0.04 + 0.29604 + 0.01461
  CHECK(delta_bound({1000, 0.05, 0.05, 0.1}) == doctest::Approx(0.35065).epsilon(1e-4));
  CHECK(delta_bound({10000, 0.05, 0.05, 0.1}) < delta_bound({1000, 0.05, 0.05, 0.1}));
  CHECK_THROWS_AS(delta_bound({10, 0.0, 0.05, 0.1}), ValidationError);
}

TEST_CASE("delta bound matches an independent evaluation on a grid") {
  auto oracle = [](double n, double delta, double eta, double q) {
    const double l = std::log(4.0) - std::log(delta);
    const double first = 1.0 / (eta * n) + 2.0 / (q * n);
    const double second = std::sqrt(2.0 * l) / std::sqrt(n * q);
    const double third = l / (3.0 * n * q);
    return third + second + first;
  };
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t n = 1 + static_cast<std::uint64_t>(i) * 977;
    const double delta = 0.01 + 0.009 * (i % 10);
    const double eta = 0.005 + 0.01 * (i % 7);
    const double q = 0.05 + 0.09 * (i % 11);
    CHECK(std::abs(delta_bound({n, delta, eta, q}) - oracle(n, delta, eta, q)) <= 1e-12);
  }
}
