#include <doctest.h>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "surroseq/error.hpp"
#include "surroseq/sequential_engine.hpp"

using namespace surroseq;

namespace {

EffectEstimate estimate(std::size_t look, double w) {
  EffectEstimate e;
  e.look = look;
  e.w_stat = w;
  e.delta_e = w;
  e.var_hat = 1.0;
  e.n_b0 = 10;
  e.n_b1 = 10;
  return e;
}

BoundarySet flat(double b, std::size_t looks) {
  BoundarySet s;
  s.family = ShapeFamily::pocock();
  s.fractions = equal_fractions(looks);
  s.efficacy.assign(looks, b);
  return s;
}

} // namespace

TEST_CASE("decision rule examples") {
  CHECK(decide(3.0, 2.5, std::nullopt, false) == Decision::reject);
  CHECK(decide(-3.0, 2.5, std::nullopt, false) == Decision::reject);
  CHECK(decide(1.5, 2.5, 2.0, false) == Decision::futility);
  CHECK(decide(2.0, 2.5, 2.0, false) == Decision::continue_monitoring);
  CHECK(decide(2.0, 2.0, 2.0, true) == Decision::reject);
  CHECK(decide(1.9, 2.0, 2.0, true) == Decision::fail_to_reject);
  CHECK(decide(0.1, 2.0, std::nullopt, true) == Decision::fail_to_reject);
}

TEST_CASE("state transitions and terminal behaviour") {
  const auto s0 = start_monitoring(flat(2.5, 3), AnalysisSchedule::identity(3));
  CHECK(s0.status == Status::active);
  CHECK(s0.next_look() == 1);
  const auto s1 = evaluate_analysis(s0, estimate(1, 1.0));
  CHECK(s1.status == Status::active);
  CHECK(s0.history.empty());
  CHECK(s1.history.size() == 1);
  const auto s2 = evaluate_analysis(s1, estimate(2, 3.0));
  CHECK(s2.status == Status::rejected);
  CHECK(s2.terminal_look().value() == 2);
  CHECK(s2.history.back().decision == Decision::reject);
  CHECK_THROWS_WITH_AS(evaluate_analysis(s2, estimate(3, 0.0)),
                       doctest::Contains("monitoring already terminated"), Error);
}

TEST_CASE("replaying or skipping analyses is rejected") {
  const auto s0 = start_monitoring(flat(2.5, 3), AnalysisSchedule::identity(3));
  const auto s1 = evaluate_analysis(s0, estimate(1, 1.0));
  CHECK_THROWS_WITH_AS(evaluate_analysis(s1, estimate(1, 1.0)),
                       doctest::Contains("analysis already recorded"), Error);
  CHECK_THROWS_WITH_AS(evaluate_analysis(s1, estimate(3, 1.0)),
                       doctest::Contains("out-of-order analysis"), Error);
}

TEST_CASE("last look without crossing fails to reject") {
  auto s = start_monitoring(flat(2.0, 2), AnalysisSchedule::identity(2));
  s = evaluate_analysis(s, estimate(1, 0.5));
  s = evaluate_analysis(s, estimate(2, 1.99));
  CHECK(s.status == Status::failed_to_reject);
  CHECK(s.history.back().decision == Decision::fail_to_reject);
}

TEST_CASE("futility stop and exact final boundary") {
  auto b = flat(2.0, 3);
  b.futility = std::vector<double>{0.0, 1.0, 2.0};
  auto s = start_monitoring(b, AnalysisSchedule::identity(3));
  s = evaluate_analysis(s, estimate(1, 0.1));
  CHECK(s.status == Status::active);
  const auto stop = evaluate_analysis(s, estimate(2, 0.5));
  CHECK(stop.status == Status::futility);
  CHECK(stop.history.back().futility_bound.value() == 1.0);
  auto go = evaluate_analysis(s, estimate(2, 1.0));
  CHECK(go.status == Status::active);
  go = evaluate_analysis(go, estimate(3, -2.0));
  CHECK(go.status == Status::rejected);
}

TEST_CASE("caller supplied boundary is recorded") {
  auto b = flat(100.0, 2);
  auto s = start_monitoring(b, AnalysisSchedule::identity(2));
  s = evaluate_analysis(s, estimate(1, 2.5), 2.4);
  CHECK(s.status == Status::rejected);
  CHECK(s.history[0].efficacy_bound == 2.4);
  CHECK(s.boundaries.efficacy[0] == 2.4);
  CHECK(s.used_efficacy_bounds() == std::vector<double>{2.4});
  auto fresh = start_monitoring(b, AnalysisSchedule::identity(2));
  CHECK_THROWS_AS(evaluate_analysis(fresh, estimate(1, 2.5), 0.0), Error);
  fresh = evaluate_analysis(fresh, estimate(1, 1.0), kUnattainable);
  CHECK(fresh.status == Status::active);
}

TEST_CASE("schedule and boundaries must agree") {
  CHECK_THROWS_AS(start_monitoring(flat(2.0, 3), AnalysisSchedule::identity(2)), Error);
}

TEST_CASE("state JSON round trip and replay determinism") {
  auto b = flat(2.5, 3);
  b.futility = std::vector<double>{0.0, 0.5, 2.5};
  auto s = start_monitoring(b, AnalysisSchedule::identity(3));
  s = evaluate_analysis(s, estimate(1, 1.2));
  const nlohmann::json j = s;
  const auto back = j.get<MonitoringState>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.history.size() == 1);
  CHECK(back.history[0].w_stat == 1.2);
  const auto x = evaluate_analysis(s, estimate(2, 2.7));
  const auto y = evaluate_analysis(back, estimate(2, 2.7));
  CHECK(nlohmann::json(x) == nlohmann::json(y));
  CHECK(j.at("schema_version") == MonitoringState::kSchemaVersion);

  auto bad = j;
  bad["schema_version"] = 99;
  CHECK_THROWS_AS(bad.get<MonitoringState>(), DataError);
}

TEST_CASE("run_full stops early and never asks for later snapshots") {
  const auto a = fixture::study_a(30, 30, 4, 4);
  const auto full = fixture::study_b(40, 40, 4, 9, 3.0);
  std::vector<std::size_t> requested;
  const auto source = [&](std::size_t j) {
    requested.push_back(j);
    return full.truncated(j);
  };
  BoundarySet b = flat(2.0, 4);
  const auto state = run_full(a, source, b, AnalysisSchedule::identity(4), {});
  REQUIRE(state.status == Status::rejected);
  CHECK(requested.size() == state.history.size());
  for (std::size_t i = 0; i < requested.size(); ++i) {
    CHECK(requested[i] == i + 1);
  }

  b.efficacy.assign(4, 1e6);
  requested.clear();
  const auto none = run_full(a, source, b, AnalysisSchedule::identity(4), {});
  CHECK(none.status == Status::failed_to_reject);
  CHECK(requested == std::vector<std::size_t>{1, 2, 3, 4});
}
