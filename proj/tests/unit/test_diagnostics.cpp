#include <doctest.h>

#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "surroseq/diagnostics.hpp"
#include "surroseq/error.hpp"

using namespace surroseq;

namespace {

// One column; Y = slope * S + effect * g + small noise.
StudyADataset synthetic(std::size_t n, double slope, double effect, double s_shift,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> e(0.0, 0.1);
  StudyADataset a;
  a.schedule_times = {1.0};
  for (int g = 0; g < 2; ++g) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = u(rng) + g * s_shift;
      a.subjects.push_back({"s" + std::to_string(g) + "_" + std::to_string(i), g,
                            slope * s + effect * g + e(rng), {s}});
    }
  }
  return a;
}

FittedConditionalMean line(double slope, double offset) {
  std::vector<double> s;
  std::vector<double> y;
  for (int i = 0; i <= 100; ++i) {
    s.push_back(i / 10.0);
    y.push_back(slope * i / 10.0 + offset);
  }
  return {s, y, 0.3, KernelKind::gaussian};
}

} // namespace

TEST_CASE("C1 monotone and anti-monotone") {
  const auto up = check_c1_monotone(line(1.0, 0.0));
  CHECK(up.violation_fraction == 0.0);
  CHECK(up.status == CheckStatus::pass);
  CHECK(up.grid.size() == 100);
  const auto down = check_c1_monotone(line(-1.0, 0.0));
  CHECK(down.violation_fraction > 0.95);
  CHECK(down.status == CheckStatus::fail);
}

TEST_CASE("C1 drops grid points outside the effective support") {
  FittedConditionalMean f({0.0, 0.01, 10.0}, {0.0, 0.1, 1.0}, 0.05, KernelKind::epanechnikov);
  const auto c = check_c1_monotone(f, 50);
  CHECK(c.dropped_grid_points > 0);
  CHECK(c.grid.size() + c.dropped_grid_points == 50);
  CHECK_THROWS_AS(check_c1_monotone(f, 1), Error);
}

TEST_CASE("C1 on noisy monotone data is pinned") {
  const auto a = synthetic(200, 1.0, 0.0, 0.0, 2024);
  const auto c = check_c1_monotone(fit_mu(a, 0, 1, {}));
  CHECK(c.violation_fraction <= 0.05);
  CHECK(c.status != CheckStatus::fail);
}

TEST_CASE("C2 dominance") {
  const auto same = check_c2_dominance(line(1.0, 0.0), line(1.0, 0.0), 0.01);
  CHECK(same.min_gap == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(same.status == CheckStatus::pass);
  const auto up = check_c2_dominance(line(1.0, 0.0), line(1.0, 1.0), 0.01);
  CHECK(up.min_gap == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(up.status == CheckStatus::pass);
  const auto down = check_c2_dominance(line(1.0, 0.0), line(1.0, -1.0), 0.01);
  CHECK(down.min_gap == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(down.status == CheckStatus::fail);
  const auto slight = check_c2_dominance(line(1.0, 0.0), line(1.0, -0.001), 0.01);
  CHECK(slight.status == CheckStatus::warn);
}

TEST_CASE("C2 exchangeable arms pass at a moderate tolerance") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto a = synthetic(150, 1.0, 0.0, 0.0, seed);
    const auto c = check_c2_dominance(fit_mu(a, 0, 1, {}), fit_mu(a, 1, 1, {}), 0.5);
    CHECK(c.status != CheckStatus::fail);
  }
}

TEST_CASE("C3 empirical survival") {
  const std::vector<double> s0{1, 2, 3, 4, 5};
  std::vector<double> up;
  std::vector<double> down;
  for (double v : s0) {
    up.push_back(v + 1);
    down.push_back(v - 1);
  }
  CHECK(empirical_survival(s0, 2.0) == doctest::Approx(0.6));
  CHECK(check_c3_stochastic_dominance(s0, s0).max_violation == 0.0);
  const auto u = check_c3_stochastic_dominance(s0, up);
  CHECK(u.max_violation == 0.0);
  CHECK(u.status == CheckStatus::pass);
  // Survival gap of a unit shift on 1..5 is 1/5 at every step.
  const auto d = check_c3_stochastic_dominance(s0, down, 0.1);
  CHECK(d.max_violation == doctest::Approx(0.2));
  CHECK(d.fail_threshold == doctest::Approx(0.1 * std::sqrt(10.0 / 25.0)));
  CHECK(d.status == CheckStatus::fail);
  std::vector<double> far;
  for (double v : s0) {
    far.push_back(v - 10);
  }
  CHECK(check_c3_stochastic_dominance(s0, far).max_violation == 1.0);
  CHECK_THROWS_AS(check_c3_stochastic_dominance(s0, {}), Error);
}

TEST_CASE("C4 proportion explained") {
  // Treatment moves S; Y depends on S only.
  const auto mediated = synthetic(300, 1.0, 0.0, 2.0, 5);
  const auto m = check_c4_proportion_explained(mediated, 1, {});
  CHECK(m.r > 0.8);
  CHECK(m.status == CheckStatus::pass);
  // Treatment moves Y directly, S unchanged.
  const auto direct = synthetic(300, 1.0, 2.0, 0.0, 5);
  const auto d = check_c4_proportion_explained(direct, 1, {});
  CHECK(std::abs(d.r) < 0.2);
  CHECK(d.status == CheckStatus::fail);

  StudyADataset zero;
  zero.schedule_times = {1.0};
  zero.subjects = {{"a", 0, 1.0, {1.0}}, {"b", 0, 3.0, {2.0}}, {"c", 1, 2.0, {1.5}},
                   {"d", 1, 2.0, {2.5}}};
  CHECK(check_c4_proportion_explained(zero, 1, {}).status == CheckStatus::undefined);
}

TEST_CASE("full report with Study B and curves") {
  const auto a = fixture::study_a(60, 60, 3, 4);
  auto b = fixture::study_b(30, 30, 2, 8, 0.5);
  b.subjects[0].surrogates[0] = 1000.0;
  const auto report = diagnose(a, &b, AnalysisSchedule::identity(3), {});
  REQUIRE(report.analyses.size() == 3);
  CHECK(report.analyses[0].c5.has_value());
  CHECK(report.analyses[0].c5->status == CheckStatus::fail);
  CHECK(report.analyses[0].c5->fraction == doctest::Approx(1.0 / 60.0));
  CHECK(report.analyses[0].c3_study_b.has_value());
  CHECK(!report.analyses[2].c3_study_b.has_value());
  CHECK(report.analyses[2].c1.has_value());
  CHECK(report.analyses[2].c4.has_value());

  const nlohmann::json j = report;
  CHECK(j.dump().find("C5") != std::string::npos);

  std::ostringstream curves;
  write_diagnostic_curves(curves, a, AnalysisSchedule::identity(3), {}, 10);
  const auto text = curves.str();
  CHECK(text.rfind("j,study_a_column,s,mu_hat_0,mu_hat_1,survival_0,survival_1", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 31);
}

TEST_CASE("checks are row-order invariant") {
  auto a = synthetic(100, 1.0, 0.5, 1.0, 12);
  const auto before = check_c4_proportion_explained(a, 1, {});
  std::mt19937_64 rng(3);
  std::shuffle(a.subjects.begin(), a.subjects.end(), rng);
  const auto after = check_c4_proportion_explained(a, 1, {});
  CHECK(after.r == doctest::Approx(before.r).epsilon(1e-12));
}
