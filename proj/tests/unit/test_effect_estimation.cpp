#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "surroseq/effect_estimation.hpp"
#include "surroseq/error.hpp"
#include "surroseq/simulation.hpp"

using namespace surroseq;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

// Training points 10 apart with a tiny bandwidth: mu_hat at a training point
// is that point's outcome.
FittedConditionalMean lookup_table() {
  return FittedConditionalMean({0.0, 10.0, 20.0, 30.0}, {0.0, 2.0, 1.0, 3.0}, 0.1,
                               KernelKind::gaussian);
}

StudyBSnapshot snapshot(std::vector<double> control, std::vector<double> treated) {
  StudyBSnapshot b;
  b.j_obs = 1;
  int id = 0;
  for (double s : control) {
    b.subjects.push_back({"c" + std::to_string(++id), 0, {s}});
  }
  for (double s : treated) {
    b.subjects.push_back({"t" + std::to_string(++id), 1, {s}});
  }
  return b;
}

} // namespace

TEST_CASE("delta from given mu values") {
  FittedConditionalMean f({0.0, 10.0, 20.0}, {2.0, 3.0, 5.0}, 0.1, KernelKind::gaussian);
  const auto b = snapshot({0.0, 0.0}, {10.0, 20.0});
  CHECK(delta_e_at(f, b, 1) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("identical arms give exactly zero") {
  const auto a = fixture::study_a(20, 20, 2, 3);
  const auto f = fit_mu(a, 0, 1, {});
  const auto b = snapshot({3.0, 4.5, 6.0}, {6.0, 3.0, 4.5});
  CHECK(delta_e_at(f, b, 1) == 0.0);
  CHECK(w_stat_at(f, b, 1).w_stat == 0.0);
}

TEST_CASE("variance from given mu values uses population moments") {
  const auto f = lookup_table();
  // control mu = (0, 2), treated mu = (1, 3)
  const auto b = snapshot({0.0, 10.0}, {20.0, 30.0});
  CHECK(var_hat_at(f, b, 1) == doctest::Approx(1.0).epsilon(1e-14));
  const auto est = w_stat_at(f, b, 1);
  CHECK(est.delta_e == doctest::Approx(1.0));
  CHECK(est.w_stat == doctest::Approx(1.0));
  CHECK(est.n_b0 == 2);
  CHECK(est.n_b1 == 2);
  CHECK(est.look == 1);
}

TEST_CASE("constant mu values are a degenerate variance") {
  const auto f = lookup_table();
  const auto b = snapshot({10.0, 10.0}, {10.0, 10.0});
  try {
    w_stat_at(f, b, 1);
    FAIL("expected an error");
  } catch (const NumericalError &e) {
    CHECK(std::string(e.what()).find("degenerate variance") != std::string::npos);
  }
  CHECK_THROWS_AS(var_hat_at(f, snapshot({0.0}, {10.0, 20.0}), 1), DataError);
}

TEST_CASE("kernel failures name the subject") {
  const auto f = lookup_table();
  const auto b = snapshot({0.0, 500.0}, {10.0, 20.0});
  try {
    delta_e_at(f, b, 1);
    FAIL("expected an error");
  } catch (const NumericalError &e) {
    const std::string msg = e.what();
    CHECK(msg.find("no effective neighbors at query point") != std::string::npos);
    CHECK(msg.find("c2") != std::string::npos);
  }
  CHECK_THROWS_AS(delta_e_at(f, b, 2), DataError);
}

TEST_CASE("delta and variance match the double-loop oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto a = fixture::study_a(15, 15, 2, seed);
    const auto b6 = fixture::study_b(3, 3, 2, seed + 10, 0.7);
    const auto b20 = fixture::study_b(10, 10, 2, seed + 20, 0.4);
    for (std::size_t j = 1; j <= 2; ++j) {
      const auto f = fit_mu(a, 0, j, {});
      const auto s = a.surrogate_column(0, j);
      const auto y = a.outcomes(0);
      CHECK(rel_err(delta_e_at(f, b6, j),
                    oracle::delta(s, y, f.bandwidth(), b6.surrogate_column(0, j),
                                  b6.surrogate_column(1, j))) < 1e-12);
      CHECK(rel_err(var_hat_at(f, b20, j),
                    oracle::var_hat(s, y, f.bandwidth(), b20.surrogate_column(0, j),
                                    b20.surrogate_column(1, j))) < 1e-12);
    }
  }
}

TEST_CASE("swapping Study B labels negates delta and W, keeps the variance") {
  const auto a = fixture::study_a(25, 25, 1, 8);
  const auto f = fit_mu(a, 0, 1, {});
  auto b = fixture::study_b(12, 9, 1, 4, 0.8);
  const auto before = w_stat_at(f, b, 1);
  for (auto &s : b.subjects) {
    s.group = 1 - s.group;
  }
  const auto after = w_stat_at(f, b, 1);
  CHECK(after.delta_e == doctest::Approx(-before.delta_e).epsilon(1e-12));
  CHECK(after.w_stat == doctest::Approx(-before.w_stat).epsilon(1e-12));
  CHECK(after.var_hat == doctest::Approx(before.var_hat).epsilon(1e-12));
}

TEST_CASE("outcome rescaling leaves W unchanged") {
  auto a = fixture::study_a(25, 25, 1, 8);
  const auto b = fixture::study_b(12, 9, 1, 4, 0.8);
  const double w = w_stat_at(fit_mu(a, 0, 1, {}), b, 1).w_stat;
  for (auto &s : a.subjects) {
    s.outcome = 3.5 * s.outcome + 2.0;
  }
  CHECK(w_stat_at(fit_mu(a, 0, 1, {}), b, 1).w_stat == doctest::Approx(w).epsilon(1e-10));
}

TEST_CASE("design covariance matches the double-loop oracle") {
  const auto a = fixture::study_a(30, 30, 3, 77);
  const auto schedule = AnalysisSchedule::identity(3);
  const double n_b0 = 40.0;
  const double n_b1 = 55.0;
  const auto model = build_correlation_model(a, schedule, n_b0, n_b1, {});

  std::vector<std::vector<double>> m[2];
  std::vector<double> h(3);
  for (std::size_t j = 1; j <= 3; ++j) {
    h[j - 1] = oracle::bandwidth(a.surrogate_column(0, j));
  }
  for (const auto &subject : a.subjects) {
    std::vector<double> row;
    for (std::size_t j = 1; j <= 3; ++j) {
      row.push_back(oracle::mu(a.surrogate_column(0, j), a.outcomes(0), h[j - 1], true,
                               subject.surrogates[j - 1]));
    }
    m[subject.group].push_back(row);
  }
  const auto c0 = oracle::arm_covariance(m[0]);
  const auto c1 = oracle::arm_covariance(m[1]);
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      const double expected = c0[j][k] / n_b0 + c1[j][k] / n_b1;
      CHECK(rel_err(model.sigma_tilde(j, k), expected) < 1e-10);
      const double corr = expected / std::sqrt((c0[j][j] / n_b0 + c1[j][j] / n_b1) *
                                               (c0[k][k] / n_b0 + c1[k][k] / n_b1));
      CHECK(std::abs(model.corr(j, k) - corr) < 1e-10);
    }
    CHECK(model.corr(j, j) == 1.0);
  }
  CHECK((model.sqrt_corr * model.sqrt_corr.transpose() - model.corr).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((model.sqrt_corr - model.sqrt_corr.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(model.looks == 3);
  CHECK(model.n_b0 == n_b0);
}

TEST_CASE("single analysis gives the unit correlation") {
  const auto a = fixture::study_a(10, 10, 2, 5);
  const auto model = build_correlation_model(a, AnalysisSchedule::identity(1), 10, 10, {});
  CHECK(model.corr.rows() == 1);
  CHECK(model.corr(0, 0) == 1.0);
  CHECK(model.sqrt_corr(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("duplicated surrogate columns give a rank one model") {
  auto a = fixture::study_a(20, 20, 2, 5);
  for (auto &s : a.subjects) {
    s.surrogates[1] = s.surrogates[0];
  }
  const auto model = build_correlation_model(a, AnalysisSchedule::identity(2), 10, 10, {});
  CHECK(model.corr(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((model.sqrt_corr * model.sqrt_corr.transpose() - model.corr).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("the column map routes analyses to Study A columns") {
  const auto a = fixture::study_a(20, 20, 3, 5);
  AnalysisSchedule s;
  s.analysis_times = {16, 24};
  s.study_a_column = {3, 3};
  const auto model = build_correlation_model(a, s, 10, 10, {});
  CHECK(model.corr(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("covariance without independent increments is representable") {
  DgpSpec dgp;
  dgp.n_a0 = dgp.n_a1 = 200;
  dgp.looks = 4;
  const auto a = generate_study_a(dgp, 3);
  const auto model = build_correlation_model(a, AnalysisSchedule::identity(4), 400, 400, {});
  // Independent increments would force cov(j, j') = var(j) for j < j'.
  bool differs = false;
  for (int j = 0; j < 4; ++j) {
    for (int k = j + 1; k < 4; ++k) {
      differs = differs ||
                std::abs(model.sigma_tilde(j, k) - model.sigma_tilde(j, j)) >
                    1e-3 * model.sigma_tilde(j, j);
    }
  }
  CHECK(differs);
}

TEST_CASE("PSD repair and rejection") {
  Eigen::MatrixXd near(2, 2);
  near << 1.0, 1.0 + 1e-12, 1.0 + 1e-12, 1.0;
  const auto repaired = correlation_from_covariance(near);
  CHECK(repaired.corr(0, 0) == 1.0);
  CHECK(repaired.corr(1, 1) == 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(repaired.corr);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-12);

  Eigen::MatrixXd bad(3, 3);
  bad << 1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0;
  try {
    correlation_from_covariance(bad);
    FAIL("expected an error");
  } catch (const NumericalError &e) {
    CHECK(std::string(e.what()).find("correlation estimate not PSD") != std::string::npos);
  }
}

TEST_CASE("correlation model JSON round trip and prefix") {
  const auto a = fixture::study_a(20, 20, 3, 5);
  const auto model = build_correlation_model(a, AnalysisSchedule::identity(3), 30, 40,
                                             {KernelKind::gaussian, 1.5});
  const nlohmann::json j = model;
  const auto back = j.get<CorrelationModel>();
  CHECK(back.looks == 3);
  CHECK(back.n_b1 == 40.0);
  CHECK(back.kernel.bandwidth.value() == 1.5);
  CHECK((back.corr - model.corr).cwiseAbs().maxCoeff() == 0.0);
  const auto p = model.prefix(2);
  CHECK(p.looks == 2);
  CHECK(p.corr(0, 1) == model.corr(0, 1));
  CHECK((p.sqrt_corr * p.sqrt_corr.transpose() - p.corr).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Study B based correlation over observed looks") {
  const auto a = fixture::study_a(25, 25, 3, 5);
  const auto fits = fit_schedule(a, AnalysisSchedule::identity(3), {});
  const auto b = fixture::study_b(20, 20, 2, 6, 0.3);
  const auto model = build_study_b_correlation(fits, b);
  CHECK(model.looks == 2);
  CHECK(model.n_b0 == 20.0);
  CHECK(model.corr(0, 0) == 1.0);
  CHECK(std::abs(model.corr(0, 1)) <= 1.0);
}
