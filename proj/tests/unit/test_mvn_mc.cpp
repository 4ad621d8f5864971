#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "surroseq/error.hpp"
#include "surroseq/mvn_mc.hpp"

using namespace surroseq;

TEST_CASE("counter generator is a pure function of key, stream and position") {
  CounterRng a(7, 3);
  CounterRng b(7, 3);
  CounterRng c(7, 4);
  CounterRng d(8, 3);
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
  }
}

TEST_CASE("derived seeds do not collide") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    seen.insert(derive_seed(20240101, i));
  }
  CHECK(seen.size() == 10000);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("parallel_for covers the range exactly once") {
  for (unsigned workers : {1u, 2u, 3u, 8u}) {
    std::vector<int> hits(101, 0);
    parallel_for(hits.size(), workers, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        ++hits[i];
      }
    });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  CHECK_THROWS_AS(parallel_for(10, 2, [](std::size_t, std::size_t) { throw Error("boom"); }),
                  Error);
}

TEST_CASE("upper quantile is the ceil((1 - alpha) B)-th order statistic") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  std::reverse(v.begin(), v.end());
  CHECK(upper_alpha_quantile(v, 0.05) == 95.0);
  CHECK(upper_alpha_quantile(v, 0.5) == 50.0);
  CHECK(upper_alpha_quantile(v, 0.051) == 95.0);
  CHECK(upper_alpha_quantile({3.0}, 0.05) == 3.0);
  CHECK_THROWS_AS(upper_alpha_quantile({}, 0.05), Error);
  CHECK_THROWS_AS(upper_alpha_quantile(v, 0.0), Error);
}

TEST_CASE("draws are reproducible and independent of the worker count") {
  Eigen::MatrixXd root = Eigen::MatrixXd::Identity(3, 3);
  root(0, 1) = root(1, 0) = 0.3;
  const auto one = sample_correlated(root, {5000, 42, 1});
  const auto four = sample_correlated(root, {5000, 42, 4});
  const auto again = sample_correlated(root, {5000, 42, 1});
  const auto other = sample_correlated(root, {5000, 43, 1});
  bool same = true;
  bool differs = false;
  for (std::size_t k = 0; k < one.count(); ++k) {
    for (std::size_t d = 0; d < 3; ++d) {
      same = same && one.draw(k)[d] == four.draw(k)[d] && one.draw(k)[d] == again.draw(k)[d];
      differs = differs || one.draw(k)[d] != other.draw(k)[d];
    }
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("draws have the requested correlation") {
  Eigen::MatrixXd corr(2, 2);
  corr << 1.0, 0.6, 0.6, 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  const Eigen::MatrixXd root = eig.eigenvectors() *
                               eig.eigenvalues().cwiseSqrt().asDiagonal() *
                               eig.eigenvectors().transpose();
  const auto draws = sample_correlated(root, {200000, 9, 1});
  double m0 = 0, m1 = 0, v0 = 0, v1 = 0, c = 0;
  const double n = static_cast<double>(draws.count());
  for (std::size_t k = 0; k < draws.count(); ++k) {
    const auto x = draws.draw(k);
    m0 += x[0];
    m1 += x[1];
    v0 += x[0] * x[0];
    v1 += x[1] * x[1];
    c += x[0] * x[1];
  }
  CHECK(std::abs(m0 / n) < 0.01);
  CHECK(std::abs(m1 / n) < 0.01);
  CHECK(v0 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(v1 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(c / n == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("identity correlation: max |X_j| quantile matches the Sidak value") {
  const std::size_t looks = 3;
  const auto draws =
      sample_correlated(Eigen::MatrixXd::Identity(looks, looks), {400000, 2024, 1});
  const auto maxima = map_draws(draws, 1, [](std::span<const double> x) {
    double m = 0.0;
    for (double v : x) {
      m = std::max(m, std::abs(v));
    }
    return m;
  });
  CHECK(upper_alpha_quantile(maxima, 0.05) ==
        doctest::Approx(oracle::sidak(0.05, looks)).epsilon(0.005));
}

TEST_CASE("event probability and its standard error") {
  const Eigen::MatrixXd root = Eigen::MatrixXd::Identity(1, 1);
  const auto est = event_probability(
      root, [](std::span<const double> x) { return std::abs(x[0]) >= 1.959963984540054; },
      {400000, 5, 2});
  CHECK(std::abs(est.p - 0.05) < 4 * est.se);
  CHECK(est.se == doctest::Approx(std::sqrt(est.p * (1 - est.p) / 400000.0)));
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS((McConfig{999, 1, 1}.validate()), Error);
  CHECK_THROWS_AS((McConfig{1000, 1, 0}.validate()), Error);
  CHECK_NOTHROW((McConfig{1000, 1, 1}.validate()));
}
