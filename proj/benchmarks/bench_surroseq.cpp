#include <random>

#include <benchmark/benchmark.h>

#include "surroseq/boundaries.hpp"
#include "surroseq/effect_estimation.hpp"
#include "surroseq/kernel_regression.hpp"
#include "surroseq/mvn_mc.hpp"

namespace {

surroseq::FittedConditionalMean fitted(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::vector<double> s(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = z(rng);
    y[i] = 2.0 + s[i] + z(rng);
  }
  const double h = surroseq::auto_bandwidth(s);
  return {s, y, h, surroseq::KernelKind::gaussian};
}

surroseq::CorrelationModel brownian(std::size_t looks) {
  Eigen::MatrixXd c(looks, looks);
  for (std::size_t i = 0; i < looks; ++i) {
    for (std::size_t k = 0; k < looks; ++k) {
      c(i, k) = static_cast<double>(std::min(i, k) + 1);
    }
  }
  return surroseq::correlation_from_covariance(c);
}

void BM_EvaluateMu(benchmark::State &state) {
  const auto f = fitted(static_cast<std::size_t>(state.range(0)));
  double q = -1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(surroseq::evaluate_mu(f, q));
    q = q > 1.0 ? -1.0 : q + 0.01;
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EvaluateMu)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oN);

void BM_SampleCorrelated(benchmark::State &state) {
  const auto model = brownian(8);
  const surroseq::McConfig cfg{static_cast<std::size_t>(state.range(0)), 7, 1};
  for (auto _ : state) {
    auto draws = surroseq::sample_correlated(model.sqrt_corr, cfg);
    benchmark::DoNotOptimize(draws.draw(0).data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleCorrelated)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_CalibrateEfficacy(benchmark::State &state) {
  const auto model = brownian(8);
  const surroseq::McConfig cfg{static_cast<std::size_t>(state.range(0)), 7, 1};
  for (auto _ : state) {
    auto b = surroseq::calibrate_efficacy(model, surroseq::ShapeFamily::obrien_fleming(), 0.05, cfg);
    benchmark::DoNotOptimize(b.constant_b);
  }
}
BENCHMARK(BM_CalibrateEfficacy)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_InnerWedge(benchmark::State &state) {
  const auto model = brownian(8);
  const surroseq::McConfig cfg{100'000, 7, 1};
  for (auto _ : state) {
    auto b = surroseq::calibrate_inner_wedge(model, 0.0, 4, 0.05, 0.025, cfg);
    benchmark::DoNotOptimize(b.constant_a);
  }
}
BENCHMARK(BM_InnerWedge)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
