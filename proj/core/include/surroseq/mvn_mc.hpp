#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace surroseq {

struct McConfig {
  std::size_t draws = 1'000'000;
  std::uint64_t seed = 20240101;
  unsigned workers = 1;

  static constexpr std::size_t kMinimumDraws = 1000;

  /// Refuses calibration with fewer than kMinimumDraws draws.
  void validate() const;
};

/// Counter-based 64-bit generator: output i of stream (key, stream) is a pure
/// function of (key, stream, i), so any partition of draws across threads
/// reproduces the same numbers. Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t key, std::uint64_t stream);

  result_type operator()();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

/// Derive an independent child seed, e.g. per replication.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Run fn(begin, end) over [0, n) split into contiguous chunks, one per worker.
void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t, std::size_t)> &fn);

/// B draws of X = sqrt_corr * Z, stored row-major (draw k occupies
/// [k*dim, (k+1)*dim)).
class CorrelatedDraws {
public:
  CorrelatedDraws(std::size_t dim, std::size_t count);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return count_; }
  std::span<const double> draw(std::size_t k) const { return {data_.data() + k * dim_, dim_}; }
  std::span<double> draw(std::size_t k) { return {data_.data() + k * dim_, dim_}; }

private:
  std::size_t dim_;
  std::size_t count_;
  std::vector<double> data_;
};

/// Draw k uses CounterRng(cfg.seed, k) for its standard normals.
CorrelatedDraws sample_correlated(const Eigen::MatrixXd &sqrt_corr, const McConfig &cfg);

/// Apply fn to every draw in parallel; result[k] = fn(draw k).
std::vector<double> map_draws(const CorrelatedDraws &draws, unsigned workers,
                              const std::function<double(std::span<const double>)> &fn);

/// The ceil((1 - alpha) * B)-th smallest value (1-based).
double upper_alpha_quantile(std::vector<double> values, double alpha);

struct ProbabilityEstimate {
  double p = 0.0;
  double se = 0.0; // sqrt(p (1 - p) / B)
};

using DrawPredicate = std::function<bool(std::span<const double>)>;

ProbabilityEstimate event_probability(const CorrelatedDraws &draws, const DrawPredicate &event,
                                      unsigned workers = 1);

ProbabilityEstimate event_probability(const Eigen::MatrixXd &sqrt_corr, const DrawPredicate &event,
                                      const McConfig &cfg);

} // namespace surroseq
