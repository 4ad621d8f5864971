#include "surroseq/mvn_mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "surroseq/error.hpp"

namespace surroseq {

void McConfig::validate() const {
  if (draws < kMinimumDraws) {
    throw Error("Monte Carlo calibration needs at least " + std::to_string(kMinimumDraws) +
                " draws (got " + std::to_string(draws) + ")");
  }
  if (workers == 0) {
    throw Error("worker count must be at least 1");
  }
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed + kGolden) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

CounterRng::CounterRng(std::uint64_t key, std::uint64_t stream)
    : base_(derive_seed(key, stream)) {}

CounterRng::result_type CounterRng::operator()() {
  ++counter_;
  return mix64(base_ + counter_ * kGolden);
}

void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t, std::size_t)> &fn) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
  if (chunks == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = n * c / chunks;
    const std::size_t end = n * (c + 1) / chunks;
    threads.emplace_back([&, c, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto &t : threads) {
    t.join();
  }
  for (auto &e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

CorrelatedDraws::CorrelatedDraws(std::size_t dim, std::size_t count)
    : dim_(dim), count_(count), data_(dim * count) {}

CorrelatedDraws sample_correlated(const Eigen::MatrixXd &sqrt_corr, const McConfig &cfg) {
  if (sqrt_corr.rows() != sqrt_corr.cols() || sqrt_corr.rows() == 0) {
    throw Error("square root of the correlation matrix must be square and nonempty");
  }
  if (cfg.workers == 0) {
    throw Error("worker count must be at least 1");
  }
  const auto dim = static_cast<std::size_t>(sqrt_corr.rows());
  CorrelatedDraws draws(dim, cfg.draws);
  // Row-major copy so the inner product walks contiguous memory.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> root = sqrt_corr;
  parallel_for(cfg.draws, cfg.workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> z(dim);
    for (std::size_t k = begin; k < end; ++k) {
      CounterRng rng(cfg.seed, k);
      std::normal_distribution<double> normal;
      for (auto &v : z) {
        v = normal(rng);
      }
      auto x = draws.draw(k);
      for (std::size_t i = 0; i < dim; ++i) {
        const double *row = root.data() + i * dim;
        double acc = 0.0;
        for (std::size_t l = 0; l < dim; ++l) {
          acc += row[l] * z[l];
        }
        x[i] = acc;
      }
    }
  });
  return draws;
}

std::vector<double> map_draws(const CorrelatedDraws &draws, unsigned workers,
                              const std::function<double(std::span<const double>)> &fn) {
  std::vector<double> out(draws.count());
  parallel_for(draws.count(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      out[k] = fn(draws.draw(k));
    }
  });
  return out;
}

double upper_alpha_quantile(std::vector<double> values, double alpha) {
  if (values.empty()) {
    throw Error("upper quantile of an empty sample");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error("alpha must lie in (0, 1)");
  }
  const auto b = static_cast<double>(values.size());
  double target = (1.0 - alpha) * b;
  // (1 - alpha) * B is often an integer polluted by rounding, e.g. 95.00000000000001.
  const double nearest = std::round(target);
  if (std::abs(target - nearest) <= 1e-9 * std::max(1.0, b)) {
    target = nearest;
  }
  auto rank = static_cast<std::size_t>(std::ceil(target));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

ProbabilityEstimate event_probability(const CorrelatedDraws &draws, const DrawPredicate &event,
                                      unsigned workers) {
  if (draws.count() == 0) {
    throw Error("event probability over zero draws");
  }
  std::atomic<std::size_t> total{0};
  parallel_for(draws.count(), workers, [&](std::size_t begin, std::size_t end) {
    std::size_t count = 0;
    for (std::size_t k = begin; k < end; ++k) {
      count += event(draws.draw(k)) ? 1 : 0;
    }
    total += count;
  });
  ProbabilityEstimate est;
  const auto b = static_cast<double>(draws.count());
  est.p = static_cast<double>(total.load()) / b;
  est.se = std::sqrt(est.p * (1.0 - est.p) / b);
  return est;
}

ProbabilityEstimate event_probability(const Eigen::MatrixXd &sqrt_corr, const DrawPredicate &event,
                                      const McConfig &cfg) {
  return event_probability(sample_correlated(sqrt_corr, cfg), event, cfg.workers);
}

} // namespace surroseq
