#include "surroseq/kernel_regression.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "surroseq/error.hpp"

namespace surroseq {

const char *to_string(KernelKind kind) {
  return kind == KernelKind::gaussian ? "gaussian" : "epanechnikov";
}

KernelKind kernel_kind_from_string(const std::string &name) {
  if (name == "gaussian") {
    return KernelKind::gaussian;
  }
  if (name == "epanechnikov") {
    return KernelKind::epanechnikov;
  }
  throw Error("unknown kernel '" + name + "' (expected gaussian or epanechnikov)");
}

void KernelSpec::validate() const {
  if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) {
    throw Error("kernel bandwidth must be positive");
  }
}

double kernel_density(KernelKind kind, double u) {
  switch (kind) {
  case KernelKind::gaussian:
    return std::exp(-0.5 * u * u) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  case KernelKind::epanechnikov:
    return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  return 0.0;
}

namespace {

double interpolated_quantile(const std::vector<double> &sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

} // namespace

double auto_bandwidth(std::span<const double> s) {
  const std::size_t n = s.size();
  if (n < 2) {
    throw NumericalError("auto bandwidth needs at least two surrogate values");
  }
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : s) {
    ss += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted(s.begin(), s.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    throw NumericalError("degenerate surrogate distribution: all values equal");
  }
  const double iqr = interpolated_quantile(sorted, 0.75) - interpolated_quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double nn = static_cast<double>(n);
  return 1.06 * spread * std::pow(nn, -0.2) * std::pow(nn, -0.11);
}

FittedConditionalMean::FittedConditionalMean(std::vector<double> surrogates,
                                             std::vector<double> outcomes, double bandwidth,
                                             KernelKind kind)
    : surrogates_(std::move(surrogates)), outcomes_(std::move(outcomes)), bandwidth_(bandwidth),
      kind_(kind) {
  if (surrogates_.size() != outcomes_.size()) {
    throw Error("training surrogates and outcomes differ in length");
  }
  if (surrogates_.size() < 2) {
    throw Error("conditional mean fit needs at least two training points");
  }
  if (!(bandwidth_ > 0.0 && std::isfinite(bandwidth_))) {
    throw Error("kernel bandwidth must be positive");
  }
  auto [lo, hi] = std::minmax_element(surrogates_.begin(), surrogates_.end());
  support_min_ = *lo;
  support_max_ = *hi;
}

std::optional<double> FittedConditionalMean::try_evaluate(double s) const {
  const double inv_h = 1.0 / bandwidth_;
  double num = 0.0;
  double den = 0.0;
  if (kind_ == KernelKind::gaussian) {
    const double scale = inv_h * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    for (std::size_t i = 0; i < surrogates_.size(); ++i) {
      const double u = (surrogates_[i] - s) * inv_h;
      const double w = std::exp(-0.5 * u * u) * scale;
      num += w * outcomes_[i];
      den += w;
    }
  } else {
    for (std::size_t i = 0; i < surrogates_.size(); ++i) {
      const double u = (surrogates_[i] - s) * inv_h;
      if (std::abs(u) <= 1.0) {
        const double w = 0.75 * (1.0 - u * u) * inv_h;
        num += w * outcomes_[i];
        den += w;
      }
    }
  }
  if (!(den >= denominator_guard()) || den == 0.0) {
    return std::nullopt;
  }
  return num / den;
}

double FittedConditionalMean::operator()(double s) const {
  auto v = try_evaluate(s);
  if (!v) {
    throw NumericalError("no effective neighbors at query point s = " + std::to_string(s) +
                         " (bandwidth " + std::to_string(bandwidth_) + ")");
  }
  return *v;
}

FittedConditionalMean fit_mu(const StudyADataset &a, int group, std::size_t column,
                             const KernelSpec &kernel) {
  kernel.validate();
  if (group != 0 && group != 1) {
    throw Error("invalid group label " + std::to_string(group));
  }
  auto s = a.surrogate_column(group, column);
  auto y = a.outcomes(group);
  if (s.empty()) {
    throw DataError("Study A arm " + std::to_string(group) + " is empty");
  }
  const double h = kernel.bandwidth ? *kernel.bandwidth : auto_bandwidth(s);
  return FittedConditionalMean(std::move(s), std::move(y), h, kernel.kind);
}

double evaluate_mu(const FittedConditionalMean &f, double s_query) { return f(s_query); }

} // namespace surroseq
