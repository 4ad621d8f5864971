#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surroseq/data_model.hpp"

namespace surroseq {

enum class KernelKind { gaussian, epanechnikov };

const char *to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string &name);

struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  std::optional<double> bandwidth; // nullopt selects auto_bandwidth

  void validate() const;
};

/// Unscaled kernel density K(u).
double kernel_density(KernelKind kind, double u);

/// Reference-rule bandwidth with undersmoothing:
/// 1.06 * min(sd, IQR/1.34) * n^(-1/5) * n^(-0.11).
/// sd uses the n-1 denominator, IQR uses linear interpolation between order
/// statistics. When IQR is zero but sd is not, sd alone is used.
double auto_bandwidth(std::span<const double> s);

/// Nadaraya-Watson estimate of E[Y | S = s] from one arm/column of Study A.
/// Immutable after construction.
class FittedConditionalMean {
public:
  FittedConditionalMean(std::vector<double> surrogates, std::vector<double> outcomes,
                        double bandwidth, KernelKind kind);

  /// Weighted average of training outcomes; throws NumericalError when the
  /// kernel mass at `s` is below the effective-neighbor guard.
  double operator()(double s) const;

  /// Same as operator() but returns nullopt instead of throwing.
  std::optional<double> try_evaluate(double s) const;

  double bandwidth() const { return bandwidth_; }
  KernelKind kind() const { return kind_; }
  double support_min() const { return support_min_; }
  double support_max() const { return support_max_; }
  std::size_t size() const { return surrogates_.size(); }
  std::span<const double> surrogates() const { return surrogates_; }
  std::span<const double> outcomes() const { return outcomes_; }

  /// Minimum kernel mass sum K_h(S_i - s) accepted at a query: 1e-10 * n.
  double denominator_guard() const { return 1e-10 * static_cast<double>(surrogates_.size()); }

private:
  std::vector<double> surrogates_;
  std::vector<double> outcomes_;
  double bandwidth_;
  KernelKind kind_;
  double support_min_;
  double support_max_;
};

/// Fit mu_hat for Study A arm `group` at 1-based surrogate `column`.
FittedConditionalMean fit_mu(const StudyADataset &a, int group, std::size_t column,
                             const KernelSpec &kernel);

double evaluate_mu(const FittedConditionalMean &f, double s_query);

} // namespace surroseq
