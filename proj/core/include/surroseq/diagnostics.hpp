#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surroseq/data_model.hpp"
#include "surroseq/kernel_regression.hpp"

namespace surroseq {

/// Thresholds for the empirical assumption checks.
struct DiagnosticsConfig {
  std::size_t grid_size = 100;
  double c1_tolerance_scale = 1e-6; // times range(y)
  double c1_fail_fraction = 0.05;
  double c2_tolerance_scale = 0.1; // times sd(y) of Study A
  double c3_fail_multiplier = 1.36;
  double c4_threshold = 0.5;
  double c5_tolerance = 0.0;
};

struct MonotoneCheck {
  double violation_fraction = 0.0;
  CheckStatus status = CheckStatus::pass;
  std::vector<double> grid;
  std::size_t dropped_grid_points = 0; // outside the effective kernel support
};

/// Fraction of adjacent grid pairs over the training support where mu_hat
/// drops by more than the tolerance.
MonotoneCheck check_c1_monotone(const FittedConditionalMean &f, std::size_t grid_size = 100,
                                double tolerance = -1.0, double fail_fraction = 0.05);

struct DominanceCheck {
  double min_gap = 0.0;
  CheckStatus status = CheckStatus::pass;
  std::vector<double> grid;
};

/// Minimum of mu_hat_1 - mu_hat_0 over the common support grid.
DominanceCheck check_c2_dominance(const FittedConditionalMean &control,
                                  const FittedConditionalMean &treated, double tolerance,
                                  std::size_t grid_size = 100);

struct SurvivalCheck {
  double max_violation = 0.0;
  double fail_threshold = 0.0;
  CheckStatus status = CheckStatus::pass;
};

/// max over s of [P(S0 > s) - P(S1 > s)]_+ with empirical survival functions,
/// evaluated at every pooled sample point (where the step functions change).
SurvivalCheck check_c3_stochastic_dominance(std::span<const double> control,
                                            std::span<const double> treated,
                                            double fail_multiplier = 1.36);

/// Empirical survival P(S > s).
double empirical_survival(std::span<const double> sample, double s);

struct ProportionExplained {
  double r = 0.0;
  double total_effect = 0.0;    // mean(Y_A1) - mean(Y_A0)
  double total_effect_se = 0.0;
  double residual_effect = 0.0; // mean over controls of mu_1 - mu_0
  std::size_t skipped_points = 0;
  CheckStatus status = CheckStatus::pass;
};

/// R_j = 1 - residual / total. Fails below the threshold, warns when the total
/// effect is within two standard errors of zero, undefined when it is zero.
ProportionExplained check_c4_proportion_explained(const StudyADataset &a, std::size_t column,
                                                  const KernelSpec &kernel,
                                                  double threshold = 0.5);

struct AnalysisDiagnostics {
  std::size_t look = 0;
  std::size_t study_a_column = 0;
  std::optional<MonotoneCheck> c1;
  std::optional<DominanceCheck> c2;
  std::optional<SurvivalCheck> c3_study_a;
  std::optional<SurvivalCheck> c3_study_b;
  std::optional<ProportionExplained> c4;
  std::optional<SupportRow> c5;
  std::vector<std::string> notes;
};

struct AssumptionReport {
  std::vector<AnalysisDiagnostics> analyses;
};

/// Runs C1-C4 on Study A columns (and C3/C5 on Study B when given) following
/// the schedule's column map.
AssumptionReport diagnose(const StudyADataset &a, const StudyBSnapshot *b,
                          const AnalysisSchedule &schedule, const KernelSpec &kernel,
                          const DiagnosticsConfig &cfg = {});

/// Plot-ready curves: look, s, mu_hat_0, mu_hat_1, survival of each arm.
void write_diagnostic_curves(std::ostream &out, const StudyADataset &a,
                             const AnalysisSchedule &schedule, const KernelSpec &kernel,
                             std::size_t grid_size = 100);

void to_json(nlohmann::json &j, const AssumptionReport &r);

} // namespace surroseq
