#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "surroseq/data_model.hpp"
#include "surroseq/kernel_regression.hpp"

namespace surroseq {

struct EffectEstimate {
  std::size_t look = 0;
  double delta_e = 0.0; // difference in arm means of mu_hat
  double var_hat = 0.0; // plug-in variance of delta_e
  double w_stat = 0.0;  // delta_e / sqrt(var_hat)
  std::size_t n_b0 = 0;
  std::size_t n_b1 = 0;
};

/// mu_hat evaluated at every Study B surrogate of one arm at `look`.
/// Kernel failures are rethrown annotated with the subject id.
std::vector<double> arm_mu_values(const FittedConditionalMean &f, const StudyBSnapshot &b,
                                  std::size_t look, int group);

double delta_e_at(const FittedConditionalMean &f, const StudyBSnapshot &b, std::size_t look);

/// sum_g (1/n_g) [mean(mu^2) - mean(mu)^2], population second moments.
double var_hat_at(const FittedConditionalMean &f, const StudyBSnapshot &b, std::size_t look);

EffectEstimate w_stat_at(const FittedConditionalMean &f, const StudyBSnapshot &b, std::size_t look);

/// Design-time correlation of the standardized statistics across analyses.
struct CorrelationModel {
  std::size_t looks = 0;
  Eigen::MatrixXd sigma_tilde; // covariance of the delta estimates
  Eigen::MatrixXd corr;        // unit diagonal, PSD
  Eigen::MatrixXd sqrt_corr;   // symmetric root, sqrt_corr * sqrt_corr^T = corr
  double n_b0 = 0.0;
  double n_b1 = 0.0;
  KernelSpec kernel;
  double min_eigenvalue = 0.0; // before repair

  /// Leading j x j block with its own symmetric root.
  CorrelationModel prefix(std::size_t j) const;
};

/// Tolerance below which a negative eigenvalue is treated as an estimation
/// error rather than round-off.
inline constexpr double kPsdTolerance = 1e-8;

/// Normalize a covariance matrix to a correlation matrix, repair small
/// negative eigenvalues, and compute the symmetric square root.
CorrelationModel correlation_from_covariance(const Eigen::MatrixXd &sigma);

/// Symmetric root of a PSD matrix, clamping eigenvalues in [-kPsdTolerance, 0).
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd &m);

/// Plug-in covariance of the per-analysis arm means: `values[g]` is an
/// n_g x J matrix of mu_hat values; c_g = mean(m_j m_j') - mean(m_j) mean(m_j'),
/// and the result is sum_g c_g / n_b[g].
Eigen::MatrixXd plugin_covariance(const Eigen::MatrixXd &control_values,
                                  const Eigen::MatrixXd &treated_values, double n_b0,
                                  double n_b1);

/// Study A based model for planned Study B arm sizes. Analysis j borrows the
/// control-arm conditional mean at Study A column schedule.study_a_column[j].
CorrelationModel build_correlation_model(const StudyADataset &a, const AnalysisSchedule &schedule,
                                         double n_b0, double n_b1, const KernelSpec &kernel);

/// Study B based model over looks 1..b.j_obs, using one fitted mean per look.
CorrelationModel build_study_b_correlation(const std::vector<FittedConditionalMean> &fits,
                                           const StudyBSnapshot &b);

/// One fitted control-arm mean per analysis, following the column map.
std::vector<FittedConditionalMean> fit_schedule(const StudyADataset &a,
                                                const AnalysisSchedule &schedule,
                                                const KernelSpec &kernel);

void to_json(nlohmann::json &j, const KernelSpec &k);
void from_json(const nlohmann::json &j, KernelSpec &k);
void to_json(nlohmann::json &j, const CorrelationModel &m);
void from_json(const nlohmann::json &j, CorrelationModel &m);
void to_json(nlohmann::json &j, const EffectEstimate &e);

} // namespace surroseq
