#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surroseq/effect_estimation.hpp"
#include "surroseq/mvn_mc.hpp"

namespace surroseq {

/// Efficacy boundary value meaning "cannot reject at this look". Serialized
/// as JSON null.
inline constexpr double kUnattainable = std::numeric_limits<double>::infinity();

enum class FamilyKind {
  pocock,
  obrien_fleming,
  wang_tsiatis,
  unadjusted,
  bonferroni,
  fixed_sample,
  spending,
};

struct ShapeFamily {
  FamilyKind kind = FamilyKind::pocock;
  double delta = 0.5; // power parameter; meaningful for wang_tsiatis and inner wedges

  static ShapeFamily pocock() { return {FamilyKind::pocock, 0.5}; }
  static ShapeFamily obrien_fleming() { return {FamilyKind::obrien_fleming, 0.0}; }
  static ShapeFamily wang_tsiatis(double delta) { return {FamilyKind::wang_tsiatis, delta}; }
  static ShapeFamily unadjusted() { return {FamilyKind::unadjusted, 0.5}; }
  static ShapeFamily bonferroni() { return {FamilyKind::bonferroni, 0.5}; }

  void validate() const;
};

const char *to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string &name);

/// Accepts the command line spellings pocock | obf | wt | bonferroni |
/// unadjusted as well as the canonical names.
ShapeFamily parse_family(const std::string &name, double delta);

/// Relative boundary shape b~_j at information fractions r_j:
/// pocock 1, O'Brien-Fleming r^{-1/2}, Wang-Tsiatis r^{delta - 1/2}.
/// Unadjusted and Bonferroni are flat.
std::vector<double> shape_factors(const ShapeFamily &family, std::span<const double> fractions);

enum class SpendingKind { obf_like, pocock_like, power };

/// Cumulative type I error spent by information fraction t.
struct SpendingFunction {
  SpendingKind kind = SpendingKind::obf_like;
  double alpha = 0.05;
  double rho = 1.0; // power family exponent

  double operator()(double t) const;
  void validate() const;
};

/// Parses obf | pocock | power:RHO.
SpendingFunction parse_spending(const std::string &text, double alpha);
std::string to_string(const SpendingFunction &spend);

struct BoundarySet {
  ShapeFamily family;
  double alpha = 0.05;
  std::optional<double> alpha0;
  std::optional<std::size_t> j0;
  std::size_t draws = 0; // 0 when no Monte Carlo was needed
  std::uint64_t seed = 0;
  std::vector<double> fractions;
  std::vector<double> efficacy;                // b_j
  std::optional<std::vector<double>> futility; // a_j
  double constant_b = 0.0;
  std::optional<double> constant_a;
  std::optional<SpendingFunction> spending;

  std::size_t looks() const { return efficacy.size(); }
  bool has_futility() const { return futility.has_value(); }

  /// b_j > 0; with futility 0 <= a_j < b_j for j < J and a_J == b_J.
  void validate() const;
};

/// Outcome of applying a stopping rule to a path of statistics.
struct PathOutcome {
  std::size_t stop_look = 0; // 1-based analysis at which the rule stopped
  bool rejected = false;
};

/// First exit of |w_j| from [a_j, b_j) (a_j = 0 when there is no futility
/// boundary). Rejection is inclusive at b_j, futility exclusive at a_j.
PathOutcome apply_stopping_rule(std::span<const double> w, const BoundarySet &boundaries);

/// b = upper-alpha quantile of max_j |X_j| / b~_j, then b_j = b * b~_j.
/// Unadjusted and Bonferroni families are returned without simulation.
BoundarySet calibrate_efficacy(const CorrelationModel &model, const ShapeFamily &family,
                               double alpha, const McConfig &cfg,
                               std::vector<double> fractions = {});

/// Constant boundaries Phi^{-1}(1 - alpha/2) or Phi^{-1}(1 - alpha/(2J)).
BoundarySet constant_boundaries(const ShapeFamily &family, double alpha,
                                std::vector<double> fractions);

/// Rejects only at the final analysis, at Phi^{-1}(1 - alpha/2).
BoundarySet fixed_sample_boundaries(double alpha, std::vector<double> fractions);

/// Open interval of admissible inner-wedge constants a for given b, delta, j0.
struct WedgeRange {
  double lower;
  double upper; // +inf when unbounded
};
WedgeRange inner_wedge_range(double b, double delta, std::size_t j0,
                             std::span<const double> fractions);

/// b_j = b r_j^{delta-1/2}; a_j = (a+b) r_j^{1/2} - a r_j^{delta-1/2} for
/// j >= j0, else 0; a_J is set to b_J.
BoundarySet inner_wedge_boundaries(double a, double b, double delta, std::size_t j0,
                                   std::vector<double> fractions);

/// Solves for (a, b) so that the null probability of rejecting by look j0 is
/// alpha0 and of ever rejecting is alpha.
BoundarySet calibrate_inner_wedge(const CorrelationModel &model, double delta, std::size_t j0,
                                  double alpha, double alpha0, const McConfig &cfg,
                                  std::vector<double> fractions = {});

/// Next error-spending boundary. `prefix_sqrt_corr` is the j x j root for
/// looks 1..j, `prior_b` holds b_1..b_{j-1}. Returns kUnattainable when the
/// spending increment is below Monte Carlo resolution.
double spending_boundary_next(const Eigen::MatrixXd &prefix_sqrt_corr,
                              std::span<const double> prior_b, const SpendingFunction &spend,
                              std::span<const double> fractions, const McConfig &cfg);

/// All J spending boundaries from one correlation model (design-time use).
BoundarySet spending_boundaries(const CorrelationModel &model, const SpendingFunction &spend,
                                const McConfig &cfg, std::vector<double> fractions = {});

/// Null rejection probability of `boundaries` under the model, by simulation.
ProbabilityEstimate rejection_probability(const CorrelationModel &model,
                                          const BoundarySet &boundaries, const McConfig &cfg);
ProbabilityEstimate rejection_probability(const CorrelatedDraws &draws,
                                          const BoundarySet &boundaries, unsigned workers = 1);

void to_json(nlohmann::json &j, const BoundarySet &b);
void from_json(const nlohmann::json &j, BoundarySet &b);

/// JSON helpers for values that may be +inf (stored as null).
nlohmann::json finite_or_null(double v);
double number_or_inf(const nlohmann::json &j);

} // namespace surroseq
