#include "surroseq/boundaries.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "surroseq/error.hpp"
#include "surroseq/normal.hpp"

namespace surroseq {

namespace {

constexpr double kBoundaryTolerance = 1e-4;
constexpr double kProbabilityFloor = 1e-4;
constexpr double kBracketHigh = 10.0;

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 0.5)) {
    throw Error("alpha must lie in (0, 0.5]");
  }
}

std::vector<double> resolve_fractions(std::vector<double> fractions, std::size_t looks) {
  if (fractions.empty()) {
    return equal_fractions(looks);
  }
  if (fractions.size() != looks) {
    throw Error("schedule has " + std::to_string(fractions.size()) +
                " fractions but the correlation model has " + std::to_string(looks) + " looks");
  }
  for (std::size_t j = 0; j < fractions.size(); ++j) {
    if (!(fractions[j] > 0.0 && fractions[j] <= 1.0) || (j > 0 && !(fractions[j] > fractions[j - 1]))) {
      throw Error("information fractions must be increasing in (0, 1]");
    }
  }
  if (fractions.back() != 1.0) {
    throw Error("the final information fraction must be 1");
  }
  return fractions;
}

double probability_tolerance(double target, std::size_t draws) {
  const double se = std::sqrt(target * (1.0 - target) / static_cast<double>(draws));
  return std::max(2.0 * se, kProbabilityFloor);
}

std::vector<double> absolute_values(const CorrelatedDraws &draws) {
  std::vector<double> out(draws.count() * draws.dim());
  for (std::size_t k = 0; k < draws.count(); ++k) {
    auto x = draws.draw(k);
    for (std::size_t j = 0; j < draws.dim(); ++j) {
      out[k * draws.dim() + j] = std::abs(x[j]);
    }
  }
  return out;
}

} // namespace

void ShapeFamily::validate() const {
  if (kind == FamilyKind::wang_tsiatis && !(delta <= 1.0)) {
    throw Error("Wang-Tsiatis power parameter delta must be <= 1");
  }
}

const char *to_string(FamilyKind kind) {
  switch (kind) {
  case FamilyKind::pocock:
    return "pocock";
  case FamilyKind::obrien_fleming:
    return "obrien_fleming";
  case FamilyKind::wang_tsiatis:
    return "wang_tsiatis";
  case FamilyKind::unadjusted:
    return "unadjusted";
  case FamilyKind::bonferroni:
    return "bonferroni";
  case FamilyKind::fixed_sample:
    return "fixed_sample";
  case FamilyKind::spending:
    return "spending";
  }
  return "unknown";
}

FamilyKind family_kind_from_string(const std::string &name) {
  for (auto kind : {FamilyKind::pocock, FamilyKind::obrien_fleming, FamilyKind::wang_tsiatis,
                    FamilyKind::unadjusted, FamilyKind::bonferroni, FamilyKind::fixed_sample,
                    FamilyKind::spending}) {
    if (name == to_string(kind)) {
      return kind;
    }
  }
  throw Error("unknown boundary family '" + name + "'");
}

ShapeFamily parse_family(const std::string &name, double delta) {
  if (name == "pocock") {
    return ShapeFamily::pocock();
  }
  if (name == "obf" || name == "obrien_fleming") {
    return ShapeFamily::obrien_fleming();
  }
  if (name == "wt" || name == "wang_tsiatis") {
    auto f = ShapeFamily::wang_tsiatis(delta);
    f.validate();
    return f;
  }
  if (name == "bonferroni") {
    return ShapeFamily::bonferroni();
  }
  if (name == "unadjusted") {
    return ShapeFamily::unadjusted();
  }
  throw Error("unknown boundary family '" + name +
              "' (expected pocock, obf, wt, bonferroni or unadjusted)");
}

std::vector<double> shape_factors(const ShapeFamily &family, std::span<const double> fractions) {
  family.validate();
  std::vector<double> out;
  out.reserve(fractions.size());
  for (double r : fractions) {
    switch (family.kind) {
    case FamilyKind::obrien_fleming:
      out.push_back(std::sqrt(1.0 / r));
      break;
    case FamilyKind::wang_tsiatis:
      out.push_back(std::pow(r, family.delta - 0.5));
      break;
    default:
      out.push_back(1.0);
      break;
    }
  }
  if (!out.empty()) {
    out.back() = 1.0;
  }
  return out;
}

double SpendingFunction::operator()(double t) const {
  if (t <= 0.0) {
    return 0.0;
  }
  if (t >= 1.0) {
    return alpha;
  }
  switch (kind) {
  case SpendingKind::obf_like:
    return 2.0 * (1.0 - normal_cdf(two_sided_critical(alpha) / std::sqrt(t)));
  case SpendingKind::pocock_like:
    return alpha * std::log(1.0 + (std::numbers::e - 1.0) * t);
  case SpendingKind::power:
    return alpha * std::pow(t, rho);
  }
  return alpha;
}

void SpendingFunction::validate() const {
  require_alpha(alpha);
  if (kind == SpendingKind::power && !(rho > 0.0)) {
    throw Error("power spending exponent must be positive");
  }
}

SpendingFunction parse_spending(const std::string &text, double alpha) {
  SpendingFunction f;
  f.alpha = alpha;
  if (text == "obf") {
    f.kind = SpendingKind::obf_like;
  } else if (text == "pocock") {
    f.kind = SpendingKind::pocock_like;
  } else if (text.rfind("power:", 0) == 0) {
    f.kind = SpendingKind::power;
    try {
      std::size_t used = 0;
      f.rho = std::stod(text.substr(6), &used);
      if (used != text.size() - 6) {
        throw std::invalid_argument("trailing");
      }
    } catch (const std::exception &) {
      throw Error("malformed spending function '" + text + "' (expected power:RHO)");
    }
  } else {
    throw Error("unknown spending function '" + text + "' (expected obf, pocock or power:RHO)");
  }
  f.validate();
  return f;
}

std::string to_string(const SpendingFunction &spend) {
  switch (spend.kind) {
  case SpendingKind::obf_like:
    return "obf";
  case SpendingKind::pocock_like:
    return "pocock";
  case SpendingKind::power: {
    std::ostringstream os;
    os.precision(17);
    os << "power:" << spend.rho;
    return os.str();
  }
  }
  return "obf";
}

void BoundarySet::validate() const {
  const std::size_t J = looks();
  if (J == 0) {
    throw Error("boundary set has no analyses");
  }
  if (fractions.size() != J) {
    throw Error("boundary set fractions and boundaries differ in length");
  }
  for (double b : efficacy) {
    if (!(b > 0.0)) {
      throw Error("efficacy boundaries must be positive");
    }
  }
  if (futility) {
    const auto &a = *futility;
    if (a.size() != J) {
      throw Error("futility and efficacy boundaries differ in length");
    }
    for (std::size_t j = 0; j + 1 < J; ++j) {
      if (!(a[j] >= 0.0 && a[j] < efficacy[j])) {
        throw Error("futility boundary a_" + std::to_string(j + 1) + " violates 0 <= a_j < b_j");
      }
    }
    if (a[J - 1] != efficacy[J - 1]) {
      throw Error("futility boundary must meet the efficacy boundary at the final analysis");
    }
  }
}

PathOutcome apply_stopping_rule(std::span<const double> w, const BoundarySet &boundaries) {
  const std::size_t J = boundaries.looks();
  const std::size_t n = std::min(J, w.size());
  for (std::size_t j = 0; j < n; ++j) {
    const double z = std::abs(w[j]);
    if (z >= boundaries.efficacy[j]) {
      return {j + 1, true};
    }
    if (boundaries.futility && z < (*boundaries.futility)[j]) {
      return {j + 1, false};
    }
  }
  return {n, false};
}

BoundarySet constant_boundaries(const ShapeFamily &family, double alpha,
                                std::vector<double> fractions) {
  require_alpha(alpha);
  if (fractions.empty()) {
    throw Error("constant boundaries need at least one analysis");
  }
  BoundarySet out;
  out.family = family;
  out.alpha = alpha;
  const double J = static_cast<double>(fractions.size());
  if (family.kind == FamilyKind::unadjusted) {
    out.constant_b = two_sided_critical(alpha);
  } else if (family.kind == FamilyKind::bonferroni) {
    out.constant_b = two_sided_critical(alpha / J);
  } else {
    throw Error("constant boundaries are defined for the unadjusted and Bonferroni families only");
  }
  out.efficacy.assign(fractions.size(), out.constant_b);
  out.fractions = std::move(fractions);
  return out;
}

BoundarySet fixed_sample_boundaries(double alpha, std::vector<double> fractions) {
  require_alpha(alpha);
  if (fractions.empty()) {
    throw Error("fixed-sample boundaries need at least one analysis");
  }
  BoundarySet out;
  out.family = {FamilyKind::fixed_sample, 0.5};
  out.alpha = alpha;
  out.constant_b = two_sided_critical(alpha);
  out.efficacy.assign(fractions.size(), kUnattainable);
  out.efficacy.back() = out.constant_b;
  out.fractions = std::move(fractions);
  return out;
}

BoundarySet calibrate_efficacy(const CorrelationModel &model, const ShapeFamily &family,
                               double alpha, const McConfig &cfg, std::vector<double> fractions) {
  require_alpha(alpha);
  family.validate();
  fractions = resolve_fractions(std::move(fractions), model.looks);
  if (family.kind == FamilyKind::unadjusted || family.kind == FamilyKind::bonferroni) {
    return constant_boundaries(family, alpha, std::move(fractions));
  }
  if (family.kind != FamilyKind::pocock && family.kind != FamilyKind::obrien_fleming &&
      family.kind != FamilyKind::wang_tsiatis) {
    throw Error(std::string("family '") + to_string(family.kind) +
                "' cannot be calibrated as a power family");
  }
  cfg.validate();
  const auto shape = shape_factors(family, fractions);
  const auto draws = sample_correlated(model.sqrt_corr, cfg);
  auto maxima = map_draws(draws, cfg.workers, [&shape](std::span<const double> x) {
    double m = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      m = std::max(m, std::abs(x[j]) / shape[j]);
    }
    return m;
  });

  BoundarySet out;
  out.family = family;
  out.alpha = alpha;
  out.draws = cfg.draws;
  out.seed = cfg.seed;
  out.constant_b = upper_alpha_quantile(std::move(maxima), alpha);
  for (double s : shape) {
    out.efficacy.push_back(out.constant_b * s);
  }
  out.fractions = std::move(fractions);
  out.validate();
  return out;
}

WedgeRange inner_wedge_range(double b, double delta, std::size_t j0,
                             std::span<const double> fractions) {
  if (j0 < 1 || j0 > fractions.size()) {
    throw Error("j0 must lie in [1, J]");
  }
  const double r0 = fractions[j0 - 1];
  const double denom = std::pow(1.0 / r0, 1.0 - delta) - 1.0;
  WedgeRange range{-b, denom > 0.0 ? b / denom : std::numeric_limits<double>::infinity()};
  return range;
}

BoundarySet inner_wedge_boundaries(double a, double b, double delta, std::size_t j0,
                                   std::vector<double> fractions) {
  const std::size_t J = fractions.size();
  if (J == 0) {
    throw Error("inner wedge needs at least one analysis");
  }
  if (!(b > 0.0) || !(delta < 1.0)) {
    throw Error("inner wedge parameter range violated: need b > 0 and delta < 1");
  }
  const auto range = inner_wedge_range(b, delta, j0, fractions);
  if (!(a > range.lower && a < range.upper)) {
    std::ostringstream os;
    os << "inner wedge parameter range violated: a = " << a << " not in (" << range.lower << ", "
       << range.upper << ")";
    throw Error(os.str());
  }
  BoundarySet out;
  out.family = {FamilyKind::wang_tsiatis, delta};
  out.j0 = j0;
  out.constant_a = a;
  out.constant_b = b;
  std::vector<double> fut(J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    const double r = fractions[j];
    const double shape = std::pow(r, delta - 0.5);
    out.efficacy.push_back(b * shape);
    if (j + 1 >= j0) {
      fut[j] = (a + b) * std::sqrt(r) - a * shape;
    }
  }
  out.efficacy.back() = b;
  fut.back() = out.efficacy.back();
  out.futility = std::move(fut);
  out.fractions = std::move(fractions);
  out.validate();
  return out;
}

namespace {

// Fraction of draws rejected by the inner-wedge rule with constants (a, b).
double wedge_rejection(const std::vector<double> &abs_x, std::size_t dim,
                       const std::vector<double> &eff, const std::vector<double> &fut) {
  const std::size_t count = abs_x.size() / dim;
  std::size_t rejected = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double *x = abs_x.data() + k * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      if (x[j] >= eff[j]) {
        ++rejected;
        break;
      }
      if (x[j] < fut[j]) {
        break;
      }
    }
  }
  return static_cast<double>(rejected) / static_cast<double>(count);
}

} // namespace

BoundarySet calibrate_inner_wedge(const CorrelationModel &model, double delta, std::size_t j0,
                                  double alpha, double alpha0, const McConfig &cfg,
                                  std::vector<double> fractions) {
  require_alpha(alpha);
  cfg.validate();
  if (!(alpha0 > 0.0 && alpha0 <= alpha)) {
    throw Error("alpha0 must lie in (0, alpha]");
  }
  if (!(delta < 1.0)) {
    throw Error("inner wedge parameter range violated: delta must be < 1");
  }
  fractions = resolve_fractions(std::move(fractions), model.looks);
  const std::size_t J = fractions.size();
  if (j0 < 1 || j0 > J) {
    throw Error("j0 must lie in [1, J]");
  }

  const auto draws = sample_correlated(model.sqrt_corr, cfg);
  std::vector<double> shape(J);
  for (std::size_t j = 0; j < J; ++j) {
    shape[j] = std::pow(fractions[j], delta - 0.5);
  }
  shape.back() = 1.0;

  // Constraint (i): nothing stops for futility before j0, so the probability
  // of rejecting by j0 depends on b alone.
  auto early_max = map_draws(draws, cfg.workers, [&](std::span<const double> x) {
    double m = 0.0;
    for (std::size_t j = 0; j < j0; ++j) {
      m = std::max(m, std::abs(x[j]) / shape[j]);
    }
    return m;
  });
  const double b = upper_alpha_quantile(std::move(early_max), alpha0);

  // Constraint (ii): P(reject) increases with a because a_j decreases in a.
  const auto abs_x = absolute_values(draws);
  std::vector<double> eff(J);
  for (std::size_t j = 0; j < J; ++j) {
    eff[j] = b * shape[j];
  }
  eff.back() = b;
  auto futility_for = [&](double a) {
    std::vector<double> fut(J, 0.0);
    for (std::size_t j = j0 - 1; j < J; ++j) {
      fut[j] = (a + b) * std::sqrt(fractions[j]) - a * shape[j];
    }
    fut.back() = eff.back();
    return fut;
  };
  auto prob_at = [&](double a) { return wedge_rejection(abs_x, J, eff, futility_for(a)); };

  const auto range = inner_wedge_range(b, delta, j0, fractions);
  const double edge = kBoundaryTolerance * 1e-3 * b;
  double lo = range.lower + edge;
  double hi = std::isfinite(range.upper) ? range.upper - edge : range.lower + 100.0 * b;
  const double tol = probability_tolerance(alpha, cfg.draws);
  const double p_lo = prob_at(lo);
  const double p_hi = prob_at(hi);
  auto infeasible = [&](const std::string &why) {
    std::ostringstream os;
    os << "inner wedge calibration infeasible: " << why << " (b = " << b
       << ", P(reject) ranges over [" << p_lo << ", " << p_hi << "] for a in (" << range.lower
       << ", " << range.upper << "), target alpha = " << alpha << ")";
    return NumericalError(os.str());
  };
  if (p_hi < alpha - tol) {
    throw infeasible("even the narrowest wedge rejects less than alpha");
  }
  if (p_lo > alpha + tol) {
    throw infeasible("the widest wedge already rejects more than alpha");
  }
  if (std::abs(p_lo - alpha) <= tol && std::abs(p_hi - alpha) <= tol) {
    // Rejection probability does not depend on a (e.g. j0 = J): any
    // admissible a solves, take the symmetric one.
    auto out = inner_wedge_boundaries(0.0, b, delta, j0, fractions);
    out.alpha = alpha;
    out.alpha0 = alpha0;
    out.draws = cfg.draws;
    out.seed = cfg.seed;
    return out;
  }
  while (hi - lo > kBoundaryTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (prob_at(mid) < alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // hi is the smallest a (to tolerance) reaching alpha; lo stays just below.
  double a = std::abs(prob_at(lo) - alpha) <= std::abs(prob_at(hi) - alpha) ? lo : hi;
  if (a - range.lower < kBoundaryTolerance) {
    throw infeasible("solution collapses onto the degenerate wedge a = -b");
  }
  if (std::abs(prob_at(a) - alpha) > tol) {
    throw infeasible("no wedge attains alpha within Monte Carlo tolerance");
  }

  auto out = inner_wedge_boundaries(a, b, delta, j0, fractions);
  out.alpha = alpha;
  out.alpha0 = alpha0;
  out.draws = cfg.draws;
  out.seed = cfg.seed;
  return out;
}

namespace {

double solve_spending_step(const CorrelatedDraws &draws, std::span<const double> prior_b,
                           double increment) {
  const std::size_t j = prior_b.size();
  if (j >= draws.dim()) {
    throw Error("draw dimension does not cover the requested analysis");
  }
  std::vector<double> survivors;
  for (std::size_t k = 0; k < draws.count(); ++k) {
    auto x = draws.draw(k);
    bool alive = true;
    for (std::size_t i = 0; i < j; ++i) {
      if (std::abs(x[i]) >= prior_b[i]) {
        alive = false;
        break;
      }
    }
    if (alive) {
      survivors.push_back(std::abs(x[j]));
    }
  }
  const double total = static_cast<double>(draws.count());
  auto prob_at = [&](double b) {
    return static_cast<double>(std::count_if(survivors.begin(), survivors.end(),
                                             [b](double v) { return v >= b; })) /
           total;
  };
  if (prob_at(0.0) < increment - probability_tolerance(increment, draws.count())) {
    throw NumericalError("spending increment exceeds the probability of reaching this analysis");
  }
  double lo = 0.0;
  double hi = kBracketHigh;
  while (hi - lo > kBoundaryTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (prob_at(mid) > increment) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

} // namespace

double spending_boundary_next(const Eigen::MatrixXd &prefix_sqrt_corr,
                              std::span<const double> prior_b, const SpendingFunction &spend,
                              std::span<const double> fractions, const McConfig &cfg) {
  spend.validate();
  cfg.validate();
  const std::size_t j = prior_b.size() + 1;
  if (static_cast<std::size_t>(prefix_sqrt_corr.rows()) != j ||
      prefix_sqrt_corr.cols() != prefix_sqrt_corr.rows()) {
    throw Error("spending boundary at look " + std::to_string(j) + " needs a " +
                std::to_string(j) + " x " + std::to_string(j) + " correlation root");
  }
  if (fractions.size() < j) {
    throw Error("schedule fractions do not cover look " + std::to_string(j));
  }
  const double previous = j == 1 ? 0.0 : spend(fractions[j - 2]);
  const double increment = spend(fractions[j - 1]) - previous;
  if (increment < 0.0) {
    throw Error("spending function not increasing");
  }
  if (increment <= 1.0 / static_cast<double>(cfg.draws)) {
    return kUnattainable;
  }
  const auto draws = sample_correlated(prefix_sqrt_corr, cfg);
  return solve_spending_step(draws, prior_b, increment);
}

BoundarySet spending_boundaries(const CorrelationModel &model, const SpendingFunction &spend,
                                const McConfig &cfg, std::vector<double> fractions) {
  spend.validate();
  cfg.validate();
  fractions = resolve_fractions(std::move(fractions), model.looks);
  const auto draws = sample_correlated(model.sqrt_corr, cfg);
  BoundarySet out;
  out.family = {FamilyKind::spending, 0.5};
  out.alpha = spend.alpha;
  out.draws = cfg.draws;
  out.seed = cfg.seed;
  out.spending = spend;
  double previous = 0.0;
  for (std::size_t j = 0; j < fractions.size(); ++j) {
    const double current = spend(fractions[j]);
    const double increment = current - previous;
    previous = current;
    if (increment < 0.0) {
      throw Error("spending function not increasing");
    }
    out.efficacy.push_back(increment <= 1.0 / static_cast<double>(cfg.draws)
                               ? kUnattainable
                               : solve_spending_step(draws, out.efficacy, increment));
  }
  out.constant_b = out.efficacy.back();
  out.fractions = std::move(fractions);
  out.validate();
  return out;
}

ProbabilityEstimate rejection_probability(const CorrelatedDraws &draws,
                                          const BoundarySet &boundaries, unsigned workers) {
  if (draws.dim() != boundaries.looks()) {
    throw Error("draw dimension does not match the number of analyses");
  }
  return event_probability(
      draws, [&](std::span<const double> x) { return apply_stopping_rule(x, boundaries).rejected; },
      workers);
}

ProbabilityEstimate rejection_probability(const CorrelationModel &model,
                                          const BoundarySet &boundaries, const McConfig &cfg) {
  return rejection_probability(sample_correlated(model.sqrt_corr, cfg), boundaries, cfg.workers);
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or_inf(const nlohmann::json &j) {
  return j.is_null() ? kUnattainable : j.get<double>();
}

void to_json(nlohmann::json &j, const BoundarySet &b) {
  auto eff = nlohmann::json::array();
  for (double v : b.efficacy) {
    eff.push_back(finite_or_null(v));
  }
  j = nlohmann::json{{"family", to_string(b.family.kind)},
                     {"delta", b.family.delta},
                     {"alpha", b.alpha},
                     {"alpha0", b.alpha0 ? nlohmann::json(*b.alpha0) : nlohmann::json(nullptr)},
                     {"j0", b.j0 ? nlohmann::json(*b.j0) : nlohmann::json(nullptr)},
                     {"B", b.draws},
                     {"seed", b.seed},
                     {"fractions", b.fractions},
                     {"b", eff},
                     {"a", b.futility ? nlohmann::json(*b.futility) : nlohmann::json(nullptr)},
                     {"constants",
                      {{"a", b.constant_a ? nlohmann::json(*b.constant_a) : nlohmann::json(nullptr)},
                       {"b", finite_or_null(b.constant_b)}}}};
  if (b.spending) {
    j["spending"] = to_string(*b.spending);
  }
}

void from_json(const nlohmann::json &j, BoundarySet &b) {
  b = BoundarySet{};
  b.family.kind = family_kind_from_string(j.at("family").get<std::string>());
  b.family.delta = j.value("delta", 0.5);
  b.alpha = j.at("alpha").get<double>();
  if (!j.at("alpha0").is_null()) {
    b.alpha0 = j.at("alpha0").get<double>();
  }
  if (!j.at("j0").is_null()) {
    b.j0 = j.at("j0").get<std::size_t>();
  }
  b.draws = j.at("B").get<std::size_t>();
  b.seed = j.at("seed").get<std::uint64_t>();
  b.fractions = j.at("fractions").get<std::vector<double>>();
  for (const auto &v : j.at("b")) {
    b.efficacy.push_back(number_or_inf(v));
  }
  if (!j.at("a").is_null()) {
    b.futility = j.at("a").get<std::vector<double>>();
  }
  const auto &constants = j.at("constants");
  if (!constants.at("a").is_null()) {
    b.constant_a = constants.at("a").get<double>();
  }
  b.constant_b = number_or_inf(constants.at("b"));
  if (j.contains("spending")) {
    b.spending = parse_spending(j.at("spending").get<std::string>(), b.alpha);
  }
  b.validate();
}

} // namespace surroseq
