#include "surroseq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "surroseq/error.hpp"

namespace surroseq {

namespace {

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  std::vector<double> grid;
  if (n == 0) {
    return grid;
  }
  if (n == 1 || hi <= lo) {
    grid.push_back(lo);
    return grid;
  }
  for (std::size_t k = 0; k < n; ++k) {
    grid.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  grid.back() = hi;
  return grid;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) {
    ss += (x - m) * (x - m);
  }
  return v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
}

} // namespace

MonotoneCheck check_c1_monotone(const FittedConditionalMean &f, std::size_t grid_size,
                                double tolerance, double fail_fraction) {
  if (grid_size < 2) {
    throw Error("monotonicity check needs at least two grid points");
  }
  if (tolerance < 0.0) {
    auto [lo, hi] = std::minmax_element(f.outcomes().begin(), f.outcomes().end());
    tolerance = 1e-6 * (*hi - *lo);
  }
  MonotoneCheck check;
  std::vector<double> values;
  for (double s : linear_grid(f.support_min(), f.support_max(), grid_size)) {
    if (auto v = f.try_evaluate(s)) {
      check.grid.push_back(s);
      values.push_back(*v);
    } else {
      ++check.dropped_grid_points;
    }
  }
  if (values.size() < 2) {
    check.status = CheckStatus::undefined;
    return check;
  }
  std::size_t violations = 0;
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    if (values[k + 1] < values[k] - tolerance) {
      ++violations;
    }
  }
  check.violation_fraction =
      static_cast<double>(violations) / static_cast<double>(values.size() - 1);
  if (check.violation_fraction > fail_fraction) {
    check.status = CheckStatus::fail;
  } else if (check.violation_fraction > 0.0) {
    check.status = CheckStatus::warn;
  }
  return check;
}

DominanceCheck check_c2_dominance(const FittedConditionalMean &control,
                                  const FittedConditionalMean &treated, double tolerance,
                                  std::size_t grid_size) {
  DominanceCheck check;
  const double lo = std::max(control.support_min(), treated.support_min());
  const double hi = std::min(control.support_max(), treated.support_max());
  if (hi < lo) {
    check.status = CheckStatus::undefined;
    return check;
  }
  bool any = false;
  for (double s : linear_grid(lo, hi, grid_size)) {
    auto m0 = control.try_evaluate(s);
    auto m1 = treated.try_evaluate(s);
    if (!m0 || !m1) {
      continue;
    }
    const double gap = *m1 - *m0;
    check.min_gap = any ? std::min(check.min_gap, gap) : gap;
    any = true;
    check.grid.push_back(s);
  }
  if (!any) {
    check.status = CheckStatus::undefined;
  } else if (check.min_gap < -tolerance) {
    check.status = CheckStatus::fail;
  } else if (check.min_gap < 0.0) {
    check.status = CheckStatus::warn;
  }
  return check;
}

double empirical_survival(std::span<const double> sample, double s) {
  const auto above = std::count_if(sample.begin(), sample.end(), [s](double v) { return v > s; });
  return static_cast<double>(above) / static_cast<double>(sample.size());
}

SurvivalCheck check_c3_stochastic_dominance(std::span<const double> control,
                                            std::span<const double> treated,
                                            double fail_multiplier) {
  if (control.empty() || treated.empty()) {
    throw Error("stochastic dominance check needs both samples nonempty");
  }
  std::vector<double> s0(control.begin(), control.end());
  std::vector<double> s1(treated.begin(), treated.end());
  std::sort(s0.begin(), s0.end());
  std::sort(s1.begin(), s1.end());
  auto survival = [](const std::vector<double> &sorted, double s) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), s);
    return static_cast<double>(above) / static_cast<double>(sorted.size());
  };
  SurvivalCheck check;
  for (const auto *pool : {&s0, &s1}) {
    for (double s : *pool) {
      check.max_violation = std::max(check.max_violation, survival(s0, s) - survival(s1, s));
    }
  }
  const double n0 = static_cast<double>(s0.size());
  const double n1 = static_cast<double>(s1.size());
  check.fail_threshold = fail_multiplier * std::sqrt((n0 + n1) / (n0 * n1));
  if (check.max_violation > check.fail_threshold) {
    check.status = CheckStatus::fail;
  } else if (check.max_violation > 0.5 * check.fail_threshold) {
    check.status = CheckStatus::warn;
  }
  return check;
}

ProportionExplained check_c4_proportion_explained(const StudyADataset &a, std::size_t column,
                                                  const KernelSpec &kernel, double threshold) {
  ProportionExplained out;
  const auto y0 = a.outcomes(0);
  const auto y1 = a.outcomes(1);
  out.total_effect = mean_of(y1) - mean_of(y0);
  out.total_effect_se = std::sqrt(sample_variance(y0) / static_cast<double>(y0.size()) +
                                  sample_variance(y1) / static_cast<double>(y1.size()));
  if (out.total_effect == 0.0) {
    out.status = CheckStatus::undefined;
    return out;
  }
  const auto mu0 = fit_mu(a, 0, column, kernel);
  const auto mu1 = fit_mu(a, 1, column, kernel);
  double sum = 0.0;
  std::size_t used = 0;
  for (double s : a.surrogate_column(0, column)) {
    auto m0 = mu0.try_evaluate(s);
    auto m1 = mu1.try_evaluate(s);
    if (!m0 || !m1) {
      ++out.skipped_points;
      continue;
    }
    sum += *m1 - *m0;
    ++used;
  }
  if (used == 0) {
    out.status = CheckStatus::undefined;
    return out;
  }
  out.residual_effect = sum / static_cast<double>(used);
  out.r = 1.0 - out.residual_effect / out.total_effect;
  if (std::abs(out.total_effect) < 2.0 * out.total_effect_se) {
    out.status = CheckStatus::warn;
  } else if (out.r < threshold) {
    out.status = CheckStatus::fail;
  }
  return out;
}

AssumptionReport diagnose(const StudyADataset &a, const StudyBSnapshot *b,
                          const AnalysisSchedule &schedule, const KernelSpec &kernel,
                          const DiagnosticsConfig &cfg) {
  schedule.validate(a.num_times());
  std::vector<double> all_y = a.outcomes(0);
  const auto y1 = a.outcomes(1);
  all_y.insert(all_y.end(), y1.begin(), y1.end());
  auto [ylo, yhi] = std::minmax_element(all_y.begin(), all_y.end());
  const double c1_tol = cfg.c1_tolerance_scale * (*yhi - *ylo);
  const double c2_tol = cfg.c2_tolerance_scale * std::sqrt(sample_variance(all_y));

  std::optional<SupportReport> support;
  if (b != nullptr) {
    support = check_support_c5(a, *b, schedule, cfg.c5_tolerance);
  }

  AssumptionReport report;
  for (std::size_t j = 1; j <= schedule.looks(); ++j) {
    AnalysisDiagnostics d;
    d.look = j;
    d.study_a_column = schedule.study_a_column[j - 1];
    try {
      const auto mu0 = fit_mu(a, 0, d.study_a_column, kernel);
      const auto mu1 = fit_mu(a, 1, d.study_a_column, kernel);
      d.c1 = check_c1_monotone(mu0, cfg.grid_size, c1_tol, cfg.c1_fail_fraction);
      if (d.c1->dropped_grid_points > 0) {
        d.notes.push_back("C1 grid shrunk to effective support: " +
                          std::to_string(d.c1->dropped_grid_points) + " points dropped");
      }
      d.c2 = check_c2_dominance(mu0, mu1, c2_tol, cfg.grid_size);
      d.c4 = check_c4_proportion_explained(a, d.study_a_column, kernel, cfg.c4_threshold);
    } catch (const Error &e) {
      d.notes.push_back(std::string("kernel fit failed: ") + e.what());
    }
    d.c3_study_a = check_c3_stochastic_dominance(a.surrogate_column(0, d.study_a_column),
                                                 a.surrogate_column(1, d.study_a_column),
                                                 cfg.c3_fail_multiplier);
    if (b != nullptr && j <= b->j_obs) {
      d.c3_study_b = check_c3_stochastic_dominance(b->surrogate_column(0, j),
                                                   b->surrogate_column(1, j),
                                                   cfg.c3_fail_multiplier);
      d.c5 = support->rows[j - 1];
    }
    report.analyses.push_back(std::move(d));
  }
  return report;
}

void write_diagnostic_curves(std::ostream &out, const StudyADataset &a,
                             const AnalysisSchedule &schedule, const KernelSpec &kernel,
                             std::size_t grid_size) {
  out << "j,study_a_column,s,mu_hat_0,mu_hat_1,survival_0,survival_1\n";
  auto cell = [](std::optional<double> v) {
    return v ? std::to_string(*v) : std::string();
  };
  for (std::size_t j = 1; j <= schedule.looks(); ++j) {
    const auto column = schedule.study_a_column[j - 1];
    const auto s0 = a.surrogate_column(0, column);
    const auto s1 = a.surrogate_column(1, column);
    const auto mu0 = fit_mu(a, 0, column, kernel);
    const auto mu1 = fit_mu(a, 1, column, kernel);
    const double lo = std::min(*std::min_element(s0.begin(), s0.end()),
                               *std::min_element(s1.begin(), s1.end()));
    const double hi = std::max(*std::max_element(s0.begin(), s0.end()),
                               *std::max_element(s1.begin(), s1.end()));
    for (double s : linear_grid(lo, hi, grid_size)) {
      out << j << ',' << column << ',' << s << ',' << cell(mu0.try_evaluate(s)) << ','
          << cell(mu1.try_evaluate(s)) << ',' << empirical_survival(s0, s) << ','
          << empirical_survival(s1, s) << '\n';
    }
  }
}

void to_json(nlohmann::json &j, const AssumptionReport &r) {
  auto analyses = nlohmann::json::array();
  for (const auto &d : r.analyses) {
    nlohmann::json a{{"j", d.look}, {"study_a_column", d.study_a_column}, {"notes", d.notes}};
    if (d.c1) {
      a["C1"] = {{"status", to_string(d.c1->status)},
                 {"violation_fraction", d.c1->violation_fraction},
                 {"grid_points", d.c1->grid.size()},
                 {"dropped_grid_points", d.c1->dropped_grid_points}};
    }
    if (d.c2) {
      a["C2"] = {{"status", to_string(d.c2->status)},
                 {"min_gap", d.c2->min_gap},
                 {"grid_points", d.c2->grid.size()}};
    }
    auto survival = [](const SurvivalCheck &c) {
      return nlohmann::json{{"status", to_string(c.status)},
                            {"max_violation", c.max_violation},
                            {"fail_threshold", c.fail_threshold}};
    };
    if (d.c3_study_a || d.c3_study_b) {
      a["C3"] = nlohmann::json::object();
      if (d.c3_study_a) {
        a["C3"]["study_a"] = survival(*d.c3_study_a);
      }
      if (d.c3_study_b) {
        a["C3"]["study_b"] = survival(*d.c3_study_b);
      }
    }
    if (d.c4) {
      a["C4"] = {{"status", to_string(d.c4->status)},
                 {"R", d.c4->r},
                 {"total_effect", d.c4->total_effect},
                 {"total_effect_se", d.c4->total_effect_se},
                 {"residual_effect", d.c4->residual_effect},
                 {"skipped_points", d.c4->skipped_points}};
    }
    if (d.c5) {
      a["C5"] = {{"status", to_string(d.c5->status)},
                 {"fraction_outside", d.c5->fraction},
                 {"outside", d.c5->outside},
                 {"total", d.c5->total},
                 {"support", {d.c5->lower, d.c5->upper}}};
    }
    analyses.push_back(std::move(a));
  }
  j = nlohmann::json{{"analyses", analyses}};
}

} // namespace surroseq
