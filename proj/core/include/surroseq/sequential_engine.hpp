#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surroseq/boundaries.hpp"
#include "surroseq/data_model.hpp"
#include "surroseq/effect_estimation.hpp"
#include "surroseq/kernel_regression.hpp"

namespace surroseq {

enum class Decision { continue_monitoring, reject, futility, fail_to_reject };
enum class Status { active, rejected, futility, failed_to_reject };

const char *to_string(Decision d);
const char *to_string(Status s);

struct AnalysisRecord {
  std::size_t look = 0;
  double time = 0.0;
  std::size_t n_b0 = 0;
  std::size_t n_b1 = 0;
  double delta_e = 0.0;
  double var_hat = 0.0;
  double w_stat = 0.0;
  double efficacy_bound = 0.0;
  std::optional<double> futility_bound;
  Decision decision = Decision::continue_monitoring;
};

/// Everything the monitor needs between looks. Each evaluation returns a new
/// state; a terminal state accepts no further analyses.
struct MonitoringState {
  static constexpr int kSchemaVersion = 1;

  BoundarySet boundaries;
  AnalysisSchedule schedule;
  std::vector<AnalysisRecord> history;
  Status status = Status::active;

  std::size_t looks() const { return boundaries.looks(); }
  std::size_t next_look() const { return history.size() + 1; }
  /// Analysis at which monitoring stopped, if it has.
  std::optional<std::size_t> terminal_look() const;
  /// Efficacy boundaries used so far (spending mode reads these back).
  std::vector<double> used_efficacy_bounds() const;
};

MonitoringState start_monitoring(BoundarySet boundaries, AnalysisSchedule schedule);

/// Decision for |W| at one look; `last` marks the final analysis.
Decision decide(double w_stat, double efficacy_bound, std::optional<double> futility_bound,
                bool last);

/// Apply the precomputed boundary of analysis est.look.
MonitoringState evaluate_analysis(const MonitoringState &state, const EffectEstimate &est);

/// Same, with an efficacy boundary supplied by the caller (error-spending
/// mode); the boundary is recorded in the history and in the boundary set.
MonitoringState evaluate_analysis(const MonitoringState &state, const EffectEstimate &est,
                                  double efficacy_bound);

/// Produces the Study B snapshot for a 1-based look; called lazily, in order,
/// and never for looks after the terminal one.
using SnapshotSource = std::function<StudyBSnapshot(std::size_t)>;

MonitoringState run_full(const StudyADataset &a, const SnapshotSource &snapshot_at,
                         const BoundarySet &boundaries, const AnalysisSchedule &schedule,
                         const KernelSpec &kernel);

void to_json(nlohmann::json &j, const AnalysisSchedule &s);
void from_json(const nlohmann::json &j, AnalysisSchedule &s);
void to_json(nlohmann::json &j, const MonitoringState &s);
void from_json(const nlohmann::json &j, MonitoringState &s);

} // namespace surroseq
