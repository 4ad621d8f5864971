#include "surroseq/sequential_engine.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "surroseq/error.hpp"

namespace surroseq {

const char *to_string(Decision d) {
  switch (d) {
  case Decision::continue_monitoring:
    return "continue";
  case Decision::reject:
    return "reject";
  case Decision::futility:
    return "futility";
  case Decision::fail_to_reject:
    return "fail_to_reject";
  }
  return "continue";
}

const char *to_string(Status s) {
  switch (s) {
  case Status::active:
    return "active";
  case Status::rejected:
    return "rejected";
  case Status::futility:
    return "futility";
  case Status::failed_to_reject:
    return "failed_to_reject";
  }
  return "active";
}

namespace {

template <typename Enum, std::size_t N>
Enum enum_from_string(const std::string &name, const Enum (&values)[N], const char *what) {
  for (auto v : values) {
    if (name == to_string(v)) {
      return v;
    }
  }
  throw DataError(std::string("unknown ") + what + " '" + name + "' in state JSON");
}

} // namespace

std::optional<std::size_t> MonitoringState::terminal_look() const {
  if (status == Status::active || history.empty()) {
    return std::nullopt;
  }
  return history.back().look;
}

std::vector<double> MonitoringState::used_efficacy_bounds() const {
  std::vector<double> out;
  for (const auto &r : history) {
    out.push_back(r.efficacy_bound);
  }
  return out;
}

MonitoringState start_monitoring(BoundarySet boundaries, AnalysisSchedule schedule) {
  boundaries.validate();
  if (schedule.looks() != boundaries.looks()) {
    throw Error("schedule has " + std::to_string(schedule.looks()) +
                " analyses but the boundary set has " + std::to_string(boundaries.looks()));
  }
  MonitoringState state;
  state.boundaries = std::move(boundaries);
  state.schedule = std::move(schedule);
  return state;
}

Decision decide(double w_stat, double efficacy_bound, std::optional<double> futility_bound,
                bool last) {
  const double z = std::abs(w_stat);
  if (z >= efficacy_bound) {
    return Decision::reject;
  }
  if (last) {
    return Decision::fail_to_reject;
  }
  if (futility_bound && z < *futility_bound) {
    return Decision::futility;
  }
  return Decision::continue_monitoring;
}

namespace {

void check_next(const MonitoringState &state, const EffectEstimate &est) {
  if (state.status != Status::active) {
    throw Error(std::string("monitoring already terminated (") + to_string(state.status) +
                "); no further analyses accepted");
  }
  if (!state.history.empty() && est.look <= state.history.back().look) {
    throw Error("analysis already recorded: look " + std::to_string(est.look));
  }
  if (est.look != state.next_look()) {
    throw Error("out-of-order analysis: expected look " + std::to_string(state.next_look()) +
                ", got " + std::to_string(est.look));
  }
  if (est.look > state.looks()) {
    throw Error("analysis " + std::to_string(est.look) + " beyond the planned " +
                std::to_string(state.looks()) + " looks");
  }
}

MonitoringState apply(const MonitoringState &state, const EffectEstimate &est, double efficacy) {
  const std::size_t j = est.look;
  const bool last = j == state.looks();
  std::optional<double> futility;
  if (state.boundaries.futility) {
    futility = (*state.boundaries.futility)[j - 1];
  }

  AnalysisRecord record;
  record.look = j;
  record.time = state.schedule.analysis_times[j - 1];
  record.n_b0 = est.n_b0;
  record.n_b1 = est.n_b1;
  record.delta_e = est.delta_e;
  record.var_hat = est.var_hat;
  record.w_stat = est.w_stat;
  record.efficacy_bound = efficacy;
  record.futility_bound = futility;
  record.decision = decide(est.w_stat, efficacy, futility, last);

  MonitoringState next = state;
  next.history.push_back(record);
  switch (record.decision) {
  case Decision::reject:
    next.status = Status::rejected;
    break;
  case Decision::futility:
    next.status = Status::futility;
    break;
  case Decision::fail_to_reject:
    next.status = Status::failed_to_reject;
    break;
  case Decision::continue_monitoring:
    break;
  }
  return next;
}

} // namespace

MonitoringState evaluate_analysis(const MonitoringState &state, const EffectEstimate &est) {
  check_next(state, est);
  return apply(state, est, state.boundaries.efficacy[est.look - 1]);
}

MonitoringState evaluate_analysis(const MonitoringState &state, const EffectEstimate &est,
                                  double efficacy_bound) {
  check_next(state, est);
  if (!(efficacy_bound > 0.0)) {
    throw Error("efficacy boundary must be positive");
  }
  auto next = apply(state, est, efficacy_bound);
  next.boundaries.efficacy[est.look - 1] = efficacy_bound;
  return next;
}

MonitoringState run_full(const StudyADataset &a, const SnapshotSource &snapshot_at,
                         const BoundarySet &boundaries, const AnalysisSchedule &schedule,
                         const KernelSpec &kernel) {
  auto state = start_monitoring(boundaries, schedule);
  const auto fits = fit_schedule(a, schedule, kernel);
  while (state.status == Status::active) {
    const std::size_t j = state.next_look();
    const auto snapshot = snapshot_at(j);
    state = evaluate_analysis(state, w_stat_at(fits[j - 1], snapshot, j));
  }
  return state;
}

void to_json(nlohmann::json &j, const AnalysisSchedule &s) {
  j = nlohmann::json{{"analysis_times", s.analysis_times},
                     {"study_a_column", s.study_a_column},
                     {"j0", s.j0 ? nlohmann::json(*s.j0) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json &j, AnalysisSchedule &s) {
  s.analysis_times = j.at("analysis_times").get<std::vector<double>>();
  s.study_a_column = j.at("study_a_column").get<std::vector<std::size_t>>();
  if (j.contains("j0") && !j.at("j0").is_null()) {
    s.j0 = j.at("j0").get<std::size_t>();
  } else {
    s.j0.reset();
  }
}

void to_json(nlohmann::json &j, const MonitoringState &s) {
  auto history = nlohmann::json::array();
  for (const auto &r : s.history) {
    history.push_back({{"j", r.look},
                       {"t_j", r.time},
                       {"n_b0", r.n_b0},
                       {"n_b1", r.n_b1},
                       {"delta_e", r.delta_e},
                       {"var_hat", r.var_hat},
                       {"w_stat", r.w_stat},
                       {"b_j", finite_or_null(r.efficacy_bound)},
                       {"a_j", r.futility_bound ? nlohmann::json(*r.futility_bound)
                                                : nlohmann::json(nullptr)},
                       {"decision", to_string(r.decision)}});
  }
  const auto terminal = s.terminal_look();
  j = nlohmann::json{{"schema_version", MonitoringState::kSchemaVersion},
                     {"boundaries", s.boundaries},
                     {"schedule", s.schedule},
                     {"history", history},
                     {"status", to_string(s.status)},
                     {"terminal_j", terminal ? nlohmann::json(*terminal) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json &j, MonitoringState &s) {
  const int version = j.at("schema_version").get<int>();
  if (version != MonitoringState::kSchemaVersion) {
    throw DataError("unsupported state schema version " + std::to_string(version));
  }
  s = MonitoringState{};
  s.boundaries = j.at("boundaries").get<BoundarySet>();
  s.schedule = j.at("schedule").get<AnalysisSchedule>();
  static constexpr Decision decisions[] = {Decision::continue_monitoring, Decision::reject,
                                           Decision::futility, Decision::fail_to_reject};
  static constexpr Status statuses[] = {Status::active, Status::rejected, Status::futility,
                                        Status::failed_to_reject};
  for (const auto &r : j.at("history")) {
    AnalysisRecord rec;
    rec.look = r.at("j").get<std::size_t>();
    rec.time = r.at("t_j").get<double>();
    rec.n_b0 = r.at("n_b0").get<std::size_t>();
    rec.n_b1 = r.at("n_b1").get<std::size_t>();
    rec.delta_e = r.at("delta_e").get<double>();
    rec.var_hat = r.at("var_hat").get<double>();
    rec.w_stat = r.at("w_stat").get<double>();
    rec.efficacy_bound = number_or_inf(r.at("b_j"));
    if (!r.at("a_j").is_null()) {
      rec.futility_bound = r.at("a_j").get<double>();
    }
    rec.decision = enum_from_string(r.at("decision").get<std::string>(), decisions, "decision");
    if (!s.history.empty() && rec.look != s.history.back().look + 1) {
      throw DataError("state history looks must be consecutive");
    }
    s.history.push_back(rec);
  }
  s.status = enum_from_string(j.at("status").get<std::string>(), statuses, "status");
  if (s.schedule.looks() != s.boundaries.looks()) {
    throw DataError("state schedule and boundaries disagree on the number of analyses");
  }
}

} // namespace surroseq
