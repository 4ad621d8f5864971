// surroseq: design, monitor, simulate and diagnose group sequential
// surrogate-marker tests from the command line.
//
// Exit codes: 0 continue (or success), 10 reject, 11 futility,
// 12 fail to reject at the final analysis, 2 usage or data error.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "surroseq/boundaries.hpp"
#include "surroseq/data_model.hpp"
#include "surroseq/diagnostics.hpp"
#include "surroseq/effect_estimation.hpp"
#include "surroseq/error.hpp"
#include "surroseq/kernel_regression.hpp"
#include "surroseq/sequential_engine.hpp"
#include "surroseq/simulation.hpp"

namespace fs = std::filesystem;
using namespace surroseq;

namespace {

constexpr int kExitContinue = 0;
constexpr int kExitReject = 10;
constexpr int kExitFutility = 11;
constexpr int kExitFailToReject = 12;
constexpr int kExitUsage = 2;

struct UsageError : Error {
  using Error::Error;
};

struct KernelOptions {
  std::string kind = "gaussian";
  std::string bandwidth = "auto";

  KernelSpec spec() const {
    KernelSpec k;
    k.kind = kernel_kind_from_string(kind);
    if (bandwidth != "auto") {
      try {
        std::size_t used = 0;
        k.bandwidth = std::stod(bandwidth, &used);
        if (used != bandwidth.size()) {
          throw std::invalid_argument(bandwidth);
        }
      } catch (const std::logic_error &) {
        throw UsageError("--bandwidth must be 'auto' or a positive number, got '" + bandwidth + "'");
      }
    }
    k.validate();
    return k;
  }
};

struct McOptions {
  std::size_t draws = 1'000'000;
  std::uint64_t seed = 20240101;
  unsigned workers = 1;

  McConfig config() const { return {draws, seed, workers}; }
};

void add_kernel(CLI::App *cmd, KernelOptions &k) {
  cmd->add_option("--kernel", k.kind, "gaussian | epanechnikov")->capture_default_str();
  cmd->add_option("--bandwidth", k.bandwidth, "auto or a fixed bandwidth")->capture_default_str();
}

void add_mc(CLI::App *cmd, McOptions &mc) {
  cmd->add_option("--B", mc.draws, "Monte Carlo draws")->capture_default_str();
  cmd->add_option("--seed", mc.seed, "random seed")->envname("SURROSEQ_SEED")->capture_default_str();
  cmd->add_option("--workers", mc.workers, "worker threads")->capture_default_str()->check(
      CLI::PositiveNumber);
}

void add_schedule(CLI::App *cmd, std::vector<double> &times, std::vector<std::size_t> &col_map) {
  cmd->add_option("--times", times, "analysis times t_1,...,t_J")->delimiter(',');
  cmd->add_option("--a-col-map", col_map, "Study A column used at each analysis (1-based)")
      ->delimiter(',');
}

AnalysisSchedule make_schedule(const std::vector<double> &times,
                               const std::vector<std::size_t> &col_map, std::size_t default_looks) {
  AnalysisSchedule s;
  const std::size_t looks = !times.empty() ? times.size()
                            : !col_map.empty() ? col_map.size()
                                               : default_looks;
  s = AnalysisSchedule::identity(looks);
  if (!times.empty()) {
    s.analysis_times = times;
  }
  if (!col_map.empty()) {
    if (col_map.size() != looks) {
      throw UsageError("--a-col-map needs one entry per analysis (" + std::to_string(looks) + ")");
    }
    s.study_a_column = col_map;
  }
  return s;
}

void write_json(const std::string &path, const nlohmann::json &j) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path + "'");
  }
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path + "'");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw DataError("malformed JSON in '" + path + "': " + e.what());
  }
}

std::string bound_text(double b) {
  if (!std::isfinite(b)) {
    return "inf";
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << b;
  return os.str();
}

void print_boundaries(std::ostream &out, const BoundarySet &b) {
  out << "family " << to_string(b.family.kind) << ", alpha " << b.alpha << ", J " << b.looks()
      << '\n';
  for (std::size_t j = 0; j < b.looks(); ++j) {
    out << "  j=" << j + 1 << "  r=" << std::setprecision(4) << b.fractions[j]
        << "  b=" << bound_text(b.efficacy[j]);
    if (b.futility) {
      out << "  a=" << bound_text((*b.futility)[j]);
    }
    out << '\n';
  }
}

// design ------------------------------------------------------------------

struct DesignOptions {
  std::string study_a;
  std::string family = "wt";
  double alpha = 0.05;
  double delta = 0.4;
  bool futility = false;
  std::optional<std::size_t> j0;
  std::optional<double> alpha0;
  std::string spending;
  std::vector<double> times;
  std::vector<std::size_t> col_map;
  std::optional<double> n_b0;
  std::optional<double> n_b1;
  std::string out;
  KernelOptions kernel;
  McOptions mc;
};

int run_design(const DesignOptions &o) {
  const auto family = parse_family(o.family, o.delta);
  if (o.futility && !o.j0) {
    throw UsageError("--futility requires --j0");
  }
  if (o.futility && !o.spending.empty()) {
    throw UsageError("--futility cannot be combined with --spending");
  }
  const bool constant = family.kind == FamilyKind::unadjusted ||
                        family.kind == FamilyKind::bonferroni;
  if (o.futility && constant) {
    throw UsageError("--futility needs a shape family (pocock, obf or wt)");
  }

  std::optional<StudyADataset> a;
  if (!o.study_a.empty()) {
    auto load = load_study_a(o.study_a);
    if (load.report.rows_dropped > 0) {
      std::cerr << "note: dropped " << load.report.rows_dropped
                << " Study A rows with missing values\n";
    }
    a = std::move(load.dataset);
  }
  if (!a && !(constant && o.spending.empty() && !o.times.empty())) {
    throw UsageError("--study-a is required (constant families may use --times alone)");
  }
  auto schedule = make_schedule(o.times, o.col_map, a ? a->num_times() : 0);
  schedule.j0 = o.j0;
  if (a) {
    schedule.validate(a->num_times());
  }
  const auto fractions = schedule.fractions();

  BoundarySet boundaries;
  if (constant && o.spending.empty()) {
    boundaries = constant_boundaries(family, o.alpha, fractions);
  } else {
    const auto kernel = o.kernel.spec();
    const double n_b0 = o.n_b0.value_or(static_cast<double>(a->arm_size(0)));
    const double n_b1 = o.n_b1.value_or(static_cast<double>(a->arm_size(1)));
    const auto model = build_correlation_model(*a, schedule, n_b0, n_b1, kernel);
    const auto cfg = o.mc.config();
    if (!o.spending.empty()) {
      boundaries = spending_boundaries(model, parse_spending(o.spending, o.alpha), cfg, fractions);
    } else if (o.futility) {
      const double alpha0 = o.alpha0.value_or(o.alpha * static_cast<double>(*o.j0) /
                                              static_cast<double>(schedule.looks()));
      boundaries = calibrate_inner_wedge(model, family.delta, *o.j0, o.alpha, alpha0, cfg, fractions);
    } else {
      boundaries = calibrate_efficacy(model, family, o.alpha, cfg, fractions);
    }
  }

  nlohmann::json j = boundaries;
  j["schedule"] = schedule;
  if (o.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(o.out, j);
    print_boundaries(std::cout, boundaries);
    std::cout << "wrote " << o.out << '\n';
  }
  return kExitContinue;
}

// monitor -----------------------------------------------------------------

struct MonitorOptions {
  std::string study_a;
  std::string study_b;
  std::string boundaries;
  std::string state;
  std::optional<std::size_t> look;
  std::vector<double> times;
  std::vector<std::size_t> col_map;
  std::string out;
  KernelOptions kernel;
  std::optional<std::size_t> draws;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
};

int exit_code(Decision d) {
  switch (d) {
  case Decision::reject:
    return kExitReject;
  case Decision::futility:
    return kExitFutility;
  case Decision::fail_to_reject:
    return kExitFailToReject;
  case Decision::continue_monitoring:
    break;
  }
  return kExitContinue;
}

int run_monitor(const MonitorOptions &o) {
  const auto a = load_study_a(o.study_a).dataset;

  MonitoringState state;
  if (fs::exists(o.state)) {
    state = read_json(o.state).get<MonitoringState>();
  } else {
    if (o.boundaries.empty()) {
      throw UsageError("--boundaries is required when the state file does not exist yet");
    }
    const auto bj = read_json(o.boundaries);
    auto boundaries = bj.get<BoundarySet>();
    AnalysisSchedule schedule;
    if (!o.times.empty() || !o.col_map.empty()) {
      schedule = make_schedule(o.times, o.col_map, boundaries.looks());
    } else if (bj.contains("schedule")) {
      schedule = bj.at("schedule").get<AnalysisSchedule>();
    } else {
      schedule = AnalysisSchedule::identity(boundaries.looks());
    }
    schedule.j0 = boundaries.j0;
    state = start_monitoring(std::move(boundaries), std::move(schedule));
  }
  state.schedule.validate(a.num_times());

  const std::size_t look = o.look ? *o.look : count_observed_columns(o.study_b);
  if (look == 0) {
    throw DataError("Study B snapshot has no observed surrogate column");
  }
  if (look > state.looks()) {
    throw DataError("analysis " + std::to_string(look) + " beyond the planned " +
                    std::to_string(state.looks()) + " looks");
  }
  const auto load = load_study_b(o.study_b, look);
  if (load.report.rows_dropped > 0) {
    std::cerr << "note: dropped " << load.report.rows_dropped
              << " Study B rows with missing values through analysis " << look << '\n';
  }
  const auto &snapshot = load.snapshot;
  const auto kernel = o.kernel.spec();

  MonitoringState next;
  if (state.boundaries.spending) {
    if (!state.history.empty() && look <= state.history.back().look) {
      throw Error("analysis already recorded: look " + std::to_string(look));
    }
    AnalysisSchedule prefix = state.schedule;
    prefix.analysis_times.resize(look);
    prefix.study_a_column.resize(look);
    prefix.j0.reset();
    const auto fits = fit_schedule(a, prefix, kernel);
    const auto model = build_study_b_correlation(fits, snapshot);
    McConfig cfg{o.draws.value_or(state.boundaries.draws ? state.boundaries.draws : 1'000'000),
                 o.seed.value_or(state.boundaries.seed), o.workers};
    const auto prior = state.used_efficacy_bounds();
    const double b = spending_boundary_next(model.sqrt_corr, prior, *state.boundaries.spending,
                                            state.boundaries.fractions, cfg);
    next = evaluate_analysis(state, w_stat_at(fits[look - 1], snapshot, look), b);
  } else {
    const auto fit = fit_mu(a, 0, state.schedule.study_a_column[look - 1], kernel);
    next = evaluate_analysis(state, w_stat_at(fit, snapshot, look));
  }

  const auto &rec = next.history.back();
  nlohmann::json decision{{"j", rec.look},
                          {"t_j", rec.time},
                          {"n_b0", rec.n_b0},
                          {"n_b1", rec.n_b1},
                          {"delta_e", rec.delta_e},
                          {"var_hat", rec.var_hat},
                          {"w_stat", rec.w_stat},
                          {"b_j", finite_or_null(rec.efficacy_bound)},
                          {"a_j", rec.futility_bound ? nlohmann::json(*rec.futility_bound)
                                                     : nlohmann::json(nullptr)},
                          {"decision", to_string(rec.decision)},
                          {"status", to_string(next.status)},
                          {"exit_code", exit_code(rec.decision)}};
  write_json(o.state, next);
  if (!o.out.empty()) {
    write_json(o.out, decision);
  }
  std::cout << "analysis " << rec.look << " of " << next.looks() << ": W = " << std::fixed
            << std::setprecision(4) << rec.w_stat << ", b = " << bound_text(rec.efficacy_bound);
  if (rec.futility_bound) {
    std::cout << ", a = " << bound_text(*rec.futility_bound);
  }
  std::cout << " -> " << to_string(rec.decision) << '\n';
  return exit_code(rec.decision);
}

// simulate ----------------------------------------------------------------

struct SimulateOptions {
  std::vector<std::string> procedures = known_procedures();
  std::size_t reps = 1000;
  double theta = 0.0;
  std::size_t looks = 8;
  std::size_t n_a = 300;
  std::size_t n_b = 400;
  double latent_sd = 1.0;
  double noise_sd = 0.5;
  bool regenerate = false;
  double alpha = 0.05;
  double delta = 0.4;
  std::size_t j0 = 4;
  std::optional<double> alpha0;
  std::string out;
  std::string manifest;
  KernelOptions kernel;
  McOptions mc{100'000, 20240101, 1};
};

int run_simulate(const SimulateOptions &o) {
  for (const auto &p : o.procedures) {
    const auto &known = known_procedures();
    if (std::find(known.begin(), known.end(), p) == known.end()) {
      throw UsageError("unknown procedure '" + p + "'");
    }
  }
  DgpSpec dgp;
  dgp.looks = o.looks;
  dgp.n_a0 = dgp.n_a1 = o.n_a;
  dgp.n_b0 = dgp.n_b1 = o.n_b;
  dgp.latent_sd = o.latent_sd;
  dgp.noise_sd = o.noise_sd;
  dgp.theta = o.theta;
  dgp.seed = o.mc.seed;

  SimulationConfig cfg;
  cfg.reps = o.reps;
  cfg.workers = o.mc.workers;
  cfg.regenerate_study_a = o.regenerate;
  cfg.procedures = o.procedures;
  cfg.plan.alpha = o.alpha;
  cfg.plan.wt_delta = o.delta;
  cfg.plan.j0 = o.j0;
  cfg.plan.alpha0 = o.alpha0;
  cfg.plan.mc = {o.mc.draws, derive_seed(o.mc.seed, 0xCA11B7A7E), 1};
  cfg.plan.kernel = o.kernel.spec();

  const auto oc = run_operating_characteristics(dgp, cfg);
  if (o.out.empty()) {
    write_oc_table(std::cout, oc);
  } else {
    std::ofstream out(o.out);
    if (!out) {
      throw DataError("cannot write '" + o.out + "'");
    }
    write_oc_table(out, oc);
    std::cout << std::left << std::setw(18) << "procedure" << "E(T)            P(reject)\n";
    for (const auto &s : oc.summaries) {
      if (s.replications == 0) {
        std::cout << std::left << std::setw(18) << s.name << "not scored"
                  << (s.error ? ": " + *s.error : std::string()) << '\n';
        continue;
      }
      std::cout << std::left << std::setw(18) << s.name << std::fixed << std::setprecision(3)
                << s.expected_stop << " (" << s.expected_stop_se << ")   " << s.reject_prob
                << " (" << s.reject_prob_se << ")\n";
    }
  }
  if (oc.failures > 0) {
    std::cerr << "note: " << oc.failures << " of " << oc.config.reps
              << " replications failed and were excluded\n";
  }
  std::string manifest = o.manifest;
  if (manifest.empty() && !o.out.empty()) {
    manifest = o.out + ".manifest.json";
  }
  if (!manifest.empty()) {
    write_json(manifest, manifest_json(oc));
  }
  return kExitContinue;
}

// diagnose ----------------------------------------------------------------

struct DiagnoseOptions {
  std::string study_a;
  std::string study_b;
  std::vector<double> times;
  std::vector<std::size_t> col_map;
  std::string out;
  std::string curves;
  std::size_t grid = 100;
  double support_tolerance = 0.0;
  KernelOptions kernel;
};

int run_diagnose(const DiagnoseOptions &o) {
  const auto a = load_study_a(o.study_a).dataset;
  const auto schedule = make_schedule(o.times, o.col_map, a.num_times());
  schedule.validate(a.num_times());
  const auto kernel = o.kernel.spec();

  std::optional<StudyBSnapshot> b;
  if (!o.study_b.empty()) {
    const auto observed = std::min(count_observed_columns(o.study_b), schedule.looks());
    if (observed == 0) {
      throw DataError("Study B snapshot has no observed surrogate column");
    }
    b = load_study_b(o.study_b, observed).snapshot;
  }
  DiagnosticsConfig cfg;
  cfg.grid_size = o.grid;
  cfg.c5_tolerance = o.support_tolerance;
  const auto report = diagnose(a, b ? &*b : nullptr, schedule, kernel, cfg);
  const nlohmann::json j = report;
  if (o.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(o.out, j);
  }
  if (!o.curves.empty()) {
    std::ofstream curves(o.curves);
    if (!curves) {
      throw DataError("cannot write '" + o.curves + "'");
    }
    write_diagnostic_curves(curves, a, schedule, kernel, o.grid);
  }
  if (!o.out.empty()) {
    for (const auto &d : report.analyses) {
      std::cout << "j=" << d.look << " (Study A s_" << d.study_a_column << ")";
      if (d.c1) std::cout << "  C1 " << to_string(d.c1->status);
      if (d.c2) std::cout << "  C2 " << to_string(d.c2->status);
      if (d.c3_study_a) std::cout << "  C3 " << to_string(d.c3_study_a->status);
      if (d.c4) std::cout << "  C4 " << to_string(d.c4->status);
      if (d.c5) std::cout << "  C5 " << to_string(d.c5->status);
      std::cout << '\n';
    }
  }
  return kExitContinue;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Group sequential tests of a treatment effect on surrogate markers"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);

  DesignOptions design;
  auto *cmd_design = app.add_subcommand("design", "calibrate stopping boundaries from Study A");
  cmd_design->add_option("--study-a", design.study_a, "Study A CSV (id,group,y,s_1..s_J)");
  cmd_design->add_option("--family", design.family, "pocock | obf | wt | bonferroni | unadjusted")
      ->capture_default_str();
  cmd_design->add_option("--alpha", design.alpha)->capture_default_str();
  cmd_design->add_option("--delta", design.delta, "Wang-Tsiatis power")->capture_default_str();
  cmd_design->add_flag("--futility", design.futility, "add inner-wedge futility boundaries");
  cmd_design->add_option("--j0", design.j0, "first analysis eligible for futility stopping");
  cmd_design->add_option("--alpha0", design.alpha0, "rejection probability spent by j0");
  cmd_design->add_option("--spending", design.spending, "obf | pocock | power:RHO");
  cmd_design->add_option("--n-b0", design.n_b0, "planned Study B control size");
  cmd_design->add_option("--n-b1", design.n_b1, "planned Study B treated size");
  cmd_design->add_option("--out", design.out, "boundaries JSON");
  add_schedule(cmd_design, design.times, design.col_map);
  add_kernel(cmd_design, design.kernel);
  add_mc(cmd_design, design.mc);

  MonitorOptions monitor;
  McOptions monitor_mc;
  auto *cmd_monitor = app.add_subcommand("monitor", "evaluate one interim analysis of Study B");
  cmd_monitor->add_option("--study-a", monitor.study_a)->required();
  cmd_monitor->add_option("--study-b", monitor.study_b, "Study B snapshot CSV")->required();
  cmd_monitor->add_option("--boundaries", monitor.boundaries, "boundaries JSON from design");
  cmd_monitor->add_option("--state", monitor.state, "monitoring state JSON (created if absent)")
      ->required();
  cmd_monitor->add_option("--look", monitor.look, "analysis number (default: observed columns)");
  cmd_monitor->add_option("--out", monitor.out, "decision JSON");
  add_schedule(cmd_monitor, monitor.times, monitor.col_map);
  add_kernel(cmd_monitor, monitor.kernel);
  auto *monitor_b = cmd_monitor->add_option("--B", monitor_mc.draws, "spending-mode draws");
  auto *monitor_seed =
      cmd_monitor->add_option("--seed", monitor_mc.seed, "spending-mode seed")->envname("SURROSEQ_SEED");
  cmd_monitor->add_option("--workers", monitor.workers)->check(CLI::PositiveNumber);

  SimulateOptions simulate;
  auto *cmd_simulate = app.add_subcommand("simulate", "operating characteristics by simulation");
  cmd_simulate->add_option("--procedures", simulate.procedures, "comma separated procedure names")
      ->delimiter(',');
  cmd_simulate->add_option("--reps", simulate.reps)->capture_default_str();
  cmd_simulate->add_option("--theta", simulate.theta, "treatment effect (0 = null)")
      ->capture_default_str();
  cmd_simulate->add_option("--J", simulate.looks)->capture_default_str();
  cmd_simulate->add_option("--n-a", simulate.n_a, "Study A size per arm")->capture_default_str();
  cmd_simulate->add_option("--n-b", simulate.n_b, "Study B size per arm")->capture_default_str();
  cmd_simulate->add_option("--latent-sd", simulate.latent_sd)->capture_default_str();
  cmd_simulate->add_option("--noise-sd", simulate.noise_sd)->capture_default_str();
  cmd_simulate->add_flag("--regenerate-study-a", simulate.regenerate,
                         "draw a fresh Study A per replication");
  cmd_simulate->add_option("--alpha", simulate.alpha)->capture_default_str();
  cmd_simulate->add_option("--delta", simulate.delta)->capture_default_str();
  cmd_simulate->add_option("--j0", simulate.j0)->capture_default_str();
  cmd_simulate->add_option("--alpha0", simulate.alpha0);
  cmd_simulate->add_option("--out", simulate.out, "operating characteristics CSV");
  cmd_simulate->add_option("--manifest", simulate.manifest, "run manifest JSON");
  add_kernel(cmd_simulate, simulate.kernel);
  add_mc(cmd_simulate, simulate.mc);

  DiagnoseOptions diag;
  auto *cmd_diagnose = app.add_subcommand("diagnose", "empirical checks of the assumptions");
  cmd_diagnose->add_option("--study-a", diag.study_a)->required();
  cmd_diagnose->add_option("--study-b", diag.study_b);
  cmd_diagnose->add_option("--out", diag.out, "report JSON");
  cmd_diagnose->add_option("--curves", diag.curves, "curves CSV");
  cmd_diagnose->add_option("--grid", diag.grid)->capture_default_str();
  cmd_diagnose->add_option("--support-tolerance", diag.support_tolerance)->capture_default_str();
  add_schedule(cmd_diagnose, diag.times, diag.col_map);
  add_kernel(cmd_diagnose, diag.kernel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*cmd_design) {
      return run_design(design);
    }
    if (*cmd_monitor) {
      if (monitor_b->count() > 0) {
        monitor.draws = monitor_mc.draws;
      }
      if (monitor_seed->count() > 0) {
        monitor.seed = monitor_mc.seed;
      }
      return run_monitor(monitor);
    }
    if (*cmd_simulate) {
      return run_simulate(simulate);
    }
    if (*cmd_diagnose) {
      return run_diagnose(diag);
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
