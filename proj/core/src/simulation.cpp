#include "surroseq/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "surroseq/effect_estimation.hpp"
#include "surroseq/error.hpp"

namespace surroseq {

double DgpSpec::kappa() const {
  const double l2 = latent_sd * latent_sd;
  return l2 / (l2 + noise_sd * noise_sd);
}

void DgpSpec::validate() const {
  if (looks == 0) {
    throw Error("generator needs at least one analysis");
  }
  if (n_a0 < 2 || n_a1 < 2 || n_b0 < 2 || n_b1 < 2) {
    throw Error("generator arm sizes must be at least 2");
  }
  if (!(latent_sd > 0.0) || !(noise_sd > 0.0)) {
    throw Error("generator standard deviations must be positive");
  }
  if (!(theta >= 0.0)) {
    throw Error("generator effect theta must be nonnegative");
  }
}

namespace {

// N(0, sd^2) truncated to +-kTruncation sd by rejection.
double truncated_normal(double sd, std::mt19937_64 &rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  for (;;) {
    const double v = z(rng);
    if (std::abs(v) <= DgpSpec::kTruncation) {
      return sd * v;
    }
  }
}

// Surrogate path of one subject; the outcome uses the last column.
std::vector<double> surrogate_path(const DgpSpec &dgp, int group, std::mt19937_64 &rng) {
  const double u = truncated_normal(dgp.latent_sd, rng);
  const double J = static_cast<double>(dgp.looks);
  std::vector<double> s(dgp.looks);
  for (std::size_t j = 1; j <= dgp.looks; ++j) {
    s[j - 1] = dgp.trend(j) + group * dgp.theta * (static_cast<double>(j) / J) + u +
               truncated_normal(dgp.noise_sd, rng);
  }
  return s;
}

} // namespace

StudyADataset generate_study_a(const DgpSpec &dgp, std::uint64_t seed) {
  dgp.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> outcome_noise(0.0, 1.0);
  StudyADataset a;
  for (std::size_t j = 1; j <= dgp.looks; ++j) {
    a.schedule_times.push_back(static_cast<double>(j));
  }
  const std::size_t sizes[2] = {dgp.n_a0, dgp.n_a1};
  std::size_t id = 0;
  for (int g = 0; g < 2; ++g) {
    for (std::size_t i = 0; i < sizes[g]; ++i) {
      StudyASubject subject;
      subject.id = "A" + std::to_string(++id);
      subject.group = g;
      subject.surrogates = surrogate_path(dgp, g, rng);
      subject.outcome = 2.0 + subject.surrogates.back() + outcome_noise(rng);
      a.subjects.push_back(std::move(subject));
    }
  }
  return a;
}

StudyBSnapshot generate_study_b(const DgpSpec &dgp, std::uint64_t seed) {
  dgp.validate();
  std::mt19937_64 rng(seed);
  StudyBSnapshot b;
  b.j_obs = dgp.looks;
  const std::size_t sizes[2] = {dgp.n_b0, dgp.n_b1};
  std::size_t id = 0;
  for (int g = 0; g < 2; ++g) {
    for (std::size_t i = 0; i < sizes[g]; ++i) {
      b.subjects.push_back({"B" + std::to_string(++id), g, surrogate_path(dgp, g, rng)});
    }
  }
  return b;
}

StudyPair generate_pair(const DgpSpec &dgp, std::uint64_t rep_seed) {
  return {generate_study_a(dgp, derive_seed(rep_seed, 0)),
          generate_study_b(dgp, derive_seed(rep_seed, 1))};
}

const std::vector<std::string> &known_procedures() {
  static const std::vector<std::string> names = {
      "fixed", "unadjusted", "bonferroni", "pocock", "obf", "wt",
      "pocock-futility", "obf-futility", "wt-futility"};
  return names;
}

namespace {

BoundarySet calibrate_named(const std::string &name, const CorrelationModel &model,
                            const ProcedurePlan &plan, const std::vector<double> &fractions,
                            double alpha0) {
  if (name == "fixed") {
    return fixed_sample_boundaries(plan.alpha, fractions);
  }
  if (name == "unadjusted") {
    return constant_boundaries(ShapeFamily::unadjusted(), plan.alpha, fractions);
  }
  if (name == "bonferroni") {
    return constant_boundaries(ShapeFamily::bonferroni(), plan.alpha, fractions);
  }
  if (name == "pocock") {
    return calibrate_efficacy(model, ShapeFamily::pocock(), plan.alpha, plan.mc, fractions);
  }
  if (name == "obf") {
    return calibrate_efficacy(model, ShapeFamily::obrien_fleming(), plan.alpha, plan.mc, fractions);
  }
  if (name == "wt") {
    return calibrate_efficacy(model, ShapeFamily::wang_tsiatis(plan.wt_delta), plan.alpha, plan.mc,
                              fractions);
  }
  if (name == "pocock-futility") {
    return calibrate_inner_wedge(model, 0.5, plan.j0, plan.alpha, alpha0, plan.mc, fractions);
  }
  if (name == "obf-futility") {
    return calibrate_inner_wedge(model, 0.0, plan.j0, plan.alpha, alpha0, plan.mc, fractions);
  }
  if (name == "wt-futility") {
    return calibrate_inner_wedge(model, plan.wt_delta, plan.j0, plan.alpha, alpha0, plan.mc,
                                 fractions);
  }
  throw Error("unknown procedure '" + name + "'");
}

} // namespace

std::vector<Procedure> build_procedures(const std::vector<std::string> &names,
                                        const CorrelationModel &model, const ProcedurePlan &plan,
                                        const std::vector<double> &fractions) {
  const double alpha0 = plan.alpha0.value_or(plan.alpha * static_cast<double>(plan.j0) /
                                             static_cast<double>(model.looks));
  std::vector<Procedure> out;
  for (const auto &name : names) {
    Procedure p{name, {}, std::nullopt};
    try {
      p.boundaries = calibrate_named(name, model, plan, fractions, alpha0);
    } catch (const NumericalError &e) {
      p.error = e.what();
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

struct Design {
  std::vector<FittedConditionalMean> fits;
  std::vector<Procedure> procedures;
};

Design design_for(const StudyADataset &a, const DgpSpec &dgp, const SimulationConfig &config) {
  const auto schedule = AnalysisSchedule::identity(dgp.looks);
  const auto model =
      build_correlation_model(a, schedule, static_cast<double>(dgp.n_b0),
                              static_cast<double>(dgp.n_b1), config.plan.kernel);
  return {fit_schedule(a, schedule, config.plan.kernel),
          build_procedures(config.procedures, model, config.plan, schedule.fractions())};
}

void score(ReplicationResult &rep, const Design &design, const StudyBSnapshot &b) {
  for (std::size_t j = 1; j <= design.fits.size(); ++j) {
    rep.w.push_back(w_stat_at(design.fits[j - 1], b, j).w_stat);
  }
  for (const auto &p : design.procedures) {
    if (p.error) {
      rep.outcomes.emplace_back();
    } else {
      rep.outcomes.push_back(apply_stopping_rule(rep.w, p.boundaries));
    }
  }
}

} // namespace

OperatingCharacteristics run_operating_characteristics(const DgpSpec &dgp,
                                                       const SimulationConfig &config) {
  dgp.validate();
  if (config.reps == 0) {
    throw Error("simulation needs at least one replication");
  }
  if (config.procedures.empty()) {
    throw Error("simulation needs at least one procedure");
  }
  OperatingCharacteristics oc;
  oc.dgp = dgp;
  oc.config = config;
  oc.study_a_seed = derive_seed(dgp.seed, 0);

  // Nested parallelism would oversubscribe; replications own the workers.
  SimulationConfig inner = config;
  inner.plan.mc.workers = config.workers;
  std::optional<Design> fixed;
  if (!config.regenerate_study_a) {
    fixed = design_for(generate_study_a(dgp, oc.study_a_seed), dgp, inner);
    oc.procedures = fixed->procedures;
  }
  inner.plan.mc.workers = 1;

  oc.replications.resize(config.reps);
  parallel_for(config.reps, config.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      auto &rep = oc.replications[r];
      rep.seed = derive_seed(dgp.seed, r + 1);
      try {
        if (fixed) {
          score(rep, *fixed, generate_study_b(dgp, derive_seed(rep.seed, 1)));
        } else {
          const auto pair = generate_pair(dgp, rep.seed);
          score(rep, design_for(pair.a, dgp, inner), pair.b);
        }
      } catch (const Error &e) {
        rep.w.clear();
        rep.outcomes.clear();
        rep.error = e.what();
      }
    }
  });

  for (std::size_t k = 0; k < config.procedures.size(); ++k) {
    ProcedureSummary s;
    s.name = config.procedures[k];
    double sum_t = 0.0;
    double sum_t2 = 0.0;
    double rejections = 0.0;
    if (k < oc.procedures.size()) {
      s.error = oc.procedures[k].error;
    }
    for (const auto &rep : oc.replications) {
      if (rep.error || !rep.outcomes[k]) {
        continue;
      }
      const double t = static_cast<double>(rep.outcomes[k]->stop_look);
      sum_t += t;
      sum_t2 += t * t;
      rejections += rep.outcomes[k]->rejected ? 1.0 : 0.0;
      ++s.replications;
    }
    if (s.replications > 0) {
      const double n = static_cast<double>(s.replications);
      s.expected_stop = sum_t / n;
      s.reject_prob = rejections / n;
      s.reject_prob_se = std::sqrt(s.reject_prob * (1.0 - s.reject_prob) / n);
      if (s.replications > 1) {
        const double var = std::max(0.0, (sum_t2 - n * s.expected_stop * s.expected_stop) / (n - 1.0));
        s.expected_stop_se = std::sqrt(var / n);
      }
    }
    oc.summaries.push_back(s);
  }
  oc.failures = static_cast<std::size_t>(
      std::count_if(oc.replications.begin(), oc.replications.end(),
                    [](const ReplicationResult &r) { return r.error.has_value(); }));
  return oc;
}

void write_oc_table(std::ostream &out, const OperatingCharacteristics &oc) {
  out << "procedure,E_T,SE_E_T,P_reject,SE_P_reject,replications,note\n";
  for (const auto &s : oc.summaries) {
    out << s.name << ',';
    if (s.replications > 0) {
      out << s.expected_stop << ',' << s.expected_stop_se << ',' << s.reject_prob << ','
          << s.reject_prob_se;
    } else {
      out << "NA,NA,NA,NA";
    }
    out << ',' << s.replications << ',';
    if (s.error) {
      std::string note = *s.error;
      std::replace(note.begin(), note.end(), '"', '\'');
      out << '"' << note << '"';
    }
    out << '\n';
  }
}

void to_json(nlohmann::json &j, const DgpSpec &d) {
  j = nlohmann::json{{"J", d.looks},         {"n_a0", d.n_a0},
                     {"n_a1", d.n_a1},       {"n_b0", d.n_b0},
                     {"n_b1", d.n_b1},       {"latent_sd", d.latent_sd},
                     {"noise_sd", d.noise_sd}, {"theta", d.theta},
                     {"seed", d.seed}};
}

nlohmann::json manifest_json(const OperatingCharacteristics &oc) {
  const auto &plan = oc.config.plan;
  const double alpha0 = plan.alpha0.value_or(plan.alpha * static_cast<double>(plan.j0) /
                                             static_cast<double>(oc.dgp.looks));
  nlohmann::json seeds = nlohmann::json::array();
  nlohmann::json failures = nlohmann::json::array();
  for (std::size_t r = 0; r < oc.replications.size(); ++r) {
    seeds.push_back(oc.replications[r].seed);
    if (oc.replications[r].error) {
      failures.push_back({{"replication", r + 1}, {"error", *oc.replications[r].error}});
    }
  }
  nlohmann::json boundaries = nlohmann::json::object();
  for (const auto &p : oc.procedures) {
    boundaries[p.name] = p.error ? nlohmann::json{{"error", *p.error}} : nlohmann::json(p.boundaries);
  }
  return nlohmann::json{
      {"dgp", oc.dgp},
      {"reps", oc.config.reps},
      {"workers", oc.config.workers},
      {"regenerate_study_a", oc.config.regenerate_study_a},
      {"procedures", oc.config.procedures},
      {"alpha", plan.alpha},
      {"wt_delta", plan.wt_delta},
      {"j0", plan.j0},
      {"alpha0", alpha0},
      {"calibration_draws", plan.mc.draws},
      {"calibration_seed", plan.mc.seed},
      {"kernel", plan.kernel},
      {"study_a_seed", oc.study_a_seed},
      {"replication_seeds", seeds},
      {"failures", failures},
      {"boundaries", boundaries}};
}

} // namespace surroseq
