#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surroseq/boundaries.hpp"
#include "surroseq/data_model.hpp"
#include "surroseq/kernel_regression.hpp"
#include "surroseq/mvn_mc.hpp"

namespace surroseq {

/// Synthetic two-study generator. Subject i in group g has
/// S_ij = 0.5 j + g theta (j/J) + U_i + e_ij and Y_i = 2 + S_iJ + N(0, 1),
/// with U_i ~ N(0, latent_sd^2) and e_ij ~ N(0, noise_sd^2), both truncated at
/// kTruncation standard deviations. Untruncated tails put Study B subjects
/// beyond the kernel reach of the Study A controls in about a third of the
/// replications; at two standard deviations that does not happen.
struct DgpSpec {
  static constexpr double kTruncation = 2.0;

  std::size_t looks = 8;
  std::size_t n_a0 = 300;
  std::size_t n_a1 = 300;
  std::size_t n_b0 = 400;
  std::size_t n_b1 = 400;
  double latent_sd = 1.0;
  double noise_sd = 0.5;
  double theta = 0.0;
  std::uint64_t seed = 20240101;

  double trend(std::size_t j) const { return 0.5 * static_cast<double>(j); }
  /// latent_sd^2 / (latent_sd^2 + noise_sd^2)
  double kappa() const;
  void validate() const;
};

StudyADataset generate_study_a(const DgpSpec &dgp, std::uint64_t seed);
/// All looks observed (j_obs = J).
StudyBSnapshot generate_study_b(const DgpSpec &dgp, std::uint64_t seed);

struct StudyPair {
  StudyADataset a;
  StudyBSnapshot b;
};

StudyPair generate_pair(const DgpSpec &dgp, std::uint64_t rep_seed);

/// Names accepted by build_procedures: fixed, unadjusted, bonferroni, pocock,
/// obf, wt and the inner-wedge variants pocock-futility, obf-futility,
/// wt-futility.
const std::vector<std::string> &known_procedures();

struct ProcedurePlan {
  double alpha = 0.05;
  double wt_delta = 0.4;
  std::size_t j0 = 4;
  std::optional<double> alpha0; // defaults to alpha * j0 / J
  McConfig mc{100'000, 20240101, 1};
  KernelSpec kernel;
};

struct Procedure {
  std::string name;
  BoundarySet boundaries;
  std::optional<std::string> error; // calibration failed; never scored
};

/// Calibrates each named procedure against `model`. Unknown names throw;
/// calibration failures (NumericalError) are recorded on the procedure.
std::vector<Procedure> build_procedures(const std::vector<std::string> &names,
                                        const CorrelationModel &model, const ProcedurePlan &plan,
                                        const std::vector<double> &fractions);

struct SimulationConfig {
  std::size_t reps = 1000;
  unsigned workers = 1;
  bool regenerate_study_a = false;
  std::vector<std::string> procedures = known_procedures();
  ProcedurePlan plan;
};

struct ReplicationResult {
  std::uint64_t seed = 0;
  std::vector<double> w; // W_1..W_J, empty on failure
  std::vector<std::optional<PathOutcome>> outcomes; // per procedure; empty if not calibrated
  std::optional<std::string> error;
};

struct ProcedureSummary {
  std::string name;
  double expected_stop = 0.0;
  double expected_stop_se = 0.0;
  double reject_prob = 0.0;
  double reject_prob_se = 0.0;
  std::size_t replications = 0;
  std::optional<std::string> error; // first calibration failure, if any
};

struct OperatingCharacteristics {
  DgpSpec dgp;
  SimulationConfig config;
  std::uint64_t study_a_seed = 0;
  std::vector<Procedure> procedures; // as calibrated on the fixed Study A
  std::vector<ProcedureSummary> summaries;
  std::vector<ReplicationResult> replications;
  std::size_t failures = 0;
};

/// Every procedure is scored on the same W path within a replication.
/// Replications whose pipeline throws are counted in `failures` and excluded
/// from the summaries.
OperatingCharacteristics run_operating_characteristics(const DgpSpec &dgp,
                                                       const SimulationConfig &config);

/// procedure, E_T, SE_E_T, P_reject, SE_P_reject, replications, note
void write_oc_table(std::ostream &out, const OperatingCharacteristics &oc);

/// Run manifest: generator settings, calibration settings, every seed.
nlohmann::json manifest_json(const OperatingCharacteristics &oc);

void to_json(nlohmann::json &j, const DgpSpec &d);

} // namespace surroseq
