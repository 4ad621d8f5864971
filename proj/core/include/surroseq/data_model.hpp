#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace surroseq {

// Analyses are numbered 1..J throughout the public API ("look" j). Study A
// surrogate columns are likewise 1-based, matching the s_1..s_J CSV headers.

enum class CheckStatus { pass, warn, fail, undefined };

const char *to_string(CheckStatus status);

struct StudyASubject {
  std::string id;
  int group = 0; // 0 = control, 1 = treated
  double outcome = 0.0;
  std::vector<double> surrogates; // s_1..s_J
};

/// Completed reference study: outcome and surrogates at every scheduled time.
struct StudyADataset {
  std::vector<StudyASubject> subjects;
  std::vector<double> schedule_times;

  std::size_t num_times() const { return schedule_times.size(); }
  std::size_t arm_size(int group) const;

  /// Surrogate values of one arm at a 1-based column, in subject order.
  std::vector<double> surrogate_column(int group, std::size_t column) const;
  std::vector<double> outcomes(int group) const;

  /// Throws DataError when any invariant is broken.
  void validate() const;
};

struct StudyBSubject {
  std::string id;
  int group = 0;
  std::vector<double> surrogates; // s_1..s_{j_obs}
};

/// New study as observed at analysis j_obs. There is no outcome field.
struct StudyBSnapshot {
  std::vector<StudyBSubject> subjects;
  std::size_t j_obs = 0;

  std::size_t arm_size(int group) const;
  std::vector<double> surrogate_column(int group, std::size_t look) const;

  /// Restrict to the first `look` analyses.
  StudyBSnapshot truncated(std::size_t look) const;

  void validate() const;
};

/// Study B monitoring plan: analysis times and the Study A column whose
/// conditional mean is borrowed at each analysis.
struct AnalysisSchedule {
  std::vector<double> analysis_times;
  std::vector<std::size_t> study_a_column; // 1-based, one per analysis
  std::optional<std::size_t> j0;           // first futility-eligible look

  static AnalysisSchedule identity(std::size_t looks);

  std::size_t looks() const { return analysis_times.size(); }

  /// t_j / t_J for each analysis.
  std::vector<double> fractions() const;

  void validate(std::size_t study_a_columns) const;
};

/// Equal spacing j/J.
std::vector<double> equal_fractions(std::size_t looks);

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
};

struct StudyALoad {
  StudyADataset dataset;
  IngestReport report;
};

struct StudyBLoad {
  StudyBSnapshot snapshot;
  IngestReport report;
};

/// Reads `id,group,y,s_1,...,s_J`. Rows with a missing outcome or surrogate
/// are dropped and counted. When `schedule_times` is empty the times default
/// to 1..J.
StudyALoad load_study_a(const std::filesystem::path &path,
                        std::vector<double> schedule_times = {});
StudyALoad parse_study_a(std::istream &in, std::vector<double> schedule_times = {});

/// Reads `id,group,s_1,...,s_k` keeping columns 1..j_obs. Rows missing any of
/// those columns are dropped.
StudyBLoad load_study_b(const std::filesystem::path &path, std::size_t j_obs);
StudyBLoad parse_study_b(std::istream &in, std::size_t j_obs);

/// Highest s_k column with at least one non-missing value.
std::size_t count_observed_columns(const std::filesystem::path &path);

void write_study_a(std::ostream &out, const StudyADataset &data);
void write_study_b(std::ostream &out, const StudyBSnapshot &data);

struct SupportRow {
  std::size_t look = 0;
  std::size_t study_a_column = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t outside = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  CheckStatus status = CheckStatus::pass;
};

struct SupportReport {
  double tolerance = 0.0;
  std::vector<SupportRow> rows;
  bool passed() const;
};

/// Fraction of Study B surrogates (both arms) outside the closed range of the
/// Study A control arm at the mapped column. Zero passes, up to `tolerance`
/// warns, above fails.
SupportReport check_support_c5(const StudyADataset &a, const StudyBSnapshot &b,
                               const AnalysisSchedule &schedule,
                               double tolerance = 0.0);

} // namespace surroseq
