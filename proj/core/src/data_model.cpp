#include "surroseq/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "surroseq/error.hpp"

namespace surroseq {

const char *to_string(CheckStatus status) {
  switch (status) {
  case CheckStatus::pass:
    return "pass";
  case CheckStatus::warn:
    return "warn";
  case CheckStatus::fail:
    return "fail";
  case CheckStatus::undefined:
    return "undefined";
  }
  return "undefined";
}

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string &line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

bool is_missing_token(const std::string &field) {
  return field.empty() || field == "NA" || field == "NaN" || field == "nan";
}

double parse_number(const std::string &field, std::size_t line_no, const std::string &column) {
  if (is_missing_token(field)) {
    return kMissing;
  }
  double value = 0.0;
  const char *begin = field.data();
  const char *end = begin + field.size();
  if (*begin == '+') {
    ++begin;
  }
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw DataError("malformed CSV: line " + std::to_string(line_no) + ", column '" + column +
                    "' is not a number: '" + field + "'");
  }
  return value;
}

int parse_group(const std::string &field, std::size_t line_no) {
  if (field == "0") {
    return 0;
  }
  if (field == "1") {
    return 1;
  }
  throw DataError("invalid group label '" + field + "' on line " + std::to_string(line_no));
}

struct CsvTable {
  std::map<std::string, std::size_t> column_index;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::size_t surrogate_columns = 0; // contiguous s_1..s_k present in header
};

CsvTable read_table(std::istream &in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
      line.erase(0, 3);
    }
    if (trim(line).empty()) {
      continue;
    }
    auto fields = split_row(line);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (!table.column_index.emplace(fields[i], i).second) {
          throw DataError("malformed CSV: duplicate column '" + fields[i] + "'");
        }
      }
      have_header = true;
      continue;
    }
    if (fields.size() != table.column_index.size()) {
      throw DataError("malformed CSV: line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(table.column_index.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) {
    throw DataError("malformed CSV: missing header row");
  }
  while (table.column_index.count("s_" + std::to_string(table.surrogate_columns + 1)) != 0) {
    ++table.surrogate_columns;
  }
  return table;
}

std::size_t require_column(const CsvTable &table, const std::string &name) {
  auto it = table.column_index.find(name);
  if (it == table.column_index.end()) {
    throw DataError("malformed CSV: required column '" + name + "' not found");
  }
  return it->second;
}

std::ifstream open_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open CSV file '" + path.string() + "'");
  }
  return in;
}

void require_both_arms(std::size_t n0, std::size_t n1, const char *study) {
  if (n0 == 0) {
    throw DataError(std::string("empty control arm in ") + study);
  }
  if (n1 == 0) {
    throw DataError(std::string("empty treatment arm in ") + study);
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) {
    return {};
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

} // namespace

std::size_t StudyADataset::arm_size(int group) const {
  return static_cast<std::size_t>(std::count_if(
      subjects.begin(), subjects.end(), [group](const auto &s) { return s.group == group; }));
}

std::vector<double> StudyADataset::surrogate_column(int group, std::size_t column) const {
  if (column < 1 || column > num_times()) {
    throw DataError("Study A column " + std::to_string(column) + " out of range [1, " +
                    std::to_string(num_times()) + "]");
  }
  std::vector<double> out;
  for (const auto &s : subjects) {
    if (s.group == group) {
      out.push_back(s.surrogates[column - 1]);
    }
  }
  return out;
}

std::vector<double> StudyADataset::outcomes(int group) const {
  std::vector<double> out;
  for (const auto &s : subjects) {
    if (s.group == group) {
      out.push_back(s.outcome);
    }
  }
  return out;
}

void StudyADataset::validate() const {
  const std::size_t J = num_times();
  if (J == 0) {
    throw DataError("Study A has no surrogate columns");
  }
  for (std::size_t j = 1; j < J; ++j) {
    if (!(schedule_times[j] > schedule_times[j - 1])) {
      throw DataError("Study A schedule times must be strictly increasing");
    }
  }
  for (const auto &s : subjects) {
    if (s.group != 0 && s.group != 1) {
      throw DataError("invalid group label for subject '" + s.id + "'");
    }
    if (s.surrogates.size() != J) {
      throw DataError("subject '" + s.id + "' does not have " + std::to_string(J) +
                      " surrogate values");
    }
    if (!std::isfinite(s.outcome) ||
        !std::all_of(s.surrogates.begin(), s.surrogates.end(), [](double v) { return std::isfinite(v); })) {
      throw DataError("subject '" + s.id + "' has missing values");
    }
  }
  require_both_arms(arm_size(0), arm_size(1), "Study A");
}

std::size_t StudyBSnapshot::arm_size(int group) const {
  return static_cast<std::size_t>(std::count_if(
      subjects.begin(), subjects.end(), [group](const auto &s) { return s.group == group; }));
}

std::vector<double> StudyBSnapshot::surrogate_column(int group, std::size_t look) const {
  if (look < 1 || look > j_obs) {
    throw DataError("analysis column missing: look " + std::to_string(look) +
                    " not observed (j_obs = " + std::to_string(j_obs) + ")");
  }
  std::vector<double> out;
  for (const auto &s : subjects) {
    if (s.group == group) {
      out.push_back(s.surrogates[look - 1]);
    }
  }
  return out;
}

StudyBSnapshot StudyBSnapshot::truncated(std::size_t look) const {
  if (look > j_obs) {
    throw DataError("analysis column missing: cannot truncate to look " + std::to_string(look));
  }
  StudyBSnapshot out;
  out.j_obs = look;
  out.subjects.reserve(subjects.size());
  for (const auto &s : subjects) {
    out.subjects.push_back({s.id, s.group, {s.surrogates.begin(), s.surrogates.begin() + static_cast<std::ptrdiff_t>(look)}});
  }
  return out;
}

void StudyBSnapshot::validate() const {
  for (const auto &s : subjects) {
    if (s.group != 0 && s.group != 1) {
      throw DataError("invalid group label for subject '" + s.id + "'");
    }
    if (s.surrogates.size() != j_obs) {
      throw DataError("subject '" + s.id + "' does not have " + std::to_string(j_obs) +
                      " surrogate values");
    }
    if (!std::all_of(s.surrogates.begin(), s.surrogates.end(), [](double v) { return std::isfinite(v); })) {
      throw DataError("subject '" + s.id + "' has missing surrogate values");
    }
  }
  require_both_arms(arm_size(0), arm_size(1), "Study B");
}

AnalysisSchedule AnalysisSchedule::identity(std::size_t looks) {
  AnalysisSchedule s;
  for (std::size_t j = 1; j <= looks; ++j) {
    s.analysis_times.push_back(static_cast<double>(j));
    s.study_a_column.push_back(j);
  }
  return s;
}

std::vector<double> AnalysisSchedule::fractions() const {
  std::vector<double> r;
  r.reserve(analysis_times.size());
  for (double t : analysis_times) {
    r.push_back(t / analysis_times.back());
  }
  if (!r.empty()) {
    r.back() = 1.0;
  }
  return r;
}

void AnalysisSchedule::validate(std::size_t study_a_columns) const {
  if (analysis_times.empty()) {
    throw DataError("analysis schedule is empty");
  }
  if (!(analysis_times.front() > 0.0)) {
    throw DataError("analysis times must be positive");
  }
  for (std::size_t j = 1; j < analysis_times.size(); ++j) {
    if (!(analysis_times[j] > analysis_times[j - 1])) {
      throw DataError("analysis times must be strictly increasing");
    }
  }
  if (study_a_column.size() != analysis_times.size()) {
    throw DataError("Study A column map must have one entry per analysis");
  }
  for (auto c : study_a_column) {
    if (c < 1 || c > study_a_columns) {
      throw DataError("Study A column map entry " + std::to_string(c) + " outside [1, " +
                      std::to_string(study_a_columns) + "]");
    }
  }
  if (j0 && (*j0 < 1 || *j0 > analysis_times.size())) {
    throw DataError("j0 must lie in [1, " + std::to_string(analysis_times.size()) + "]");
  }
}

std::vector<double> equal_fractions(std::size_t looks) {
  std::vector<double> r;
  for (std::size_t j = 1; j <= looks; ++j) {
    r.push_back(static_cast<double>(j) / static_cast<double>(looks));
  }
  return r;
}

StudyALoad parse_study_a(std::istream &in, std::vector<double> schedule_times) {
  const auto table = read_table(in);
  const auto id_col = require_column(table, "id");
  const auto group_col = require_column(table, "group");
  const auto y_col = require_column(table, "y");
  const std::size_t J = table.surrogate_columns;
  if (J == 0) {
    throw DataError("malformed CSV: no surrogate columns s_1..s_J");
  }
  if (schedule_times.empty()) {
    for (std::size_t j = 1; j <= J; ++j) {
      schedule_times.push_back(static_cast<double>(j));
    }
  } else if (schedule_times.size() != J) {
    throw DataError("Study A schedule has " + std::to_string(schedule_times.size()) +
                    " times but the CSV has " + std::to_string(J) + " surrogate columns");
  }

  StudyALoad load;
  load.dataset.schedule_times = std::move(schedule_times);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto &row = table.rows[r];
    const auto line_no = table.line_numbers[r];
    ++load.report.rows_read;
    StudyASubject subject;
    subject.id = row[id_col];
    subject.group = parse_group(row[group_col], line_no);
    subject.outcome = parse_number(row[y_col], line_no, "y");
    bool complete = std::isfinite(subject.outcome);
    for (std::size_t j = 1; j <= J; ++j) {
      const auto name = "s_" + std::to_string(j);
      double v = parse_number(row[table.column_index.at(name)], line_no, name);
      complete = complete && std::isfinite(v);
      subject.surrogates.push_back(v);
    }
    if (!complete) {
      ++load.report.rows_dropped;
      continue;
    }
    load.dataset.subjects.push_back(std::move(subject));
  }
  load.dataset.validate();
  return load;
}

StudyALoad load_study_a(const std::filesystem::path &path, std::vector<double> schedule_times) {
  auto in = open_csv(path);
  return parse_study_a(in, std::move(schedule_times));
}

StudyBLoad parse_study_b(std::istream &in, std::size_t j_obs) {
  const auto table = read_table(in);
  const auto id_col = require_column(table, "id");
  const auto group_col = require_column(table, "group");
  if (j_obs == 0) {
    throw DataError("j_obs must be at least 1");
  }
  if (j_obs > table.surrogate_columns) {
    throw DataError("analysis column missing: s_" + std::to_string(j_obs) + " not in file (found " +
                    std::to_string(table.surrogate_columns) + " surrogate columns)");
  }

  StudyBLoad load;
  load.snapshot.j_obs = j_obs;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto &row = table.rows[r];
    const auto line_no = table.line_numbers[r];
    ++load.report.rows_read;
    StudyBSubject subject;
    subject.id = row[id_col];
    subject.group = parse_group(row[group_col], line_no);
    bool complete = true;
    for (std::size_t j = 1; j <= j_obs; ++j) {
      const auto name = "s_" + std::to_string(j);
      double v = parse_number(row[table.column_index.at(name)], line_no, name);
      complete = complete && std::isfinite(v);
      subject.surrogates.push_back(v);
    }
    if (!complete) {
      ++load.report.rows_dropped;
      continue;
    }
    load.snapshot.subjects.push_back(std::move(subject));
  }
  load.snapshot.validate();
  return load;
}

StudyBLoad load_study_b(const std::filesystem::path &path, std::size_t j_obs) {
  auto in = open_csv(path);
  return parse_study_b(in, j_obs);
}

std::size_t count_observed_columns(const std::filesystem::path &path) {
  auto in = open_csv(path);
  const auto table = read_table(in);
  std::size_t observed = 0;
  for (std::size_t j = 1; j <= table.surrogate_columns; ++j) {
    const auto col = table.column_index.at("s_" + std::to_string(j));
    const bool any = std::any_of(table.rows.begin(), table.rows.end(),
                                 [col](const auto &row) { return !is_missing_token(row[col]); });
    if (any) {
      observed = j;
    }
  }
  return observed;
}

void write_study_a(std::ostream &out, const StudyADataset &data) {
  out << "id,group,y";
  for (std::size_t j = 1; j <= data.num_times(); ++j) {
    out << ",s_" << j;
  }
  out << '\n';
  for (const auto &s : data.subjects) {
    out << s.id << ',' << s.group << ',' << format_double(s.outcome);
    for (double v : s.surrogates) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

void write_study_b(std::ostream &out, const StudyBSnapshot &data) {
  out << "id,group";
  for (std::size_t j = 1; j <= data.j_obs; ++j) {
    out << ",s_" << j;
  }
  out << '\n';
  for (const auto &s : data.subjects) {
    out << s.id << ',' << s.group;
    for (double v : s.surrogates) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

bool SupportReport::passed() const {
  return std::none_of(rows.begin(), rows.end(),
                      [](const auto &r) { return r.status == CheckStatus::fail; });
}

SupportReport check_support_c5(const StudyADataset &a, const StudyBSnapshot &b,
                               const AnalysisSchedule &schedule, double tolerance) {
  SupportReport report;
  report.tolerance = tolerance;
  const std::size_t looks = std::min(b.j_obs, schedule.looks());
  for (std::size_t j = 1; j <= looks; ++j) {
    SupportRow row;
    row.look = j;
    row.study_a_column = schedule.study_a_column[j - 1];
    const auto control = a.surrogate_column(0, row.study_a_column);
    auto [lo, hi] = std::minmax_element(control.begin(), control.end());
    row.lower = *lo;
    row.upper = *hi;
    for (const auto &s : b.subjects) {
      const double v = s.surrogates[j - 1];
      ++row.total;
      if (v < row.lower || v > row.upper) {
        ++row.outside;
      }
    }
    row.fraction = row.total == 0 ? 0.0 : static_cast<double>(row.outside) / static_cast<double>(row.total);
    if (row.outside == 0) {
      row.status = CheckStatus::pass;
    } else if (row.fraction <= tolerance) {
      row.status = CheckStatus::warn;
    } else {
      row.status = CheckStatus::fail;
    }
    report.rows.push_back(row);
  }
  return report;
}

} // namespace surroseq
