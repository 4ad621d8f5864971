#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace fixture {

surroseq::StudyADataset study_a(std::size_t n0, std::size_t n1, std::size_t looks,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  surroseq::StudyADataset a;
  for (std::size_t j = 1; j <= looks; ++j) {
    a.schedule_times.push_back(static_cast<double>(j));
  }
  std::size_t id = 0;
  for (int g = 0; g < 2; ++g) {
    const std::size_t n = g == 0 ? n0 : n1;
    for (std::size_t i = 0; i < n; ++i) {
      surroseq::StudyASubject s;
      s.id = "a" + std::to_string(++id);
      s.group = g;
      const double base = 10.0 * unit(rng);
      for (std::size_t j = 1; j <= looks; ++j) {
        s.surrogates.push_back(static_cast<double>(j) + std::clamp(base + noise(rng), 0.0, 10.0));
      }
      s.outcome = 0.5 * s.surrogates.back() + 0.3 * g + noise(rng);
      a.subjects.push_back(std::move(s));
    }
  }
  return a;
}

surroseq::StudyBSnapshot study_b(std::size_t n0, std::size_t n1, std::size_t looks,
                                 std::uint64_t seed, double shift) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(2.0, 8.0);
  surroseq::StudyBSnapshot b;
  b.j_obs = looks;
  std::size_t id = 0;
  for (int g = 0; g < 2; ++g) {
    const std::size_t n = g == 0 ? n0 : n1;
    for (std::size_t i = 0; i < n; ++i) {
      surroseq::StudyBSubject s;
      s.id = "b" + std::to_string(++id);
      s.group = g;
      const double base = unit(rng) + (g == 1 ? shift : 0.0);
      for (std::size_t j = 1; j <= looks; ++j) {
        s.surrogates.push_back(static_cast<double>(j) + base + 0.2 * (unit(rng) - 5.0));
      }
      b.subjects.push_back(std::move(s));
    }
  }
  return b;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("surroseq-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

std::string read_text(const std::filesystem::path &path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

} // namespace fixture
