#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "surroseq/data_model.hpp"

namespace fixture {

/// Small Study A: surrogates uniform on [j, j + 10] at column j, outcome
/// increasing in the last surrogate plus noise.
surroseq::StudyADataset study_a(std::size_t n0, std::size_t n1, std::size_t looks,
                                std::uint64_t seed);

/// Study B with surrogates inside the Study A range; treated shifted by `shift`.
surroseq::StudyBSnapshot study_b(std::size_t n0, std::size_t n1, std::size_t looks,
                                 std::uint64_t seed, double shift = 0.0);

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

} // namespace fixture
