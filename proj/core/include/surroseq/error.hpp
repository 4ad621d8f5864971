#pragma once

#include <stdexcept>
#include <string>

namespace surroseq {

/// Base class for every error raised by the library. Messages are stable and
/// are surfaced verbatim by the command line tool.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input data could not be parsed or failed structural validation.
class DataError : public Error {
public:
  using Error::Error;
};

/// A numerical procedure has no admissible answer for the given inputs.
class NumericalError : public Error {
public:
  using Error::Error;
};

} // namespace surroseq
