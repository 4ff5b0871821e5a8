#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctsls {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data (bad CSV, failed sample validation).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: singular systems, divergent integrals, bad variances.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class RankDeficientError : public NumericalError {
 public:
  RankDeficientError(const std::string& what, std::vector<std::size_t> columns)
      : NumericalError(what), columns_(std::move(columns)) {}

  /// Design column indices that fall outside the numerically independent set.
  const std::vector<std::size_t>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::size_t> columns_;
};

}  // namespace ctsls
