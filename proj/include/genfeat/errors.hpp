#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace genfeat {

// Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric failure.
class Error : public std::runtime_error {
public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

private:
  int exit_code_;
};

class UsageError : public Error {
public:
  explicit UsageError(std::string msg) : Error(std::move(msg), 1) {}
};

// Malformed or inconsistent input data (files, corpora, tensors fed across
// module boundaries).
class DataError : public Error {
public:
  explicit DataError(std::string msg) : Error(std::move(msg), 2) {}
};

// Non-finite values, failed convergence, out-of-domain math.
class NumericError : public Error {
public:
  explicit NumericError(std::string msg) : Error(std::move(msg), 3) {}
};

// Tied plurality in annotation votes; the document needs re-annotation.
class TieError : public DataError {
public:
  explicit TieError(std::string msg) : DataError(std::move(msg)) {}
};

}  // namespace genfeat
