#pragma once

#include <stdexcept>
#include <string>

namespace cactus {

// Error categories. The CLI maps each category onto a process exit code.
enum class ErrorKind { Config, Data, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Tensor dimensions do not line up.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::Data, "shape error: " + what) {}
};

// A caller broke an operation's precondition (bad label row, bad argument range).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::Config, "contract error: " + what) {}
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, "data error: " + what) {}
};

// Configuration or specification problems (unknown keys, overlapping split lists).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, "config error: " + what) {}
};

// Requested structure cannot be built from the data (too few clusters, margin too wide).
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(ErrorKind::Data, "infeasible: " + what) {}
};

// Non-finite values or divergence.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, "numeric error: " + what) {}
};

}  // namespace cactus
