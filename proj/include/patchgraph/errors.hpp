#pragma once

#include <stdexcept>
#include <string>

namespace patchgraph {

// Process exit codes used by the CLI. Library code throws; the CLI maps.
enum class ExitCode : int { Ok = 0, Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(ExitCode::Usage, msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(ExitCode::Data, msg) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(ExitCode::Numeric, msg) {}
};

// Malformed or corrupt external input (bad magic, truncated payload, bad CSV).
class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& msg) : DataError(msg) {}
};

// Structurally valid input violating a documented invariant.
class ValidationError : public DataError {
 public:
  explicit ValidationError(const std::string& msg) : DataError(msg) {}
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

class IndexError : public DataError {
 public:
  explicit IndexError(const std::string& msg) : DataError(msg) {}
};

class EmptyGraphError : public DataError {
 public:
  explicit EmptyGraphError(const std::string& msg) : DataError(msg) {}
};

// Input on which the requested statistic is mathematically undefined,
// e.g. Otsu on a constant raster.
class DegenerateInputError : public DataError {
 public:
  explicit DegenerateInputError(const std::string& msg) : DataError(msg) {}
};

// Infeasible synthetic cohort request.
class SpecError : public DataError {
 public:
  explicit SpecError(const std::string& msg) : DataError(msg) {}
};

class ConfigError : public DataError {
 public:
  explicit ConfigError(const std::string& msg) : DataError(msg) {}
};

// No comparable pairs / no events: the metric has no value, which is
// distinct from a value of 0.5.
class UndefinedMetricError : public DataError {
 public:
  explicit UndefinedMetricError(const std::string& msg) : DataError(msg) {}
};

class TrainingError : public NumericError {
 public:
  explicit TrainingError(const std::string& msg) : NumericError(msg) {}
};

}  // namespace patchgraph
