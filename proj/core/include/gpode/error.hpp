#pragma once

#include <stdexcept>
#include <string>

namespace gpode {

enum class ErrorCode {
  InvalidArgument,
  InvalidGrid,
  CsvMalformedHeader,
  CsvNonMonotoneTime,
  CsvRaggedRow,
  CsvBadNumber,
  Io,
  UnsupportedScheme,
  GridTooShort,
  SingularConditions,
  TrajectoryTooShort,
  FactorizationFailed,
  NonFiniteLikelihood,
  SolverFailure,
  EnsembleFailure,
  DimensionMismatch,
  ModelDataMismatch,
  Config,
};

const char* to_string(ErrorCode code) noexcept;

// All library failures surface as gpode::Error; callers that need to branch
// on the failure kind inspect code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gpode
