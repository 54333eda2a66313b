#pragma once

#include <stdexcept>
#include <string>

namespace vtv {

// Machine-readable error category. The CLI serializes `kind` into its error
// record, so the strings below are part of the external contract.
enum class ErrorKind {
  InvalidFrame,
  InvalidTrace,
  EmptyInput,
  Shape,
  Idempotence,
  MalformedInterval,
  Overlap,
  OutOfRange,
  EmptyWindow,
  Domain,
  Rank,
  Convergence,
  Estimability,
  Lookup,
  MissingData,
  MissingGroup,
  EmptyAnalysis,
  DegenerateSample,
  TrainingDiverged,
  Validation,
  Parse,
  Io,
  Config,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Thrown by train() when the loss becomes non-finite.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(int epoch, const std::string& what)
      : Error(ErrorKind::TrainingDiverged, what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace vtv
