#include "vtv/error.hpp"

namespace vtv {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidFrame: return "invalid_frame";
    case ErrorKind::InvalidTrace: return "invalid_trace";
    case ErrorKind::EmptyInput: return "empty_input";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Idempotence: return "idempotence";
    case ErrorKind::MalformedInterval: return "malformed_interval";
    case ErrorKind::Overlap: return "overlap";
    case ErrorKind::OutOfRange: return "out_of_range";
    case ErrorKind::EmptyWindow: return "empty_window";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Rank: return "rank";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Estimability: return "estimability";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::MissingData: return "missing_data";
    case ErrorKind::MissingGroup: return "missing_group";
    case ErrorKind::EmptyAnalysis: return "empty_analysis";
    case ErrorKind::DegenerateSample: return "degenerate_sample";
    case ErrorKind::TrainingDiverged: return "training_diverged";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

}  // namespace vtv
