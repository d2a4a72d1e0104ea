#include "svpsf/error.hpp"

namespace svpsf {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Size: return "size error";
    case ErrorKind::ModelMismatch: return "model mismatch";
    case ErrorKind::InvalidSample: return "invalid sample";
    case ErrorKind::DegeneratePupil: return "degenerate pupil";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::Infill: return "infill error";
    case ErrorKind::DegenerateInput: return "degenerate input";
    case ErrorKind::UndefinedVariance: return "undefined variance";
    case ErrorKind::Training: return "training error";
  }
  return "error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return 3;
    case ErrorKind::Numerical:
    case ErrorKind::DegenerateInput:
    case ErrorKind::Training:
    case ErrorKind::Infill:
    case ErrorKind::UndefinedVariance: return 4;
    default: return 2;
  }
}

}  // namespace svpsf
