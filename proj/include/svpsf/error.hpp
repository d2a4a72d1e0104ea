#pragma once

#include <stdexcept>
#include <string>

namespace svpsf {

enum class ErrorKind {
  Config,
  Io,
  Numerical,
  Domain,
  Size,
  ModelMismatch,
  InvalidSample,
  DegeneratePupil,
  DimensionMismatch,
  Infill,
  DegenerateInput,
  UndefinedVariance,
  Training,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

// Process exit status used by the command line tool: 2 config, 3 I/O, 4 numerical.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace svpsf
