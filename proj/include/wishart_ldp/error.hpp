#pragma once

#include <stdexcept>
#include <string>

namespace wldp {

enum class ErrorCode {
  InvalidArgument = 1,
  IndefiniteInput,
  SingularPencil,
  BadInitialCondition,
  DegeneratePath,
  DomainError,
  BlowUp,
  ParseError,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure in the library surfaces as an Error carrying one of the codes
// above; the C API maps them one-to-one onto status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace wldp
