#include "wishart_ldp/error.hpp"

namespace wldp {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IndefiniteInput: return "IndefiniteInput";
    case ErrorCode::SingularPencil: return "SingularPencil";
    case ErrorCode::BadInitialCondition: return "BadInitialCondition";
    case ErrorCode::DegeneratePath: return "DegeneratePath";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace wldp
