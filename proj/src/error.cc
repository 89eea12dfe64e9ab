#include "lt/error.h"

namespace lt {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch:
      return "ShapeMismatch";
    case ErrorCode::kDTypeMismatch:
      return "DTypeMismatch";
    case ErrorCode::kInvalidAttrs:
      return "InvalidAttrs";
    case ErrorCode::kDeviceMismatch:
      return "DeviceMismatch";
    case ErrorCode::kUnknownDevice:
      return "UnknownDevice";
    case ErrorCode::kEmptyRoots:
      return "EmptyRoots";
    case ErrorCode::kDivisionSemantics:
      return "DivisionSemantics";
    case ErrorCode::kUnknownOp:
      return "UnknownOp";
    case ErrorCode::kLengthMismatch:
      return "LengthMismatch";
    case ErrorCode::kUseAfterDonation:
      return "UseAfterDonation";
    case ErrorCode::kInvalidDonation:
      return "InvalidDonation";
    case ErrorCode::kArityMismatch:
      return "ArityMismatch";
    case ErrorCode::kInvalidView:
      return "InvalidView";
    case ErrorCode::kRankError:
      return "RankError";
    case ErrorCode::kDuplicateUid:
      return "DuplicateUid";
    case ErrorCode::kUnknownUid:
      return "UnknownUid";
    case ErrorCode::kUnknownWorkload:
      return "UnknownWorkload";
    case ErrorCode::kInternal:
      return "Internal";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace lt
