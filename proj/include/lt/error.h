#pragma once

#include <stdexcept>
#include <string>

namespace lt {

enum class ErrorCode {
  kShapeMismatch,
  kDTypeMismatch,
  kInvalidAttrs,
  kDeviceMismatch,
  kUnknownDevice,
  kEmptyRoots,
  kDivisionSemantics,
  kUnknownOp,
  kLengthMismatch,
  kUseAfterDonation,
  kInvalidDonation,
  kArityMismatch,
  kInvalidView,
  kRankError,
  kDuplicateUid,
  kUnknownUid,
  kUnknownWorkload,
  kInternal,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& message);

}  // namespace lt
