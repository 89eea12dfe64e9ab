#pragma once

#include <cstdint>
#include <limits>

#include "lt/error.h"
#include "lt/ir.h"

namespace lt {

// Scalar semantics shared by the eager kernels, the fused-loop interpreter and
// constant folding, so all three agree bit for bit.
template <typename T>
T ApplyBinary(OpKind kind, T a, T b) {
  if constexpr (std::is_same_v<T, int64_t>) {
    using U = uint64_t;
    switch (kind) {
      case OpKind::kAdd:
        return static_cast<T>(static_cast<U>(a) + static_cast<U>(b));
      case OpKind::kSub:
        return static_cast<T>(static_cast<U>(a) - static_cast<U>(b));
      case OpKind::kMul:
        return static_cast<T>(static_cast<U>(a) * static_cast<U>(b));
      case OpKind::kDiv:
        if (b == 0) Fail(ErrorCode::kDivisionSemantics, "integer division by zero");
        if (a == std::numeric_limits<T>::min() && b == -1) {
          Fail(ErrorCode::kDivisionSemantics, "integer division overflow");
        }
        return a / b;
      case OpKind::kMax:
        return a > b ? a : b;
      default:
        break;
    }
  } else {
    switch (kind) {
      case OpKind::kAdd:
        return a + b;
      case OpKind::kSub:
        return a - b;
      case OpKind::kMul:
        return a * b;
      case OpKind::kDiv:
        return a / b;
      case OpKind::kMax:
        // NaN in either operand propagates.
        if (a != a) return a;
        if (b != b) return b;
        return a > b ? a : b;
      default:
        break;
    }
  }
  Fail(ErrorCode::kUnknownOp, std::string(OpName(kind)) + " is not binary");
}

template <typename T>
T ApplyUnary(OpKind kind, T a) {
  switch (kind) {
    case OpKind::kNeg:
      if constexpr (std::is_same_v<T, int64_t>) {
        return static_cast<T>(0 - static_cast<uint64_t>(a));
      } else {
        return -a;
      }
    case OpKind::kRelu:
      return a > T(0) ? a : T(0);
    default:
      break;
  }
  Fail(ErrorCode::kUnknownOp, std::string(OpName(kind)) + " is not unary");
}

}  // namespace lt
