#include "lt/types.h"

#include "lt/error.h"

namespace lt {

const char* DTypeName(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return "f32";
    case DType::kI64:
      return "i64";
    case DType::kPred:
      return "pred";
  }
  return "?";
}

int64_t ElementCount(const Dims& dims) {
  int64_t count = 1;
  for (int64_t d : dims) count *= d;
  return count;
}

std::string DimsToString(const Dims& dims) {
  std::string out = "(";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(dims[i]);
  }
  return out + ")";
}

std::string Shape::ToString() const {
  std::string out = DTypeName(dtype);
  out += "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(dims[i]);
  }
  return out + "]";
}

void CheckDevice(Device device) {
  if (device.ordinal < 0 || device.ordinal >= kMaxDevices) {
    Fail(ErrorCode::kUnknownDevice, "no such device " + device.ToString());
  }
}

}  // namespace lt
