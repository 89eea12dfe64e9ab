#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace lt {

enum class DType : uint8_t { kF32, kI64, kPred };

const char* DTypeName(DType dtype);

using Dims = std::vector<int64_t>;

int64_t ElementCount(const Dims& dims);

// Renders dims as "(2, 4)", the attribute form used in IR dumps.
std::string DimsToString(const Dims& dims);

struct Shape {
  DType dtype = DType::kF32;
  Dims dims;

  Shape() = default;
  Shape(DType dtype, Dims dims) : dtype(dtype), dims(std::move(dims)) {}

  int64_t rank() const { return static_cast<int64_t>(dims.size()); }
  int64_t element_count() const { return ElementCount(dims); }

  // "f32[2,4]"; rank 0 renders as "f32[]".
  std::string ToString() const;

  bool operator==(const Shape&) const = default;
};

inline constexpr int kMaxDevices = 64;

struct Device {
  int ordinal = 0;

  std::string ToString() const { return "CPU:" + std::to_string(ordinal); }

  auto operator<=>(const Device&) const = default;
};

// Throws UnknownDevice for ordinals outside [0, kMaxDevices).
void CheckDevice(Device device);

}  // namespace lt
