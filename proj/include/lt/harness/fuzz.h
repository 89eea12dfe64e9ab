#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lt/ir.h"
#include "lt/runtime.h"

namespace lt::harness {

// One step of a generated tensor program over numbered registers.
struct FuzzInstr {
  enum class Kind {
    kRandn,
    kFull,
    kBinary,
    kBinaryScalar,
    kUnary,
    kMatMul,
    kSum,
    kReshape,
    kPermute,
    kNarrow,
    kInPlace,
    kInPlaceScalar,
    kFallback,
    kBranch,
    kMarkStep,
    kDrop,
  };

  Kind kind = Kind::kRandn;
  OpKind op = OpKind::kAdd;
  // In-place op ("add_", "sub_", "mul_", "assign_") or fallback op name.
  std::string name;
  int dst = -1;
  int a = -1;
  int b = -1;
  double scalar = 0;
  std::optional<double> alpha;
  Dims dims;
  std::vector<int64_t> ints;
  uint64_t seed = 0;
  DType dtype = DType::kF32;
  bool wait = true;

  std::string ToText() const;
};

struct FuzzProgram {
  std::vector<FuzzInstr> instrs;
  int num_regs = 0;
  int node_count = 0;

  std::string ToText() const;
};

FuzzProgram GenerateProgram(uint64_t seed, int max_nodes);

// Runs the program on `device` in whatever mode the device is in and returns
// every host-visible value: item() results, then all surviving registers.
// Each value is rendered with its exact bytes.
std::vector<std::string> RunProgram(const FuzzProgram& program, Device device);

struct FuzzOptions {
  uint64_t seed = 0;
  int count = 100;
  int max_nodes = 25;
  Device lazy_device{0};
  Device eager_device{1};
};

struct FuzzOutcome {
  int programs_run = 0;
  bool diverged = false;
  // Seed, program text and the first differing value.
  std::string reproducer;
};

// Differential test: each program runs lazily and eagerly; stops at the first
// divergence.
FuzzOutcome RunFuzz(const FuzzOptions& options);

}  // namespace lt::harness
