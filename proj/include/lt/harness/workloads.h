#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lt/runtime.h"

namespace lt::harness {

struct RunOptions {
  std::string workload;
  ExecutionMode mode = ExecutionMode::kLazy;
  uint64_t seed = 0;
  // 0 picks the workload's default.
  int steps = 0;
  Device device;
  bool dump_ir = false;
  bool dump_plan = false;
};

struct RunReport {
  std::string workload;
  ExecutionMode mode = ExecutionMode::kLazy;
  double wall_ms = 0;
  int steps = 0;
  MetricsSnapshot metrics;
  uint64_t checksum = 0;
  std::string ir_dump;
  std::string plan_dump;

  // Stable schema: workload, mode, steps, wall_ms, metrics.*, checksum.
  std::string ToJson() const;
};

const std::vector<std::string>& DemoWorkloads();
const std::vector<std::string>& BenchWorkloads();
int DefaultSteps(const std::string& workload);

// Runs a workload on a device in the requested mode. Metrics are those of the
// device after the run, so callers wanting exact counts use a fresh device.
RunReport RunWorkload(const RunOptions& options);

// Order-sensitive digest of buffer contents.
uint64_t CombineChecksum(uint64_t seed, uint64_t value);

}  // namespace lt::harness
