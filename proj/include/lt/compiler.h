#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lt/buffer.h"
#include "lt/canonical.h"
#include "lt/ir.h"

namespace lt {

struct CompilerOptions {
  bool simplify = true;
  bool cse = true;
  // Test hook: applies `x + 0 -> x` even when x may be -0.0.
  bool unsafe_add_zero_rewrite = false;
};

// Process-wide options read by Compile. Tests and the fuzz CLI flip these.
CompilerOptions& GlobalCompilerOptions();

// ---------------------------------------------------------------------------
// Graph passes. Each returns a compacted graph holding only nodes reachable
// from the (remapped) roots, and never increases the node count.

RootedGraph Simplify(const RootedGraph& in,
                     const CompilerOptions& options = GlobalCompilerOptions());
RootedGraph Cse(const RootedGraph& in);
RootedGraph Dce(const RootedGraph& in);

// True unless the node's value is provably never -0.0.
std::vector<bool> MayBeNegativeZero(const IrGraph& graph);

// ---------------------------------------------------------------------------
// Plan IR.

struct ValueRef {
  enum class Kind : uint8_t { kParam, kTemp };
  Kind kind = Kind::kTemp;
  int index = 0;

  static ValueRef Param(int i) { return {Kind::kParam, i}; }
  static ValueRef Temp(int i) { return {Kind::kTemp, i}; }
  bool is_param() const { return kind == Kind::kParam; }
  bool operator==(const ValueRef&) const = default;
};

// One instruction of a fused loop body. Operands >= 0 name earlier
// instructions; operand -1-k names the step's k-th input.
struct FusedInstr {
  OpKind kind = OpKind::kConstant;
  int a = 0;
  int b = 0;
  double constant = 0;
};

struct FusedElementwise {
  Shape shape;
  std::vector<FusedInstr> instrs;
  std::vector<ValueRef> inputs;
  // Instruction index -> produced temp value.
  std::vector<std::pair<int, int>> outputs;
};

struct SingleOp {
  OpKind kind = OpKind::kMatMul;
  NodeAttrs attrs;
  std::vector<ValueRef> inputs;
  int output = 0;
};

using PlanStep = std::variant<FusedElementwise, SingleOp>;

// Fusion result: the step schedule over params and temp values.
struct StepSchedule {
  std::vector<PlanStep> steps;
  std::vector<Shape> param_shapes;
  std::vector<Shape> temp_shapes;
  std::vector<ValueRef> outputs;
};

// Groups maximal connected regions of same-shape elementwise nodes into single
// loop steps; everything else becomes a Single step. Steps are in topological
// order. `param_shapes` is indexed by DeviceData param_slot.
StepSchedule FuseElementwise(const RootedGraph& graph,
                             std::vector<Shape> param_shapes);

std::vector<ValueRef> StepInputs(const PlanStep& step);
std::vector<int> StepOutputs(const PlanStep& step);
bool IsFusedStep(const PlanStep& step);

// Where a temp value lives during execution.
struct Location {
  bool in_param = false;
  int index = 0;
};

struct BufferPlan {
  int slot_count = 0;
  std::vector<Location> temp_location;
  // (param index, output index); injective on both sides.
  std::vector<std::pair<int, int>> alias_map;
};

// A param granted to the program for reuse as an output buffer. `output` is
// the one output it may back, or -1 for any output of matching shape.
struct Donation {
  int param = 0;
  int output = -1;

  Donation() = default;
  Donation(int p, int o = -1) : param(p), output(o) {}
  auto operator<=>(const Donation&) const = default;
};

// Reorders steps, keeping dependencies, so that a step which could write into
// a donated param runs after the param's other readers where possible.
StepSchedule OrderForDonation(StepSchedule schedule, std::span<const Donation> donations);

// Greedy last-use slot assignment, lowest free slot first. Donated params may
// host one shape-matching output once all their reads are done.
BufferPlan PlanMemory(const StepSchedule& schedule, std::span<const Donation> donations);

// ---------------------------------------------------------------------------

struct CompiledProgram {
  CacheKey key;
  Device device;
  std::vector<ParamDescriptor> param_order;
  StepSchedule schedule;
  BufferPlan buffer_plan;
  std::vector<Donation> donations;
  // Node count of the recorded and of the optimized graph, for diagnostics.
  size_t recorded_nodes = 0;
  size_t optimized_nodes = 0;

  size_t step_count() const { return schedule.steps.size(); }
  const std::vector<std::pair<int, int>>& alias_map() const {
    return buffer_plan.alias_map;
  }
};

// Optimizes and plans an already-canonical graph (see CanonicalSnapshot).
std::shared_ptr<CompiledProgram> CompileCanonical(
    const RootedGraph& canonical, const CanonicalForm& form,
    std::span<const Donation> donations,
    const CompilerOptions& options = GlobalCompilerOptions());

// Re-plans memory of a compiled program for another donation set.
std::shared_ptr<CompiledProgram> WithDonations(const CompiledProgram& program,
                                               std::span<const Donation> donations);

class CompileCache {
 public:
  struct Result {
    std::shared_ptr<const CompiledProgram> program;
    bool hit = false;
    // Canonical form of the graph that was looked up. Its params give the
    // binding order for this graph's leaves.
    CanonicalForm form;
  };

  // Canonicalizes, then returns the cached program or compiles and inserts it.
  Result GetOrCompile(const IrGraph& graph, std::span<const NodeId> roots,
                      std::span<const Donation> donations = {});

  int64_t compile_count() const { return compile_count_.load(); }
  int64_t hit_count() const { return hit_count_.load(); }
  size_t size() const;

 private:
  struct Entry {
    std::shared_ptr<const CompiledProgram> base;
    std::map<std::vector<Donation>, std::shared_ptr<const CompiledProgram>> variants;
  };

  mutable std::shared_mutex mu_;
  std::unordered_map<CacheKey, Entry, CacheKeyHash> entries_;
  std::atomic<int64_t> compile_count_{0};
  std::atomic<int64_t> hit_count_{0};
};

// Runs the plan. Bindings follow param_order (dynamic scalars as rank-0
// buffers). Params in the program's alias map are consumed: their storage and
// id pass to the aliased output and the input buffer reads as donated.
std::vector<BufferPtr> Execute(const CompiledProgram& program,
                               std::span<const BufferPtr> bindings);

std::string DumpPlan(const CompiledProgram& program);

}  // namespace lt
