#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lt/buffer.h"
#include "lt/compiler.h"
#include "lt/ir.h"

namespace lt {

enum class ExecutionMode { kLazy, kEager };

const char* ModeName(ExecutionMode mode);

struct MetricsSnapshot {
  int64_t compile_count = 0;
  int64_t cache_hit_count = 0;
  int64_t graphs_executed = 0;
  int64_t kernel_dispatches = 0;
  int64_t eager_fallback_dispatches = 0;
  int64_t eager_dispatches = 0;
  int64_t peak_buffer_slots = 0;
  int64_t aliased_outputs = 0;

  std::string ToJson() const;
  bool operator==(const MetricsSnapshot&) const = default;
};

using ViewOp = std::variant<ReshapeAttrs, PermuteAttrs, NarrowAttrs>;

OpKind ViewOpKind(const ViewOp& op);

struct TensorImpl;

struct ViewInfo {
  std::shared_ptr<TensorImpl> base;
  std::vector<ViewOp> ops;
  // Base mutation counter this view's value was derived from.
  int64_t generation = 0;
  // Eager mode: base storage index of every view element.
  BufferPtr index_map;
};

struct TensorImpl {
  TensorImpl(Device device, Shape shape);
  ~TensorImpl();
  TensorImpl(const TensorImpl&) = delete;
  TensorImpl& operator=(const TensorImpl&) = delete;

  const int64_t uid;
  const Device device;
  const Shape shape;

  // Materialized value.
  DataPtr data;
  // Pending computation in the device's open graph of `epoch`.
  std::optional<NodeId> node;
  int64_t epoch = -1;

  std::optional<ViewInfo> view;
  int64_t mutation_counter = 0;
  // Value held before the first in-place update since the last barrier; the
  // candidate for donation.
  DataPtr pre_update;
};

// Per-device runtime state: the live-tensor registry, the open graph, the
// ordered executor and the metrics.
class DeviceContext {
 public:
  explicit DeviceContext(Device device);
  ~DeviceContext();

  Device device() const { return device_; }

  void RegisterTensor(int64_t uid, std::weak_ptr<TensorImpl> tensor);
  void UnregisterTensor(int64_t uid);
  size_t live_count() const;

  ExecutionMode mode() const { return mode_.load(); }
  void set_mode(ExecutionMode mode);

  // Node holding `t`'s current value in the open graph, recording leaves or
  // re-deriving a stale view as needed.
  NodeId NodeFor(TensorImpl& t);
  // Records into the open graph.
  NodeId Record(OpKind kind, std::vector<NodeId> operands, NodeAttrs attrs = {});
  const IrGraph& graph() const { return graph_; }
  IrGraph& open_graph() { return graph_; }
  int64_t epoch() const { return epoch_; }

  void MarkStep(bool wait);
  void SyncTensor(TensorImpl& t);
  // Blocks until every queued execution has finished.
  void Drain();

  // Textual IR of what the next MarkStep would compile.
  std::string PendingIrText();
  std::shared_ptr<const CompiledProgram> last_program() const;

  MetricsSnapshot metrics();

  void CountEagerDispatch(int64_t n = 1) { eager_dispatches_ += n; }
  void CountFallbackDispatch() { eager_fallback_dispatches_ += 1; }

  std::recursive_mutex& mutex() { return mu_; }

 private:
  struct StepGraph {
    IrGraph graph;
    std::vector<NodeId> roots;
  };

  NodeId LeafFor(const DataPtr& data);
  bool IsPendingRoot(const TensorImpl& t) const;
  std::vector<std::shared_ptr<TensorImpl>> LiveTensors();
  std::vector<std::shared_ptr<TensorImpl>> PendingRoots();
  StepGraph BuildStepGraph(std::span<const NodeId> roots);
  std::vector<Donation> DonationSet(std::span<TensorImpl* const> roots, const StepGraph& step,
                               const CanonicalForm& form);
  // Compiles and queues one program; returns the placeholder per root.
  std::vector<DataPtr> Launch(const StepGraph& step, std::span<TensorImpl* const> roots,
                              bool allow_donation);
  void ResetGraph();
  void Enqueue(std::function<void()> job);
  void ExecutorLoop();

  const Device device_;
  mutable std::recursive_mutex mu_;
  std::unordered_map<int64_t, std::weak_ptr<TensorImpl>> live_;
  std::atomic<ExecutionMode> mode_{ExecutionMode::kLazy};

  IrGraph graph_;
  int64_t epoch_ = 0;
  // Leaves of the open graph, one per distinct data handle.
  std::unordered_map<const DataHandle*, NodeId> leaf_of_data_;
  // Open-graph nodes already computed by SyncTensor.
  std::unordered_map<NodeId, DataPtr> materialized_;
  std::shared_ptr<const CompiledProgram> last_program_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread executor_;

  std::atomic<int64_t> compile_count_{0};
  std::atomic<int64_t> cache_hit_count_{0};
  std::atomic<int64_t> graphs_executed_{0};
  std::atomic<int64_t> kernel_dispatches_{0};
  std::atomic<int64_t> eager_fallback_dispatches_{0};
  std::atomic<int64_t> eager_dispatches_{0};
  std::atomic<int64_t> peak_buffer_slots_{0};
  std::atomic<int64_t> aliased_outputs_{0};
};

DeviceContext& Context(Device device);

// Creates a tensor registered with its device's arena; the arena entry is
// removed when the last handle goes away.
std::shared_ptr<TensorImpl> NewTensorImpl(Device device, Shape shape);

CompileCache& GlobalCompileCache();

// Barrier: compiles and runs everything pending on the device. With
// wait=false the call returns once the program is queued.
void MarkStep(Device device = Device{}, bool wait = true);

MetricsSnapshot Metrics(Device device = Device{});

// Donation defaults to on unless LT_DONATION=0.
bool DonationEnabled();
void SetDonationEnabled(bool enabled);

void SetExecutionMode(Device device, ExecutionMode mode);
ExecutionMode GetExecutionMode(Device device);

}  // namespace lt
