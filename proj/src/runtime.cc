#include "lt/runtime.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include <nlohmann/json.hpp>

#include "lt/canonical.h"
#include "lt/error.h"

namespace lt {
namespace {

std::atomic<int64_t> next_uid{1};

std::mutex contexts_mu;
std::array<std::atomic<DeviceContext*>, kMaxDevices> contexts{};

void PrintMetricsAtExit() {
  for (int i = 0; i < kMaxDevices; ++i) {
    DeviceContext* ctx = contexts[i].load();
    if (!ctx) continue;
    nlohmann::json line = nlohmann::json::parse(ctx->metrics().ToJson());
    line["device"] = ctx->device().ToString();
    std::fprintf(stderr, "%s\n", line.dump().c_str());
  }
}

int& DonationState() {
  static int state = [] {
    const char* env = std::getenv("LT_DONATION");
    return env != nullptr && std::strcmp(env, "0") == 0 ? 0 : 1;
  }();
  return state;
}

}  // namespace

const char* ModeName(ExecutionMode mode) {
  return mode == ExecutionMode::kLazy ? "lazy" : "eager";
}

std::string MetricsSnapshot::ToJson() const {
  nlohmann::ordered_json j;
  j["compile_count"] = compile_count;
  j["cache_hit_count"] = cache_hit_count;
  j["graphs_executed"] = graphs_executed;
  j["kernel_dispatches"] = kernel_dispatches;
  j["eager_fallback_dispatches"] = eager_fallback_dispatches;
  j["eager_dispatches"] = eager_dispatches;
  j["peak_buffer_slots"] = peak_buffer_slots;
  j["aliased_outputs"] = aliased_outputs;
  return j.dump();
}

OpKind ViewOpKind(const ViewOp& op) {
  switch (op.index()) {
    case 0:
      return OpKind::kReshape;
    case 1:
      return OpKind::kPermute;
    default:
      return OpKind::kNarrow;
  }
}

TensorImpl::TensorImpl(Device device, Shape shape)
    : uid(next_uid.fetch_add(1)), device(device), shape(std::move(shape)) {}

TensorImpl::~TensorImpl() {
  try {
    Context(device).UnregisterTensor(uid);
  } catch (const Error&) {
    // Already unregistered explicitly.
  }
}

std::shared_ptr<TensorImpl> NewTensorImpl(Device device, Shape shape) {
  CheckDevice(device);
  auto impl = std::make_shared<TensorImpl>(device, std::move(shape));
  Context(device).RegisterTensor(impl->uid, impl);
  return impl;
}

DeviceContext& Context(Device device) {
  CheckDevice(device);
  DeviceContext* ctx = contexts[device.ordinal].load(std::memory_order_acquire);
  if (ctx) return *ctx;
  std::lock_guard lock(contexts_mu);
  ctx = contexts[device.ordinal].load();
  if (!ctx) {
    static const bool registered = [] {
      const char* env = std::getenv("LT_METRICS");
      if (env != nullptr && std::strcmp(env, "json") == 0) std::atexit(PrintMetricsAtExit);
      return true;
    }();
    (void)registered;
    // Contexts live for the whole process, like the arena they model; they
    // are never destroyed so tensors outliving static teardown stay safe.
    ctx = new DeviceContext(device);
    contexts[device.ordinal].store(ctx, std::memory_order_release);
  }
  return *ctx;
}

CompileCache& GlobalCompileCache() {
  static CompileCache* cache = new CompileCache();
  return *cache;
}

bool DonationEnabled() { return DonationState() != 0; }
void SetDonationEnabled(bool enabled) { DonationState() = enabled ? 1 : 0; }

void MarkStep(Device device, bool wait) { Context(device).MarkStep(wait); }
MetricsSnapshot Metrics(Device device) { return Context(device).metrics(); }

void SetExecutionMode(Device device, ExecutionMode mode) { Context(device).set_mode(mode); }
ExecutionMode GetExecutionMode(Device device) { return Context(device).mode(); }

// ---------------------------------------------------------------------------

DeviceContext::DeviceContext(Device device) : device_(device), graph_(device) {}

DeviceContext::~DeviceContext() {
  {
    std::lock_guard lock(queue_mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (executor_.joinable()) executor_.join();
}

void DeviceContext::RegisterTensor(int64_t uid, std::weak_ptr<TensorImpl> tensor) {
  std::lock_guard lock(mu_);
  if (!live_.emplace(uid, std::move(tensor)).second) {
    Fail(ErrorCode::kDuplicateUid, "tensor " + std::to_string(uid) + " is already registered");
  }
}

void DeviceContext::UnregisterTensor(int64_t uid) {
  std::lock_guard lock(mu_);
  if (live_.erase(uid) == 0) {
    Fail(ErrorCode::kUnknownUid, "tensor " + std::to_string(uid) + " is not registered");
  }
}

size_t DeviceContext::live_count() const {
  std::lock_guard lock(mu_);
  return live_.size();
}

void DeviceContext::set_mode(ExecutionMode mode) {
  std::lock_guard lock(mu_);
  if (mode == mode_.load()) return;
  MarkStep(true);
  mode_ = mode;
}

NodeId DeviceContext::Record(OpKind kind, std::vector<NodeId> operands, NodeAttrs attrs) {
  return graph_.RecordNode(kind, std::move(operands), std::move(attrs));
}

NodeId DeviceContext::LeafFor(const DataPtr& data) {
  auto it = leaf_of_data_.find(data.get());
  if (it != leaf_of_data_.end()) return it->second;
  NodeId id = graph_.AddDeviceData(data);
  leaf_of_data_.emplace(data.get(), id);
  return id;
}

NodeId DeviceContext::NodeFor(TensorImpl& t) {
  std::lock_guard lock(mu_);
  if (t.device != device_) {
    Fail(ErrorCode::kDeviceMismatch, "tensor on " + t.device.ToString() + " used on " +
                                         device_.ToString());
  }
  const bool current = t.node && t.epoch == epoch_;
  if (t.view) {
    ViewInfo& vi = *t.view;
    const bool fresh = vi.generation == vi.base->mutation_counter;
    if (fresh && current) return *t.node;
    if (fresh && t.data) return LeafFor(t.data);
    // Stale or dropped: re-derive from the base's current value.
    NodeId n = NodeFor(*vi.base);
    for (const ViewOp& op : vi.ops) {
      n = std::visit([&](const auto& attrs) { return Record(ViewOpKind(op), {n}, attrs); }, op);
    }
    t.node = n;
    t.epoch = epoch_;
    t.data = nullptr;
    vi.generation = vi.base->mutation_counter;
    return n;
  }
  if (current) return *t.node;
  if (t.data) return LeafFor(t.data);
  Fail(ErrorCode::kInternal, "tensor " + std::to_string(t.uid) + " has no value");
}

std::vector<std::shared_ptr<TensorImpl>> DeviceContext::LiveTensors() {
  // Locked first and filtered afterwards: dropping the last reference inside
  // the loop would unregister while live_ is being iterated.
  std::vector<std::shared_ptr<TensorImpl>> out;
  for (auto& [uid, weak] : live_) out.push_back(weak.lock());
  std::erase(out, nullptr);
  return out;
}

bool DeviceContext::IsPendingRoot(const TensorImpl& t) const {
  if (!t.node || t.epoch != epoch_) return false;
  return !t.view || t.view->generation == t.view->base->mutation_counter;
}

std::vector<std::shared_ptr<TensorImpl>> DeviceContext::PendingRoots() {
  std::vector<std::shared_ptr<TensorImpl>> roots;
  for (auto& t : LiveTensors()) {
    if (IsPendingRoot(*t)) roots.push_back(std::move(t));
  }
  std::sort(roots.begin(), roots.end(),
            [](const auto& a, const auto& b) { return a->uid < b->uid; });
  return roots;
}

DeviceContext::StepGraph DeviceContext::BuildStepGraph(std::span<const NodeId> roots) {
  std::vector<bool> need(graph_.size(), false);
  std::vector<NodeId> stack(roots.begin(), roots.end());
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (need[id]) continue;
    need[id] = true;
    if (materialized_.contains(id)) continue;
    for (NodeId op : graph_.node(id).operands) stack.push_back(op);
  }
  StepGraph step{IrGraph(device_), {}};
  std::vector<NodeId> remap(graph_.size(), -1);
  std::unordered_map<const DataHandle*, NodeId> leaf;
  auto leaf_for = [&](const DataPtr& data, bool dynamic_scalar) {
    auto it = leaf.find(data.get());
    if (it != leaf.end()) return it->second;
    NodeId id = step.graph.AddDeviceData(data, dynamic_scalar);
    leaf.emplace(data.get(), id);
    return id;
  };
  for (const IrNode& node : graph_.nodes()) {
    if (!need[node.id]) continue;
    auto sub = materialized_.find(node.id);
    if (sub != materialized_.end()) {
      remap[node.id] = leaf_for(sub->second, false);
    } else if (node.kind == OpKind::kDeviceData) {
      remap[node.id] = leaf_for(node.data, std::get<DeviceDataAttrs>(node.attrs).dynamic_scalar);
    } else {
      std::vector<NodeId> operands;
      for (NodeId op : node.operands) operands.push_back(remap[op]);
      remap[node.id] = step.graph.RecordNode(node.kind, std::move(operands), node.attrs);
    }
  }
  for (NodeId r : roots) step.roots.push_back(remap[r]);
  return step;
}

std::vector<Donation> DeviceContext::DonationSet(std::span<TensorImpl* const> roots,
                                            const StepGraph& step, const CanonicalForm& form) {
  std::vector<Donation> donations;
  if (!DonationEnabled()) return donations;

  std::unordered_map<const DataHandle*, int> param_of;
  for (size_t i = 0; i < form.params.size(); ++i) {
    if (form.params[i].dynamic_scalar) continue;
    param_of[step.graph.node(form.params[i].node).data.get()] = static_cast<int>(i);
  }
  // Handles referenced by live tensors, counting each reference.
  std::unordered_map<const DataHandle*, int> holders;
  const auto live = LiveTensors();
  for (const auto& t : live) {
    if (t->data) ++holders[t->data.get()];
    if (t->pre_update) ++holders[t->pre_update.get()];
  }

  for (size_t r = 0; r < roots.size(); ++r) {
    const TensorImpl& t = *roots[r];
    if (t.view || !t.pre_update) continue;
    auto param = param_of.find(t.pre_update.get());
    if (param == param_of.end() || holders[t.pre_update.get()] != 1) continue;
    if (t.pre_update->shape() != t.shape) continue;
    // Other roots may still read the old value: the plan only writes into a
    // donated param after its last read.
    donations.emplace_back(param->second, static_cast<int>(r));
  }
  std::sort(donations.begin(), donations.end());
  return donations;
}

std::vector<DataPtr> DeviceContext::Launch(const StepGraph& step,
                                           std::span<TensorImpl* const> roots,
                                           bool allow_donation) {
  std::vector<DataPtr> placeholders;
  for (TensorImpl* t : roots) placeholders.push_back(std::make_shared<DataHandle>(t->shape, device_));

  try {
    CanonicalForm form = Canonicalize(step.graph, step.roots);
    std::vector<Donation> donations;
    if (allow_donation) donations = DonationSet(roots, step, form);
    CompileCache::Result compiled =
        GlobalCompileCache().GetOrCompile(step.graph, step.roots, donations);
    std::shared_ptr<const CompiledProgram> program = compiled.program;
    (compiled.hit ? cache_hit_count_ : compile_count_).fetch_add(1);
    last_program_ = program;

    int64_t slots = program->buffer_plan.slot_count;
    int64_t peak = peak_buffer_slots_.load();
    while (slots > peak && !peak_buffer_slots_.compare_exchange_weak(peak, slots)) {
    }
    aliased_outputs_ += static_cast<int64_t>(program->alias_map().size());
    kernel_dispatches_ += static_cast<int64_t>(program->step_count());
    graphs_executed_ += 1;

    std::vector<DataPtr> bindings;
    for (const ParamDescriptor& p : compiled.form.params) {
      bindings.push_back(step.graph.node(p.node).data);
    }
    Enqueue([program, bindings = std::move(bindings), placeholders] {
      try {
        std::vector<BufferPtr> inputs;
        for (const DataPtr& b : bindings) inputs.push_back(b->Get());
        std::vector<BufferPtr> outputs = Execute(*program, inputs);
        for (size_t i = 0; i < outputs.size(); ++i) placeholders[i]->Set(std::move(outputs[i]));
      } catch (...) {
        for (const DataPtr& p : placeholders) {
          if (!p->ready()) p->SetError(std::current_exception());
        }
      }
    });
  } catch (...) {
    for (const DataPtr& p : placeholders) p->SetError(std::current_exception());
  }
  return placeholders;
}

void DeviceContext::ResetGraph() {
  graph_ = IrGraph(device_);
  ++epoch_;
  leaf_of_data_.clear();
  materialized_.clear();
}

void DeviceContext::MarkStep(bool wait) {
  {
    std::lock_guard lock(mu_);
    if (mode_.load() == ExecutionMode::kLazy) {
      std::vector<std::shared_ptr<TensorImpl>> roots = PendingRoots();
      if (!roots.empty()) {
        std::vector<NodeId> nodes;
        std::vector<TensorImpl*> tensors;
        for (const auto& t : roots) {
          nodes.push_back(*t->node);
          tensors.push_back(t.get());
        }
        StepGraph step = BuildStepGraph(nodes);
        std::vector<DataPtr> placeholders = Launch(step, tensors, /*allow_donation=*/true);
        for (size_t i = 0; i < roots.size(); ++i) {
          roots[i]->data = placeholders[i];
          roots[i]->node.reset();
          roots[i]->pre_update = nullptr;
        }
        ResetGraph();
      }
    }
  }
  if (wait) Drain();
}

void DeviceContext::SyncTensor(TensorImpl& t) {
  std::lock_guard lock(mu_);
  if (mode_.load() == ExecutionMode::kEager) return;
  if (t.view) {
    const bool fresh = t.view->generation == t.view->base->mutation_counter;
    if (fresh && !IsPendingRoot(t) && t.data) return;
    NodeFor(t);
  }
  if (!IsPendingRoot(t)) return;
  NodeId node = *t.node;
  StepGraph step = BuildStepGraph(std::span<const NodeId>(&node, 1));
  TensorImpl* root = &t;
  std::vector<DataPtr> placeholders =
      Launch(step, std::span<TensorImpl* const>(&root, 1), /*allow_donation=*/false);
  materialized_[node] = placeholders[0];
  t.data = placeholders[0];
  t.node.reset();
  t.pre_update = nullptr;
  if (PendingRoots().empty()) ResetGraph();
}

std::string DeviceContext::PendingIrText() {
  std::lock_guard lock(mu_);
  std::vector<NodeId> nodes;
  for (const auto& t : PendingRoots()) nodes.push_back(*t->node);
  if (nodes.empty()) return "";
  StepGraph step = BuildStepGraph(nodes);
  return DumpText(step.graph, step.roots);
}

std::shared_ptr<const CompiledProgram> DeviceContext::last_program() const {
  std::lock_guard lock(mu_);
  return last_program_;
}

void DeviceContext::Enqueue(std::function<void()> job) {
  {
    std::lock_guard lock(queue_mu_);
    if (!executor_.joinable()) executor_ = std::thread([this] { ExecutorLoop(); });
    queue_.push_back(std::move(job));
  }
  queue_cv_.notify_all();
}

void DeviceContext::ExecutorLoop() {
  std::unique_lock lock(queue_mu_);
  while (true) {
    queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) return;
    std::function<void()> job = std::move(queue_.front());
    queue_.pop_front();
    busy_ = true;
    lock.unlock();
    job();
    job = nullptr;
    lock.lock();
    busy_ = false;
    queue_cv_.notify_all();
  }
}

void DeviceContext::Drain() {
  std::unique_lock lock(queue_mu_);
  queue_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

MetricsSnapshot DeviceContext::metrics() {
  Drain();
  MetricsSnapshot m;
  m.compile_count = compile_count_.load();
  m.cache_hit_count = cache_hit_count_.load();
  m.graphs_executed = graphs_executed_.load();
  m.kernel_dispatches = kernel_dispatches_.load();
  m.eager_fallback_dispatches = eager_fallback_dispatches_.load();
  m.eager_dispatches = eager_dispatches_.load();
  m.peak_buffer_slots = peak_buffer_slots_.load();
  m.aliased_outputs = aliased_outputs_.load();
  return m;
}

}  // namespace lt
