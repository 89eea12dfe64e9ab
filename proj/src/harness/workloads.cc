#include "lt/harness/workloads.h"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "lt/error.h"
#include "lt/tensor.h"

namespace lt::harness {
namespace {

struct Session {
  const RunOptions& options;
  RunReport& report;

  // Captures the pending IR of the step about to be cut.
  void Barrier() {
    if (options.dump_ir && options.mode == ExecutionMode::kLazy) {
      report.ir_dump = Context(options.device).PendingIrText();
    }
    MarkStep(options.device);
  }
};

uint64_t Digest(std::initializer_list<LazyTensor> tensors) {
  uint64_t sum = 0;
  for (const LazyTensor& t : tensors) sum = CombineChecksum(sum, GetBuffer(t)->Checksum());
  return sum;
}

uint64_t Fig1(Session& s, int) {
  Device d = s.options.device;
  uint64_t seed = s.options.seed;
  LazyTensor x = Randn({2, 4}, seed, d);
  LazyTensor y = Randn({2, 4}, seed + 1, d);
  LazyTensor z = Randn({2, 4}, seed + 2, d);
  LazyTensor r = Add(Mul(x, y), z, 1.0);
  s.Barrier();
  return Digest({r});
}

uint64_t Loop(Session& s, int steps) {
  Device d = s.options.device;
  LazyTensor x = Randn({2, 4}, s.options.seed, d);
  LazyTensor acc = Randn({2, 4}, s.options.seed + 1, d);
  for (int i = 0; i < steps; ++i) acc = Add(acc, x, 1.0);
  s.Barrier();
  return Digest({acc, x});
}

uint64_t ViewUpdate(Session& s, int steps) {
  Device d = s.options.device;
  LazyTensor x = Randn({2, 3, 4}, s.options.seed, d);
  LazyTensor v = Permute(x, {1, 2, 0});
  for (int i = 0; i < steps; ++i) {
    v.add_(42.0);
    s.Barrier();
  }
  return Digest({x, v});
}

uint64_t MlpTrain(Session& s, int steps) {
  Device d = s.options.device;
  uint64_t seed = s.options.seed;
  LazyTensor x = Randn({16, 8}, seed, d);
  LazyTensor w1 = Randn({8, 16}, seed + 1, d);
  LazyTensor w2 = Randn({16, 4}, seed + 2, d);
  LazyTensor loss;
  uint64_t sum = 0;
  for (int i = 0; i < steps; ++i) {
    LazyTensor n1 = Randn({8, 16}, seed + 100 + 2 * i, d);
    LazyTensor n2 = Randn({16, 4}, seed + 101 + 2 * i, d);
    w1.add_(Mul(n1, 0.01));
    w2.sub_(Mul(n2, 0.01));
    LazyTensor out = MatMul(Relu(MatMul(x, w1)), w2);
    loss = SumAll(Mul(out, out));
    s.Barrier();
    sum = CombineChecksum(sum, GetBuffer(loss)->Checksum());
  }
  return CombineChecksum(sum, Digest({w1, w2}));
}

uint64_t ElementwiseChain(Session& s, int steps) {
  Device d = s.options.device;
  LazyTensor x = Randn({64}, s.options.seed, d);
  LazyTensor acc = Randn({64}, s.options.seed + 1, d);
  for (int i = 0; i < steps; ++i) {
    LazyTensor t = acc;
    for (int k = 0; k < 8; ++k) t = Add(t, x);
    acc = t;
    s.Barrier();
  }
  return Digest({acc});
}

uint64_t ShapeUnstable(Session& s, int steps) {
  Device d = s.options.device;
  uint64_t sum = 0;
  for (int i = 0; i < steps; ++i) {
    LazyTensor a = Randn({i + 1, 4}, s.options.seed + i, d);
    LazyTensor r = SumAll(Relu(Add(a, a)));
    s.Barrier();
    sum = CombineChecksum(sum, GetBuffer(r)->Checksum());
  }
  return sum;
}

struct Workload {
  int default_steps;
  std::function<uint64_t(Session&, int)> body;
};

const std::map<std::string, Workload>& Registry() {
  static const std::map<std::string, Workload> registry = {
      {"fig1", {1, Fig1}},
      {"loop", {2, Loop}},
      {"view-update", {1, ViewUpdate}},
      {"mlp-train", {10, MlpTrain}},
      {"elementwise-chain", {10, ElementwiseChain}},
      {"shape-unstable", {10, ShapeUnstable}},
  };
  return registry;
}

const Workload& Find(const std::string& name) {
  auto it = Registry().find(name);
  if (it == Registry().end()) Fail(ErrorCode::kUnknownWorkload, "unknown workload: " + name);
  return it->second;
}

}  // namespace

uint64_t CombineChecksum(uint64_t seed, uint64_t value) {
  // boost::hash_combine, widened.
  return seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 12) + (seed >> 4));
}

const std::vector<std::string>& DemoWorkloads() {
  static const std::vector<std::string> names = {"fig1", "loop", "view-update", "mlp-train"};
  return names;
}

const std::vector<std::string>& BenchWorkloads() {
  static const std::vector<std::string> names = {"elementwise-chain", "shape-unstable",
                                                 "mlp-train"};
  return names;
}

int DefaultSteps(const std::string& workload) { return Find(workload).default_steps; }

RunReport RunWorkload(const RunOptions& options) {
  const Workload& workload = Find(options.workload);
  RunReport report;
  report.workload = options.workload;
  report.mode = options.mode;
  report.steps = options.steps > 0 ? options.steps : workload.default_steps;

  SetExecutionMode(options.device, options.mode);
  Session session{options, report};
  auto start = std::chrono::steady_clock::now();
  report.checksum = workload.body(session, report.steps);
  Context(options.device).Drain();
  auto end = std::chrono::steady_clock::now();
  report.wall_ms = std::chrono::duration<double, std::milli>(end - start).count();
  report.metrics = Metrics(options.device);
  if (options.dump_plan) {
    if (auto program = Context(options.device).last_program()) {
      report.plan_dump = DumpPlan(*program);
    }
  }
  return report;
}

std::string RunReport::ToJson() const {
  nlohmann::ordered_json j;
  j["workload"] = workload;
  j["mode"] = ModeName(mode);
  j["steps"] = steps;
  j["wall_ms"] = wall_ms;
  j["metrics"] = nlohmann::ordered_json::parse(metrics.ToJson());
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(checksum));
  j["checksum"] = hex;
  return j.dump();
}

}  // namespace lt::harness
