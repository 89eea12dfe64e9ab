#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lt/error.h"
#include "lt/harness/fuzz.h"
#include "lt/harness/workloads.h"
#include "lt/runtime.h"

namespace lt::harness {
namespace {

Device Fresh() {
  static int next = 4;
  return Device{next++};
}

RunReport RunNamed(const std::string& name, ExecutionMode mode, int steps = 0) {
  RunOptions o;
  o.workload = name;
  o.mode = mode;
  o.seed = 3;
  o.steps = steps;
  o.device = Fresh();
  return RunWorkload(o);
}

TEST(Workloads, ChecksumsAgreeAcrossModes) {
  std::vector<std::string> all = DemoWorkloads();
  all.insert(all.end(), BenchWorkloads().begin(), BenchWorkloads().end());
  for (const auto& name : all) {
    auto lazy = RunNamed(name, ExecutionMode::kLazy, 3);
    auto eager = RunNamed(name, ExecutionMode::kEager, 3);
    EXPECT_EQ(lazy.checksum, eager.checksum) << name;
    EXPECT_EQ(lazy.steps, 3);
    EXPECT_EQ(eager.metrics.compile_count, 0) << name;
  }
}

TEST(Workloads, DeterministicGivenSeed) {
  EXPECT_EQ(RunNamed("mlp-train", ExecutionMode::kLazy).checksum,
            RunNamed("mlp-train", ExecutionMode::kLazy).checksum);
}

TEST(Workloads, UnknownNameFails) {
  RunOptions o;
  o.workload = "resnet";
  try {
    RunWorkload(o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownWorkload);
  }
}

TEST(Workloads, JsonSchema) {
  auto j = nlohmann::json::parse(RunNamed("loop", ExecutionMode::kLazy).ToJson());
  for (const char* key : {"workload", "mode", "wall_ms", "metrics", "checksum"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["workload"], "loop");
  EXPECT_EQ(j["mode"], "lazy");
  EXPECT_EQ(j["metrics"]["graphs_executed"], 1);
  EXPECT_EQ(j["checksum"].template get<std::string>().size(), 16u);
}

TEST(Fuzz, GenerationIsDeterministic) {
  for (uint64_t s = 0; s < 20; ++s) {
    EXPECT_EQ(GenerateProgram(s, 25).ToText(), GenerateProgram(s, 25).ToText());
  }
  EXPECT_NE(GenerateProgram(1, 25).ToText(), GenerateProgram(2, 25).ToText());
}

TEST(Fuzz, ProgramsRespectNodeBudgetLoosely) {
  for (uint64_t s = 0; s < 200; ++s) {
    auto p = GenerateProgram(s, 25);
    // The last instruction may overshoot by its own node cost.
    EXPECT_LE(p.node_count, 25 + 4);
    EXPECT_GE(p.node_count, 25);
  }
}

TEST(Fuzz, ProgramsRunWithoutErrors) {
  Device lazy = Fresh();
  for (uint64_t s = 0; s < 100; ++s) {
    auto out = RunProgram(GenerateProgram(s, 25), lazy);
    ASSERT_FALSE(out.empty());
    EXPECT_NE(out.back().rfind("error:", 0), 0u) << GenerateProgram(s, 25).ToText();
  }
}

TEST(Fuzz, ZeroCountRunsNothing) {
  FuzzOptions o;
  o.count = 0;
  o.lazy_device = Fresh();
  o.eager_device = Fresh();
  auto r = RunFuzz(o);
  EXPECT_EQ(r.programs_run, 0);
  EXPECT_FALSE(r.diverged);
}

TEST(Fuzz, FindsInjectedSimplifierBug) {
  GlobalCompilerOptions().unsafe_add_zero_rewrite = true;
  FuzzOptions o;
  o.seed = 7;
  o.count = 2000;
  o.lazy_device = Fresh();
  o.eager_device = Fresh();
  auto r = RunFuzz(o);
  GlobalCompilerOptions().unsafe_add_zero_rewrite = false;
  EXPECT_TRUE(r.diverged);
  EXPECT_NE(r.reproducer.find("seed=7"), std::string::npos);
}

// Donation may only change where results live, never what they are, and it
// never raises the slot peak.
TEST(Properties, DonationNeverChangesValues) {
  Device on{56}, off{57};
  for (uint64_t seed = 0; seed < 150; ++seed) {
    FuzzProgram p = GenerateProgram(seed * 31 + 5, 25);
    SetDonationEnabled(true);
    auto a = RunProgram(p, on);
    SetDonationEnabled(false);
    auto b = RunProgram(p, off);
    SetDonationEnabled(true);
    ASSERT_EQ(a, b) << p.ToText();
  }
  EXPECT_LE(Metrics(on).peak_buffer_slots, Metrics(off).peak_buffer_slots);
  EXPECT_EQ(Metrics(off).aliased_outputs, 0);
}

// Barriers are invisible to the host: dropping every mark_step or adding an
// async one after every instruction gives the same values.
TEST(Properties, BarrierPlacementIsUnobservable) {
  Device plain{58}, none{59}, dense{60};
  for (uint64_t seed = 0; seed < 100; ++seed) {
    FuzzProgram p = GenerateProgram(seed * 17 + 3, 25);
    FuzzProgram stripped = p, busy = p;
    std::erase_if(stripped.instrs,
                  [](const FuzzInstr& in) { return in.kind == FuzzInstr::Kind::kMarkStep; });
    busy.instrs.clear();
    for (const FuzzInstr& in : p.instrs) {
      busy.instrs.push_back(in);
      FuzzInstr step;
      step.kind = FuzzInstr::Kind::kMarkStep;
      step.wait = false;
      busy.instrs.push_back(step);
    }
    auto ref = RunProgram(p, plain);
    EXPECT_EQ(RunProgram(stripped, none), ref) << p.ToText();
    EXPECT_EQ(RunProgram(busy, dense), ref) << p.ToText();
  }
}

}  // namespace
}  // namespace lt::harness
