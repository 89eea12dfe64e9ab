// lt: demos, golden IR dumps, differential fuzzing and dispatch-count benches.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lt/compiler.h"
#include "lt/error.h"
#include "lt/harness/fuzz.h"
#include "lt/harness/workloads.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDivergence = 2;

int next_device = 0;

lt::Device FreshDevice() { return lt::Device{next_device++}; }

lt::ExecutionMode ParseMode(const std::string& name) {
  return name == "eager" ? lt::ExecutionMode::kEager : lt::ExecutionMode::kLazy;
}

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void PrintText(const lt::harness::RunReport& r) {
  const auto& m = r.metrics;
  std::cout << r.workload << " mode=" << lt::ModeName(r.mode) << " steps=" << r.steps
            << " wall_ms=" << r.wall_ms << " checksum=" << Hex(r.checksum) << "\n"
            << "  compile_count=" << m.compile_count << " cache_hit_count=" << m.cache_hit_count
            << " graphs_executed=" << m.graphs_executed
            << " kernel_dispatches=" << m.kernel_dispatches
            << " eager_dispatches=" << m.eager_dispatches
            << " eager_fallback_dispatches=" << m.eager_fallback_dispatches
            << " peak_buffer_slots=" << m.peak_buffer_slots
            << " aliased_outputs=" << m.aliased_outputs << "\n";
}

struct Globals {
  uint64_t seed = 0;
  bool json = false;
  bool verify = false;
};

struct DemoArgs {
  std::string workload;
  std::string mode = "lazy";
  int steps = 0;
  bool dump_ir = false;
  bool dump_plan = false;
};

int RunDemo(const Globals& g, const DemoArgs& a) {
  lt::harness::RunOptions options;
  options.workload = a.workload;
  options.mode = ParseMode(a.mode);
  options.seed = g.seed;
  options.steps = a.steps;
  options.device = FreshDevice();
  options.dump_ir = a.dump_ir;
  options.dump_plan = a.dump_plan;
  lt::harness::RunReport report = lt::harness::RunWorkload(options);

  if (a.dump_ir) std::cout << report.ir_dump;
  if (a.dump_plan) std::cout << report.plan_dump;
  if (g.json) {
    std::cout << report.ToJson() << "\n";
  } else if (!a.dump_ir && !a.dump_plan) {
    PrintText(report);
  }

  if (g.verify) {
    lt::harness::RunOptions other = options;
    other.mode = options.mode == lt::ExecutionMode::kLazy ? lt::ExecutionMode::kEager
                                                          : lt::ExecutionMode::kLazy;
    other.device = FreshDevice();
    other.dump_ir = other.dump_plan = false;
    lt::harness::RunReport check = lt::harness::RunWorkload(other);
    if (check.checksum != report.checksum) {
      std::cerr << "verify: checksum mismatch " << lt::ModeName(report.mode) << "="
                << Hex(report.checksum) << " " << lt::ModeName(check.mode) << "="
                << Hex(check.checksum) << "\n";
      return kExitDivergence;
    }
  }
  return kExitOk;
}

struct FuzzArgs {
  int count = 100;
  int max_nodes = 25;
  std::string inject_fault;
};

int RunFuzzCmd(const Globals& g, const FuzzArgs& a) {
  if (a.inject_fault == "add-zero-guard") {
    lt::GlobalCompilerOptions().unsafe_add_zero_rewrite = true;
  } else if (!a.inject_fault.empty()) {
    std::cerr << "unknown fault: " << a.inject_fault << "\n";
    return kExitUsage;
  }
  lt::harness::FuzzOptions options;
  options.seed = g.seed;
  options.count = a.count;
  options.max_nodes = a.max_nodes;
  options.lazy_device = FreshDevice();
  options.eager_device = FreshDevice();
  lt::harness::FuzzOutcome outcome = lt::harness::RunFuzz(options);
  if (g.json) {
    std::cout << "{\"programs_run\":" << outcome.programs_run
              << ",\"diverged\":" << (outcome.diverged ? "true" : "false") << "}\n";
  } else {
    std::cout << "fuzz: " << outcome.programs_run << " programs, "
              << (outcome.diverged ? "divergence" : "no divergence") << "\n";
  }
  if (outcome.diverged) {
    std::cerr << outcome.reproducer;
    return kExitDivergence;
  }
  return kExitOk;
}

struct BenchArgs {
  std::string workload;
  std::vector<std::string> modes = {"lazy", "eager"};
  int steps = 0;
};

int RunBench(const Globals& g, const BenchArgs& a) {
  std::vector<lt::harness::RunReport> reports;
  for (const std::string& mode : a.modes) {
    lt::harness::RunOptions options;
    options.workload = a.workload;
    options.mode = ParseMode(mode);
    options.seed = g.seed;
    options.steps = a.steps;
    options.device = FreshDevice();
    reports.push_back(lt::harness::RunWorkload(options));
  }
  if (g.json) {
    std::cout << "[";
    for (size_t i = 0; i < reports.size(); ++i) {
      if (i) std::cout << ",";
      std::cout << reports[i].ToJson();
    }
    std::cout << "]\n";
  } else {
    for (const auto& r : reports) PrintText(r);
  }
  for (const auto& r : reports) {
    if (r.checksum != reports.front().checksum) {
      std::cerr << "bench: checksums differ between modes\n";
      return kExitDivergence;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lazy tensor runtime harness"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "PRNG seed");
  app.add_flag("--json", g.json, "Emit JSON reports");
  app.add_flag("--verify", g.verify, "Cross-check checksums against the other mode");

  DemoArgs demo;
  auto* demo_cmd = app.add_subcommand("demo", "Run a demo workload");
  demo_cmd->fallthrough();
  demo_cmd->add_option("workload", demo.workload, "fig1 | loop | view-update | mlp-train")
      ->required();
  demo_cmd->add_option("--mode", demo.mode)->check(CLI::IsMember({"lazy", "eager"}));
  demo_cmd->add_option("--steps", demo.steps)->check(CLI::NonNegativeNumber);
  demo_cmd->add_flag("--dump-ir", demo.dump_ir, "Print the IR cut at the last barrier");
  demo_cmd->add_flag("--dump-plan", demo.dump_plan, "Print the last compiled plan");

  FuzzArgs fuzz;
  auto* fuzz_cmd = app.add_subcommand("fuzz", "Differential lazy/eager fuzzing");
  fuzz_cmd->fallthrough();
  fuzz_cmd->add_option("--count", fuzz.count)->check(CLI::NonNegativeNumber);
  fuzz_cmd->add_option("--max-nodes", fuzz.max_nodes)->check(CLI::PositiveNumber);
  fuzz_cmd->add_option("--inject-fault", fuzz.inject_fault,
                       "Known-bad compiler variant (add-zero-guard)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Compare modes on a workload");
  bench_cmd->fallthrough();
  bench_cmd->add_option("workload", bench.workload,
                        "elementwise-chain | shape-unstable | mlp-train")
      ->required();
  bench_cmd->add_option("--modes", bench.modes)
      ->delimiter(',')
      ->check(CLI::IsMember({"lazy", "eager"}));
  bench_cmd->add_option("--steps", bench.steps)->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*demo_cmd) return RunDemo(g, demo);
    if (*fuzz_cmd) return RunFuzzCmd(g, fuzz);
    return RunBench(g, bench);
  } catch (const lt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == lt::ErrorCode::kUnknownWorkload ? kExitUsage : kExitDivergence;
  }
}
