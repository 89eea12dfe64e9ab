// One PASS/FAIL line per acceptance criterion. Usage: lt_acceptance <lt-binary> <golden-dir>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lt/compiler.h"
#include "lt/harness/fuzz.h"
#include "lt/tensor.h"

namespace {

using namespace lt;

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void Expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int next_device = 0;
Device Fresh() { return Device{next_device++}; }

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string Capture(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
  pclose(pipe);
  return out;
}

size_t Count(const std::string& text, const std::string& needle) {
  size_t n = 0;
  for (size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<float> Host(const LazyTensor& t) { return std::get<std::vector<float>>(ToHost(t)); }

void GoldenFigures(Check& c, const std::string& cli, const std::string& golden) {
  auto start = std::chrono::steady_clock::now();
  struct Case {
    const char* args;
    const char* file;
  } cases[] = {{"demo fig1 --dump-ir", "fig1.txt"},
               {"demo loop --steps 2 --dump-ir", "loop.txt"},
               {"demo view-update --dump-ir", "view_update.txt"}};
  for (const auto& k : cases) {
    std::string got = Capture(cli + " " + k.args);
    c.Expect(!got.empty() && got == Slurp(golden + "/" + k.file), std::string(k.args) + " matches " + k.file);
  }
  std::string fig1 = Slurp(golden + "/fig1.txt");
  c.Expect(fig1.find("constant(), value=1") != std::string::npos &&
               fig1.find("expand(%0), size=(2, 4)") != std::string::npos,
           "fig1 scales through an expanded constant 1");
  c.Expect(Count(Slurp(golden + "/loop.txt"), " add(") == 2, "loop has two add nodes");
  std::string fig3 = Slurp(golden + "/view_update.txt");
  c.Expect(fig3.find("permute(%2), dims=(1, 2, 0)") != std::string::npos &&
               fig3.find("dims=(2, 0, 1)") != std::string::npos,
           "view update has permute (1,2,0) and its inverse (2,0,1)");
  double s = Seconds(start);
  c.Expect(s < 1.0, "runtime < 1 s");
  c.detail << "3 dumps byte-identical, " << s << " s";
}

void EagerIllusion(Check& c) {
  auto start = std::chrono::steady_clock::now();
  harness::FuzzOptions o;
  o.seed = 1;
  o.count = 1000;
  o.max_nodes = 25;
  o.lazy_device = Fresh();
  o.eager_device = Fresh();
  auto r = harness::RunFuzz(o);
  double s = Seconds(start);
  c.Expect(r.programs_run == 1000 && !r.diverged, "1000 programs without divergence\n" + r.reproducer);
  c.Expect(s < 60.0, "runtime < 60 s");

  // The corpus exercises every feature the property is about.
  int views = 0, inplace = 0, fallback = 0, branch = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string text = harness::GenerateProgram(o.seed * 1000003ULL + i, 25).ToText();
    views += text.find("= permute") != std::string::npos ||
             text.find("= narrow") != std::string::npos || text.find("= view") != std::string::npos;
    inplace += text.find("_(") != std::string::npos;
    fallback += text.find("argsort") != std::string::npos ||
                text.find("nonzero_count") != std::string::npos;
    branch += text.find("if item(") != std::string::npos;
  }
  c.Expect(views > 300 && inplace > 300 && fallback > 100 && branch > 100,
           "corpus mixes views, in-place, fallback and host branches");
  c.detail << r.programs_run << " programs bitwise equal in " << s << " s (views " << views
           << ", in-place " << inplace << ", fallback " << fallback << ", branches " << branch
           << ")";
}

void CacheContract(Check& c) {
  auto train = [](Device d, int steps, const std::function<double(int)>& lr,
                  const std::function<int64_t(int)>& batch) {
    LazyTensor w = Randn({8, 4}, 1, d);
    for (int i = 0; i < steps; ++i) {
      LazyTensor x = Randn({batch(i), 8}, 10 + i, d);
      LazyTensor loss = SumAll(Relu(MatMul(x, w)));
      w.sub_(Mul(Randn({8, 4}, 100 + i, d), lr(i)));
      MarkStep(d);
    }
    return Metrics(d);
  };
  Device d1 = Fresh();
  auto same = train(d1, 10, [](int) { return 0.01; }, [](int) { return 16; });
  c.Expect(same.compile_count == 1 && same.cache_hit_count == 9,
           "identical steps: compile_count 1, hits 9");
  Device d2 = Fresh();
  auto scalars = train(d2, 10, [](int i) { return 0.01 * (i + 2); }, [](int) { return 16; });
  c.Expect(scalars.compile_count == 1, "changing lr keeps compile_count 1");
  Device d3 = Fresh();
  auto shapes = train(d3, 10, [](int) { return 0.01; }, [](int i) { return i < 5 ? 16 : 8; });
  c.Expect(shapes.compile_count == 2, "one shape change adds one compile");
  c.detail << "compiles/hits identical=" << same.compile_count << "/" << same.cache_hit_count
           << ", varying lr=" << scalars.compile_count << ", shape change=" << shapes.compile_count;
}

void SpecialScalars(Check& c) {
  auto steps_for = [](double scale) {
    Device d = Fresh();
    LazyTensor a = Randn({4, 4}, 1, d);
    LazyTensor b = Randn({4, 4}, 2, d);
    LazyTensor r = SumAll(Mul(MatMul(a, b), scale));
    MarkStep(d);
    auto p = Context(d).last_program();
    bool has_mul = false;
    for (const auto& step : p->schedule.steps) {
      if (auto* f = std::get_if<FusedElementwise>(&step)) {
        for (const auto& in : f->instrs) has_mul |= in.kind == OpKind::kMul;
      }
    }
    return std::make_pair(p->step_count(), has_mul);
  };
  auto [one_steps, one_mul] = steps_for(1.0);
  auto [two_steps, two_mul] = steps_for(2.0);
  c.Expect(!one_mul && two_mul, "multiply by 1 elided, by 2 kept");
  c.Expect(one_steps + 1 == two_steps, "plan step count drops by one");

  Device d = Fresh();
  LazyTensor x = Randn({4, 4}, 1, d);
  std::vector<const CompiledProgram*> programs;
  std::vector<float> got;
  for (double s : {2.0, 3.0, 5.0}) {
    LazyTensor y = Mul(x, s);
    MarkStep(d);
    programs.push_back(Context(d).last_program().get());
    got.push_back(Host(y)[0]);
  }
  float x0 = Host(x)[0];
  c.Expect(programs[0] == programs[1] && programs[1] == programs[2],
           "scalars 2, 3, 5 share one CompiledProgram");
  c.Expect(Metrics(d).compile_count == 1, "one compile for three scalars");
  c.Expect(got == std::vector<float>{x0 * 2.0f, x0 * 3.0f, x0 * 5.0f}, "scalar values applied");
  c.detail << "steps *1=" << one_steps << " *2=" << two_steps << ", {2,3,5} compiles "
           << Metrics(d).compile_count;
}

void AliasingCaveats(Check& c) {
  {
    Device d = Fresh();
    LazyTensor a = Randn({4}, 1, d);
    a += 1.0;
    std::string p1 = ToString(a), p2 = ToString(a);
    c.Expect(p1 == p2, "print(a); print(a) equal");
  }
  {
    Device d = Fresh();
    LazyTensor a = Randn({4}, 2, d);
    auto old = Host(a);
    LazyTensor b = Add(a, 2.0);
    a += 1.0;
    MarkStep(d);
    auto hb = Host(b), ha = Host(a);
    bool ok = true;
    for (size_t i = 0; i < old.size(); ++i) {
      ok &= hb[i] == old[i] + 2.0f && ha[i] == old[i] + 1.0f;
    }
    c.Expect(ok, "b == a_old + 2 and a == a_old + 1");
  }
  struct Outcome {
    bool reused;
    int64_t peak;
    std::vector<float> w, loss;
  };
  auto step = [](bool donation) {
    SetDonationEnabled(donation);
    Device d = Fresh();
    LazyTensor w = Randn({32, 32}, 3, d);
    LazyTensor x = Randn({8, 32}, 4, d);
    MarkStep(d);
    int64_t id = GetBuffer(w)->id();
    LazyTensor loss = SumAll(Relu(MatMul(x, w)));
    w.sub_(Mul(Randn({32, 32}, 5, d), 0.01));
    MarkStep(d);
    Outcome o{GetBuffer(w)->id() == id, Metrics(d).peak_buffer_slots, Host(w), Host(loss)};
    SetDonationEnabled(true);
    return o;
  };
  Outcome on = step(true), off = step(false);
  c.Expect(on.reused, "weight buffer id reused with donation");
  c.Expect(!off.reused, "weight buffer id fresh without donation");
  c.Expect(on.peak <= off.peak, "peak_buffer_slots(on) <= peak_buffer_slots(off)");
  c.Expect(on.w == off.w && on.loss == off.loss, "outputs unchanged by donation");
  c.detail << "peak slots on=" << on.peak << " off=" << off.peak;
}

void FallbackPattern(Check& c) {
  Device d = Fresh();
  std::vector<float> xs = {0.5f, -1.0f, 3.0f, 2.0f, -0.25f, 1.5f};
  LazyTensor x = FromHost(xs, {6}, d);
  LazyTensor y = Relu(Mul(x, 3.0));
  LazyTensor idx = Argsort(y);
  LazyTensor z = Add(idx, 1.0);
  LazyTensor w = Mul(y, 2.0);
  MarkStep(d);
  MetricsSnapshot m = Metrics(d);
  c.Expect(m.graphs_executed == 2, "exactly 2 compiled graphs");
  c.Expect(m.eager_fallback_dispatches == 1, "exactly 1 eager fallback dispatch");

  std::vector<float> yh(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) yh[i] = std::max(xs[i] * 3.0f, 0.0f);
  std::vector<int64_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) { return yh[a] < yh[b]; });
  std::vector<int64_t> zh;
  for (int64_t o : order) zh.push_back(o + 1);
  std::vector<float> wh;
  for (float v : yh) wh.push_back(v * 2.0f);
  c.Expect(std::get<std::vector<int64_t>>(ToHost(z)) == zh && Host(w) == wh, "final values correct");
  c.detail << "graphs_executed=" << m.graphs_executed
           << " eager_fallback_dispatches=" << m.eager_fallback_dispatches;
}

void FusionDispatch(Check& c) {
  auto run = [](ExecutionMode mode) {
    Device d = Fresh();
    SetExecutionMode(d, mode);
    LazyTensor x = Randn({64}, 1, d);
    LazyTensor acc = Randn({64}, 2, d);
    for (int i = 0; i < 8; ++i) acc = Add(acc, x);
    MarkStep(d);
    return std::make_pair(Metrics(d), Host(acc));
  };
  auto [lazy, lv] = run(ExecutionMode::kLazy);
  auto [eager, ev] = run(ExecutionMode::kEager);
  c.Expect(lazy.kernel_dispatches == 1, "lazy: 1 kernel dispatch");
  c.Expect(eager.eager_dispatches == 8, "eager: 8 dispatches");
  c.Expect(lv == ev, "same values");
  c.detail << "lazy kernel_dispatches=" << lazy.kernel_dispatches
           << " eager_dispatches=" << eager.eager_dispatches;
}

void ShapeInstability(Check& c) {
  Device d = Fresh();
  const int steps = 12;
  for (int i = 0; i < steps; ++i) {
    LazyTensor a = Randn({i + 1, 4}, i, d);
    LazyTensor r = SumAll(Relu(Add(a, a)));
    MarkStep(d);
  }
  auto m = Metrics(d);
  c.Expect(m.compile_count == steps, "compile_count == steps");
  c.Expect(m.cache_hit_count == 0, "no cache hits");
  c.detail << "compile_count=" << m.compile_count << " for " << steps << " steps";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: lt_acceptance <lt-binary> <golden-dir>\n";
    return 1;
  }
  std::string cli = argv[1], golden = argv[2];
  struct Criterion {
    const char* name;
    std::function<void(Check&)> run;
  } criteria[] = {
      {"golden-figures", [&](Check& c) { GoldenFigures(c, cli, golden); }},
      {"eager-illusion", EagerIllusion},
      {"cache-contract", CacheContract},
      {"special-scalars", SpecialScalars},
      {"aliasing-caveats", AliasingCaveats},
      {"fallback-pattern", FallbackPattern},
      {"fusion-dispatch-count", FusionDispatch},
      {"shape-instability", ShapeInstability},
  };
  int failed = 0;
  for (auto& k : criteria) {
    Check c;
    try {
      k.run(c);
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail << " [exception: " << e.what() << "]";
    }
    std::cout << (c.ok ? "PASS " : "FAIL ") << k.name << ": " << c.detail.str() << "\n";
    failed += !c.ok;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " failed" : "acceptance: all passed")
            << "\n";
  return failed ? 1 : 0;
}
