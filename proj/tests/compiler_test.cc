#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include <gtest/gtest.h>

#include "lt/compiler.h"
#include "lt/error.h"
#include "support.h"

namespace lt {
namespace {

using testing::BindingsFor;
using testing::EvalNodeByNode;
using testing::Leaf;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

int CountKind(const IrGraph& g, OpKind kind) {
  int n = 0;
  for (const auto& node : g.nodes()) n += node.kind == kind;
  return n;
}

RootedGraph Rooted(const IrGraph& g, std::vector<NodeId> roots) { return {g, std::move(roots)}; }

NodeId Scalar(IrGraph& g, double v, const Dims& dims) {
  NodeId c = g.AddConstant(v, DType::kF32);
  return g.RecordNode(OpKind::kExpand, {c}, ExpandAttrs{dims});
}

TEST(Simplify, DropsMultiplyByOne) {
  IrGraph g;
  NodeId x = Leaf(g, {4}, 1);
  NodeId r = g.RecordNode(OpKind::kMul, {Scalar(g, 1, {4}), x}, {});
  RootedGraph out = Simplify(Rooted(g, {r}));
  EXPECT_EQ(CountKind(out.graph, OpKind::kMul), 0);
  EXPECT_EQ(out.graph.node(out.roots[0]).kind, OpKind::kDeviceData);
}

TEST(Simplify, DoubleNegation) {
  IrGraph g;
  NodeId x = Leaf(g, {4}, 1);
  NodeId n = g.RecordNode(OpKind::kNeg, {g.RecordNode(OpKind::kNeg, {x}, {})}, {});
  RootedGraph out = Simplify(Rooted(g, {g.RecordNode(OpKind::kRelu, {n}, {})}));
  EXPECT_EQ(CountKind(out.graph, OpKind::kNeg), 0);
}

TEST(Simplify, AddZeroGuardedByNegativeZero) {
  IrGraph g;
  NodeId x = Leaf(g, {4}, 1);
  NodeId guarded = g.RecordNode(OpKind::kAdd, {x, Scalar(g, 0, {4})}, {});
  NodeId safe = g.RecordNode(OpKind::kAdd, {g.RecordNode(OpKind::kRelu, {x}, {}),
                                            Scalar(g, 0, {4})}, {});
  RootedGraph out = Simplify(Rooted(g, {guarded}));
  EXPECT_EQ(CountKind(out.graph, OpKind::kAdd), 1);
  out = Simplify(Rooted(g, {safe}));
  EXPECT_EQ(CountKind(out.graph, OpKind::kAdd), 0);

  CompilerOptions unsafe;
  unsafe.unsafe_add_zero_rewrite = true;
  out = Simplify(Rooted(g, {guarded}), unsafe);
  EXPECT_EQ(CountKind(out.graph, OpKind::kAdd), 0);
}

TEST(Simplify, IntegerMultiplyByZero) {
  IrGraph g;
  NodeId x = testing::LeafI64(g, {3}, {1, 2, 3});
  NodeId z = g.RecordNode(OpKind::kExpand, {g.AddConstant(0, DType::kI64)}, ExpandAttrs{{3}});
  NodeId r = g.RecordNode(OpKind::kMul, {x, z}, {});
  RootedGraph out = Simplify(Rooted(g, {r}));
  EXPECT_EQ(CountKind(out.graph, OpKind::kDeviceData), 0);
}

TEST(Simplify, FoldsScalarConstants) {
  IrGraph g;
  NodeId a = g.AddConstant(1, DType::kF32);
  NodeId b = g.RecordNode(OpKind::kAdd, {a, a}, {});
  NodeId c = g.RecordNode(OpKind::kNeg, {b}, {});
  RootedGraph out = Simplify(Rooted(g, {c}));
  ASSERT_EQ(out.graph.size(), 1u);
  EXPECT_EQ(std::get<ConstantAttrs>(out.graph.node(out.roots[0]).attrs).value, -2.0);
}

TEST(NegativeZero, Facts) {
  IrGraph g;
  NodeId x = Leaf(g, {4}, 1);
  NodeId r = g.RecordNode(OpKind::kRelu, {x}, {});
  NodeId s = g.RecordNode(OpKind::kAdd, {r, r}, {});
  NodeId m = g.RecordNode(OpKind::kMul, {r, r}, {});
  NodeId c = g.AddConstant(0, DType::kF32);
  auto facts = MayBeNegativeZero(g);
  EXPECT_TRUE(facts[x]);
  EXPECT_FALSE(facts[r]);
  EXPECT_FALSE(facts[s]);
  EXPECT_TRUE(facts[m]);
  EXPECT_FALSE(facts[c]);
}

TEST(Cse, MergesStructuralDuplicatesOnly) {
  IrGraph g;
  NodeId x = Leaf(g, {4}, 1);
  NodeId y = Leaf(g, {4}, 1);
  NodeId a1 = g.RecordNode(OpKind::kAdd, {x, y}, {});
  NodeId a2 = g.RecordNode(OpKind::kAdd, {x, y}, {});
  NodeId b = g.RecordNode(OpKind::kAdd, {y, x}, {});
  NodeId r = g.RecordNode(OpKind::kMul, {g.RecordNode(OpKind::kMul, {a1, a2}, {}), b}, {});
  RootedGraph out = Cse(Rooted(g, {r}));
  EXPECT_EQ(CountKind(out.graph, OpKind::kDeviceData), 2);
  EXPECT_EQ(CountKind(out.graph, OpKind::kAdd), 2);
}

TEST(Dce, RemovesUnreachableAndRejectsEmptyRoots) {
  IrGraph g;
  NodeId x = Leaf(g, {4}, 1);
  g.RecordNode(OpKind::kNeg, {x}, {});
  NodeId r = g.RecordNode(OpKind::kRelu, {x}, {});
  RootedGraph out = Dce(Rooted(g, {r}));
  EXPECT_EQ(out.graph.size(), 2u);
  EXPECT_EQ(CodeOf([&] { Dce(Rooted(g, {})); }), ErrorCode::kEmptyRoots);
}

TEST(Passes, NeverGrowAndPreserveRootShapes) {
  for (uint64_t seed = 0; seed < 60; ++seed) {
    testing::GraphGen gen(seed);
    gen.Build(30);
    RootedGraph in = Rooted(gen.graph(), gen.Roots(2));
    for (auto pass : {+[](const RootedGraph& r) { return Simplify(r); }, &Cse, &Dce}) {
      RootedGraph out = pass(in);
      EXPECT_LE(out.graph.size(), in.graph.size());
      ASSERT_EQ(out.roots.size(), in.roots.size());
      for (size_t i = 0; i < in.roots.size(); ++i) {
        EXPECT_EQ(out.graph.node(out.roots[i]).shape, in.graph.node(in.roots[i]).shape);
      }
    }
  }
}

// Compiled execution is bit-identical to evaluating each node on its own.
TEST(Execute, MatchesNodeByNodeEvaluation) {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    testing::GraphGen gen(seed);
    gen.Build(25);
    std::vector<NodeId> roots = gen.Roots(2);
    const IrGraph& g = gen.graph();
    auto expected = EvalNodeByNode(g);
    CompileCache cache;
    auto res = cache.GetOrCompile(g, roots);
    auto outs = Execute(*res.program, BindingsFor(g, res.form));
    ASSERT_EQ(outs.size(), roots.size());
    for (size_t i = 0; i < roots.size(); ++i) {
      EXPECT_TRUE(outs[i]->BitwiseEqual(*expected[roots[i]]))
          << "seed " << seed << "\n" << DumpText(g, roots);
    }
  }
}

TEST(Execute, SameResultWithPassesDisabled) {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    testing::GraphGen gen(seed);
    gen.Build(25);
    std::vector<NodeId> roots = gen.Roots(1);
    const IrGraph& g = gen.graph();
    CanonicalForm form = Canonicalize(g, roots);
    RootedGraph snap = CanonicalSnapshot(g, roots, form);
    CompilerOptions off;
    off.simplify = false;
    off.cse = false;
    auto p1 = CompileCanonical(snap, form, {});
    auto p2 = CompileCanonical(snap, form, {}, off);
    auto o1 = Execute(*p1, BindingsFor(g, form));
    auto o2 = Execute(*p2, BindingsFor(g, form));
    for (size_t i = 0; i < o1.size(); ++i) EXPECT_TRUE(o1[i]->BitwiseEqual(*o2[i]));
  }
}

TEST(Execute, NeverWritesInputsWithoutDonation) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    testing::GraphGen gen(seed);
    gen.Build(25);
    const IrGraph& g = gen.graph();
    CompileCache cache;
    auto res = cache.GetOrCompile(g, gen.Roots(2));
    auto bindings = BindingsFor(g, res.form);
    std::vector<uint64_t> before;
    for (const auto& b : bindings) before.push_back(b->Checksum());
    Execute(*res.program, bindings);
    for (size_t i = 0; i < bindings.size(); ++i) {
      EXPECT_FALSE(bindings[i]->donated());
      EXPECT_EQ(bindings[i]->Checksum(), before[i]) << "seed " << seed << " param " << i;
    }
  }
}

TEST(Execute, ValidatesBindings) {
  IrGraph g;
  NodeId x = Leaf(g, {4}, 1);
  std::vector<NodeId> roots = {g.RecordNode(OpKind::kNeg, {x}, {})};
  CompileCache cache;
  auto res = cache.GetOrCompile(g, roots);
  EXPECT_EQ(CodeOf([&] { Execute(*res.program, {}); }), ErrorCode::kArityMismatch);
  std::vector<BufferPtr> wrong = {RandnBuffer({5}, {}, 0)};
  EXPECT_EQ(CodeOf([&] { Execute(*res.program, wrong); }), ErrorCode::kShapeMismatch);
  std::vector<BufferPtr> dead = {RandnBuffer({4}, {}, 0)};
  dead[0]->Donate();
  EXPECT_EQ(CodeOf([&] { Execute(*res.program, dead); }), ErrorCode::kUseAfterDonation);
}

TEST(Fusion, ElementwiseChainIsOneStep) {
  IrGraph g;
  NodeId x = Leaf(g, {64}, 1);
  NodeId acc = Leaf(g, {64}, 2);
  for (int i = 0; i < 8; ++i) acc = g.RecordNode(OpKind::kAdd, {acc, x}, {});
  std::vector<NodeId> roots = {acc};
  CompileCache cache;
  auto res = cache.GetOrCompile(g, roots);
  ASSERT_EQ(res.program->step_count(), 1u);
  EXPECT_TRUE(IsFusedStep(res.program->schedule.steps[0]));
  EXPECT_EQ(std::get<FusedElementwise>(res.program->schedule.steps[0]).instrs.size(), 8u);
}

TEST(Fusion, NonElementwiseOpsSplitRegions) {
  IrGraph g;
  NodeId a = Leaf(g, {4, 4}, 1);
  NodeId b = Leaf(g, {4, 4}, 2);
  NodeId r = g.RecordNode(OpKind::kRelu, {g.RecordNode(OpKind::kAdd, {a, b}, {})}, {});
  NodeId m = g.RecordNode(OpKind::kMatMul, {r, b}, {});
  NodeId o = g.RecordNode(OpKind::kNeg, {g.RecordNode(OpKind::kSub, {m, a}, {})}, {});
  std::vector<NodeId> roots = {o};
  CompileCache cache;
  auto res = cache.GetOrCompile(g, roots);
  ASSERT_EQ(res.program->step_count(), 3u);
  EXPECT_TRUE(IsFusedStep(res.program->schedule.steps[0]));
  EXPECT_FALSE(IsFusedStep(res.program->schedule.steps[1]));
  EXPECT_TRUE(IsFusedStep(res.program->schedule.steps[2]));
}

TEST(Fusion, StepsAreTopologicalAndRegionsShareShape) {
  for (uint64_t seed = 0; seed < 80; ++seed) {
    testing::GraphGen gen(seed);
    gen.Build(30);
    CompileCache cache;
    auto res = cache.GetOrCompile(gen.graph(), gen.Roots(2));
    const StepSchedule& s = res.program->schedule;
    std::vector<bool> defined(s.temp_shapes.size(), false);
    for (const PlanStep& step : s.steps) {
      for (const ValueRef& in : StepInputs(step)) {
        if (!in.is_param()) EXPECT_TRUE(defined[in.index]) << "seed " << seed;
      }
      for (int out : StepOutputs(step)) {
        EXPECT_FALSE(defined[out]);
        defined[out] = true;
        if (IsFusedStep(step)) {
          EXPECT_EQ(s.temp_shapes[out], std::get<FusedElementwise>(step).shape);
        }
      }
    }
  }
}

// Temps whose lifetimes overlap never share a slot.
TEST(MemoryPlan, OverlappingTempsGetDistinctSlots) {
  for (uint64_t seed = 0; seed < 80; ++seed) {
    testing::GraphGen gen(seed);
    gen.Build(30);
    CompileCache cache;
    auto res = cache.GetOrCompile(gen.graph(), gen.Roots(2));
    const StepSchedule& s = res.program->schedule;
    const BufferPlan& plan = res.program->buffer_plan;
    size_t n = s.temp_shapes.size();
    std::vector<int> def(n, -1), last(n, -1);
    for (size_t i = 0; i < s.steps.size(); ++i) {
      for (int out : StepOutputs(s.steps[i])) def[out] = last[out] = static_cast<int>(i);
      for (const ValueRef& in : StepInputs(s.steps[i])) {
        if (!in.is_param()) last[in.index] = static_cast<int>(i);
      }
    }
    for (const ValueRef& out : s.outputs) {
      if (!out.is_param()) last[out.index] = static_cast<int>(s.steps.size());
    }
    EXPECT_LE(plan.slot_count, static_cast<int>(n));
    for (size_t a = 0; a < n; ++a) {
      for (size_t b = a + 1; b < n; ++b) {
        const Location& la = plan.temp_location[a];
        const Location& lb = plan.temp_location[b];
        if (la.in_param != lb.in_param || la.index != lb.index) continue;
        bool disjoint = last[a] < def[b] || last[b] < def[a] ||
                        (last[a] == def[b] && IsFusedStep(s.steps[def[b]])) ||
                        (last[b] == def[a] && IsFusedStep(s.steps[def[a]]));
        EXPECT_TRUE(disjoint) << "seed " << seed << " temps " << a << "," << b;
      }
    }
  }
}

// Without donations the plan needs exactly as many slots as the largest set of
// temps alive at one step.
TEST(MemoryPlan, PeakEqualsMaxLiveSet) {
  for (uint64_t seed = 0; seed < 120; ++seed) {
    testing::GraphGen gen(seed);
    gen.Build(30);
    CompileCache cache;
    auto res = cache.GetOrCompile(gen.graph(), gen.Roots(2));
    const StepSchedule& s = res.program->schedule;
    const int steps = static_cast<int>(s.steps.size());
    size_t n = s.temp_shapes.size();
    std::vector<int> def(n, -1), last(n, -1);
    for (int i = 0; i < steps; ++i) {
      for (int out : StepOutputs(s.steps[i])) def[out] = i;
      for (const ValueRef& in : StepInputs(s.steps[i])) {
        if (!in.is_param()) last[in.index] = std::max(last[in.index], i);
      }
    }
    for (const ValueRef& out : s.outputs) {
      if (!out.is_param()) last[out.index] = steps;
    }
    int peak = 0;
    for (int i = 0; i < steps; ++i) {
      int live = 0;
      for (size_t t = 0; t < n; ++t) live += def[t] <= i && i <= std::max(last[t], def[t]);
      peak = std::max(peak, live);
    }
    EXPECT_EQ(res.program->buffer_plan.slot_count, peak) << "seed " << seed;
  }
}

TEST(MemoryPlan, FusedChainNeedsFewSlots) {
  IrGraph g;
  NodeId x = Leaf(g, {64}, 1);
  NodeId acc = Leaf(g, {64}, 2);
  for (int k = 0; k < 5; ++k) acc = g.RecordNode(OpKind::kAdd, {acc, x}, {});
  CompileCache cache;
  std::vector<NodeId> roots = {acc};
  auto res = cache.GetOrCompile(g, roots);
  EXPECT_EQ(res.program->schedule.steps.size(), 1u);
  EXPECT_LE(res.program->buffer_plan.slot_count, 2);
}

struct Update {
  IrGraph g;
  std::vector<NodeId> roots;
};

// w - 0.5 * g, the shape of a weight update.
Update WeightUpdate() {
  Update u;
  NodeId w = Leaf(u.g, {8, 8}, 1);
  NodeId grad = Leaf(u.g, {8, 8}, 2);
  auto lr = WrapScalar(u.g, 0.5, DType::kF32);
  NodeId e = u.g.RecordNode(OpKind::kExpand, {lr.node}, ExpandAttrs{{8, 8}});
  NodeId step = u.g.RecordNode(OpKind::kMul, {e, grad}, {});
  u.roots = {u.g.RecordNode(OpKind::kSub, {w, step}, {})};
  return u;
}

int ParamIndexOf(const CanonicalForm& form, NodeId node) {
  for (size_t i = 0; i < form.params.size(); ++i) {
    if (form.params[i].node == node) return static_cast<int>(i);
  }
  return -1;
}

TEST(Donation, OutputTakesOverDonatedInput) {
  Update u = WeightUpdate();
  CompileCache cache;
  auto plain = cache.GetOrCompile(u.g, u.roots);
  int w = ParamIndexOf(plain.form, 0);
  std::vector<Donation> donations = {w};
  auto donated = cache.GetOrCompile(u.g, u.roots, donations);
  EXPECT_EQ(cache.compile_count(), 1);
  ASSERT_EQ(donated.program->alias_map().size(), 1u);
  EXPECT_EQ(donated.program->alias_map()[0], std::make_pair(w, 0));
  EXPECT_LE(donated.program->buffer_plan.slot_count, plain.program->buffer_plan.slot_count);

  auto ref = Execute(*plain.program, BindingsFor(u.g, plain.form));
  auto bindings = BindingsFor(u.g, donated.form);
  // The graph's leaf keeps its own buffer; donate a private copy.
  BufferPtr copy = AllocFromHost({8, 8}, {}, ReadToHost(*bindings[w]));
  int64_t id = copy->id();
  bindings[w] = copy;
  auto out = Execute(*donated.program, bindings);
  EXPECT_EQ(out[0]->id(), id);
  EXPECT_TRUE(copy->donated());
  EXPECT_TRUE(out[0]->BitwiseEqual(*ref[0]));
}

TEST(Donation, RejectsParamsWithoutMatchingOutput) {
  Update u = WeightUpdate();
  CompileCache cache;
  auto res = cache.GetOrCompile(u.g, u.roots);
  int lr = -1;
  for (size_t i = 0; i < res.form.params.size(); ++i) {
    if (res.form.params[i].dynamic_scalar) lr = static_cast<int>(i);
  }
  std::vector<Donation> bad = {lr};
  EXPECT_EQ(CodeOf([&] { cache.GetOrCompile(u.g, u.roots, bad); }),
            ErrorCode::kInvalidDonation);
  std::vector<Donation> out_of_range = {17};
  EXPECT_EQ(CodeOf([&] { cache.GetOrCompile(u.g, u.roots, out_of_range); }),
            ErrorCode::kInvalidDonation);
}

TEST(Donation, AliasMapIsInjectiveAndShapeCompatible) {
  for (uint64_t seed = 0; seed < 300; ++seed) {
    testing::GraphGen gen(seed);
    gen.Build(25);
    std::vector<NodeId> roots = gen.Roots(3);
    CompileCache cache;
    auto base = cache.GetOrCompile(gen.graph(), roots);
    std::vector<Donation> donations;
    for (size_t p = 0; p < base.form.params.size(); ++p) {
      for (NodeId r : roots) {
        if (gen.graph().node(r).shape == base.form.params[p].shape) {
          donations.emplace_back(static_cast<int>(p));
          break;
        }
      }
    }
    auto res = cache.GetOrCompile(gen.graph(), roots, donations);
    EXPECT_LE(res.program->buffer_plan.slot_count, base.program->buffer_plan.slot_count)
        << "seed " << seed;
    std::set<int> params, outs;
    for (auto [p, o] : res.program->alias_map()) {
      EXPECT_TRUE(params.insert(p).second);
      EXPECT_TRUE(outs.insert(o).second);
      EXPECT_EQ(res.form.params[p].shape, gen.graph().node(roots[o]).shape);
      EXPECT_TRUE(std::any_of(donations.begin(), donations.end(),
                              [&](const Donation& d) { return d.param == p; }));
    }

    auto expected = EvalNodeByNode(gen.graph());
    std::vector<BufferPtr> bindings;
    for (auto& b : BindingsFor(gen.graph(), res.form)) {
      bindings.push_back(AllocFromHost(b->shape().dims, {}, ReadToHost(*b)));
    }
    auto out = Execute(*res.program, bindings);
    for (size_t i = 0; i < roots.size(); ++i) {
      EXPECT_TRUE(out[i]->BitwiseEqual(*expected[roots[i]])) << "seed " << seed;
    }
  }
}

// b = a + 2 and a' = a + 1 both fit a's buffer; the named output gets it.
TEST(Donation, NamedOutputIsTheOneHosted) {
  IrGraph g;
  NodeId a = Leaf(g, {4, 4}, 1);
  NodeId x = Leaf(g, {4, 4}, 2);
  auto two = WrapScalar(g, 2.0, DType::kF32);
  NodeId b = g.RecordNode(OpKind::kAdd,
                          {a, g.RecordNode(OpKind::kExpand, {two.node}, ExpandAttrs{{4, 4}})}, {});
  NodeId m = g.RecordNode(OpKind::kMatMul, {x, a}, {});
  NodeId a1 = g.RecordNode(OpKind::kAdd, {a, Scalar(g, 1, {4, 4})}, {});
  std::vector<NodeId> roots = {b, m, a1};
  CompileCache cache;
  auto base = cache.GetOrCompile(g, roots);
  int pa = ParamIndexOf(base.form, a);
  std::vector<Donation> d = {{pa, 2}};
  auto res = cache.GetOrCompile(g, roots, d);
  ASSERT_EQ(res.program->alias_map().size(), 1u);
  EXPECT_EQ(res.program->alias_map()[0], std::make_pair(pa, 2));

  auto expected = EvalNodeByNode(g);
  std::vector<BufferPtr> bindings;
  for (auto& buf : BindingsFor(g, res.form)) {
    bindings.push_back(AllocFromHost(buf->shape().dims, {}, ReadToHost(*buf)));
  }
  int64_t id = bindings[pa]->id();
  auto out = Execute(*res.program, bindings);
  EXPECT_EQ(out[2]->id(), id);
  for (size_t i = 0; i < roots.size(); ++i) EXPECT_TRUE(out[i]->BitwiseEqual(*expected[roots[i]]));

  std::vector<Donation> no_such_output = {{pa, 3}};
  EXPECT_EQ(CodeOf([&] { cache.GetOrCompile(g, roots, no_such_output); }),
            ErrorCode::kInvalidDonation);
}

TEST(Cache, HitsOnIsomorphicGraphs) {
  CompileCache cache;
  for (int i = 0; i < 5; ++i) {
    Update u = WeightUpdate();
    auto res = cache.GetOrCompile(u.g, u.roots);
    EXPECT_EQ(res.hit, i > 0);
  }
  EXPECT_EQ(cache.compile_count(), 1);
  EXPECT_EQ(cache.hit_count(), 4);
  EXPECT_EQ(cache.size(), 1u);
}

TEST(Cache, DistinctDonationSetsShareCompilation) {
  Update u = WeightUpdate();
  CompileCache cache;
  auto a = cache.GetOrCompile(u.g, u.roots);
  std::vector<Donation> d = {ParamIndexOf(a.form, 0)};
  auto b = cache.GetOrCompile(u.g, u.roots, d);
  auto c = cache.GetOrCompile(u.g, u.roots, d);
  EXPECT_EQ(cache.compile_count(), 1);
  EXPECT_NE(a.program, b.program);
  EXPECT_EQ(b.program, c.program);
  EXPECT_EQ(a.program->key, b.program->key);
}

TEST(Plan, DumpFormat) {
  Update u = WeightUpdate();
  CompileCache cache;
  auto res = cache.GetOrCompile(u.g, u.roots);
  std::string dump = DumpPlan(*res.program);
  std::regex line(R"(step\d+: (fused\[\d+ ops\]|[a-z_]+) slots\(in=[ps0-9 ]*, out=[ps0-9 ]*\))");
  std::istringstream in(dump);
  std::string l;
  int lines = 0;
  while (std::getline(in, l)) {
    EXPECT_TRUE(std::regex_match(l, line)) << l;
    ++lines;
  }
  EXPECT_EQ(lines, static_cast<int>(res.program->step_count()));
}

}  // namespace
}  // namespace lt
