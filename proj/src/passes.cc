#include <bit>
#include <cstring>
#include <string>
#include <unordered_map>

#include "lt/compiler.h"
#include "lt/elementwise.h"
#include "lt/error.h"

namespace lt {
namespace {

// Rebuilds the nodes reachable from `roots` in creation order.
RootedGraph Compact(const IrGraph& graph, std::span<const NodeId> roots) {
  std::vector<bool> live(graph.size(), false);
  for (NodeId r : roots) live[r] = true;
  for (NodeId id = static_cast<NodeId>(graph.size()) - 1; id >= 0; --id) {
    if (!live[id]) continue;
    for (NodeId op : graph.node(id).operands) live[op] = true;
  }
  RootedGraph out{IrGraph(graph.device()), {}};
  std::vector<NodeId> remap(graph.size(), -1);
  for (const IrNode& node : graph.nodes()) {
    if (!live[node.id]) continue;
    std::vector<NodeId> operands;
    for (NodeId op : node.operands) operands.push_back(remap[op]);
    remap[node.id] = out.graph.RecordNode(node.kind, std::move(operands), node.attrs, node.data);
  }
  for (NodeId r : roots) out.roots.push_back(remap[r]);
  return out;
}

uint64_t Bits(double v) { return std::bit_cast<uint64_t>(v); }

// Value of a rank-0 constant, looking through Expand.
std::optional<double> ConstantValue(const IrGraph& graph, NodeId id) {
  const IrNode* node = &graph.node(id);
  if (node->kind == OpKind::kExpand) node = &graph.node(node->operands[0]);
  if (node->kind != OpKind::kConstant) return std::nullopt;
  return std::get<ConstantAttrs>(node->attrs).value;
}

bool IsConstantBits(const IrGraph& graph, NodeId id, double v) {
  auto value = ConstantValue(graph, id);
  return value && Bits(*value) == Bits(v);
}

template <typename T>
double Fold(OpKind kind, std::span<const double> values) {
  T a = static_cast<T>(values[0]);
  T r = values.size() == 2 ? ApplyBinary<T>(kind, a, static_cast<T>(values[1]))
                           : ApplyUnary<T>(kind, a);
  return static_cast<double>(r);
}

bool MayBeNegZeroNode(const IrGraph& graph, const IrNode& node,
                      const std::vector<bool>& facts) {
  if (node.shape.dtype != DType::kF32) return false;
  auto op = [&](size_t i) { return static_cast<bool>(facts[node.operands[i]]); };
  switch (node.kind) {
    case OpKind::kDeviceData:
      return true;
    case OpKind::kConstant:
      return Bits(std::get<ConstantAttrs>(node.attrs).value) == Bits(-0.0);
    case OpKind::kExpand:
    case OpKind::kReshape:
    case OpKind::kPermute:
    case OpKind::kNarrow:
      return op(0);
    case OpKind::kAdd:
      return op(0) && op(1);
    case OpKind::kSub:
      return op(0);
    case OpKind::kMax:
    case OpKind::kUpdateNarrow:
      return op(0) || op(1);
    case OpKind::kRelu:
    case OpKind::kMatMul:
    case OpKind::kReduceSum:
      return false;
    case OpKind::kMul:
    case OpKind::kDiv:
    case OpKind::kNeg:
      return true;
  }
  (void)graph;
  return true;
}

// One rewrite sweep in creation order. Returns the rewritten graph.
RootedGraph SimplifyOnce(const RootedGraph& in, const CompilerOptions& options) {
  const IrGraph& g = in.graph;
  IrGraph out(g.device());
  std::vector<NodeId> remap(g.size(), -1);
  std::vector<bool> neg_zero;

  auto record = [&](OpKind kind, std::vector<NodeId> operands, NodeAttrs attrs,
                    DataPtr data) {
    NodeId id = out.RecordNode(kind, std::move(operands), std::move(attrs), std::move(data));
    neg_zero.push_back(MayBeNegZeroNode(out, out.node(id), neg_zero));
    return id;
  };

  for (const IrNode& node : g.nodes()) {
    std::vector<NodeId> ops;
    for (NodeId op : node.operands) ops.push_back(remap[op]);
    const DType dtype = node.shape.dtype;
    std::optional<NodeId> replaced;

    if (node.kind == OpKind::kMul) {
      for (int i = 0; i < 2 && !replaced; ++i) {
        NodeId x = ops[i], c = ops[1 - i];
        if (IsConstantBits(out, c, 1.0)) replaced = x;
        else if (dtype == DType::kI64 && IsConstantBits(out, c, 0.0)) replaced = c;
      }
    } else if (node.kind == OpKind::kAdd) {
      for (int i = 0; i < 2 && !replaced; ++i) {
        NodeId x = ops[i], c = ops[1 - i];
        if (!IsConstantBits(out, c, 0.0)) continue;
        if (dtype == DType::kI64 || !neg_zero[x] || options.unsafe_add_zero_rewrite) {
          replaced = x;
        }
      }
    } else if (node.kind == OpKind::kNeg) {
      const IrNode& inner = out.node(ops[0]);
      if (inner.kind == OpKind::kNeg) replaced = inner.operands[0];
    }

    if (!replaced && IsElementwise(node.kind) && node.shape.rank() == 0) {
      std::vector<double> values;
      for (NodeId op : ops) {
        const IrNode& o = out.node(op);
        if (o.kind != OpKind::kConstant) break;
        values.push_back(std::get<ConstantAttrs>(o.attrs).value);
      }
      // Integer division faults are left to execution time.
      bool foldable = values.size() == ops.size() &&
                      !(dtype == DType::kI64 && node.kind == OpKind::kDiv);
      if (foldable) {
        double v = dtype == DType::kF32 ? Fold<float>(node.kind, values)
                                        : Fold<int64_t>(node.kind, values);
        replaced = record(OpKind::kConstant, {}, ConstantAttrs{v, dtype}, nullptr);
      }
    }

    if (replaced) {
      if (out.node(*replaced).shape != node.shape) {
        Fail(ErrorCode::kInternal, "simplify changed a shape");
      }
      remap[node.id] = *replaced;
    } else {
      remap[node.id] = record(node.kind, std::move(ops), node.attrs, node.data);
    }
  }
  std::vector<NodeId> roots;
  for (NodeId r : in.roots) roots.push_back(remap[r]);
  return Compact(out, roots);
}

void AppendBytes(std::string& key, const void* data, size_t size) {
  key.append(static_cast<const char*>(data), size);
}

void AppendInt(std::string& key, int64_t v) { AppendBytes(key, &v, sizeof(v)); }

void AppendInts(std::string& key, std::span<const int64_t> values) {
  AppendInt(key, static_cast<int64_t>(values.size()));
  for (int64_t v : values) AppendInt(key, v);
}

std::string StructuralKey(const IrNode& node, std::span<const NodeId> operands) {
  std::string key;
  AppendInt(key, static_cast<int64_t>(node.kind));
  AppendInt(key, static_cast<int64_t>(node.shape.dtype));
  AppendInts(key, node.shape.dims);
  AppendInts(key, operands);
  std::visit(
      [&](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, ConstantAttrs>) {
          AppendInt(key, static_cast<int64_t>(Bits(a.value)));
        } else if constexpr (std::is_same_v<A, ExpandAttrs>) {
          AppendInts(key, a.target_dims);
        } else if constexpr (std::is_same_v<A, ReshapeAttrs>) {
          AppendInts(key, a.dims);
        } else if constexpr (std::is_same_v<A, PermuteAttrs>) {
          AppendInts(key, a.permutation);
        } else if constexpr (std::is_same_v<A, NarrowAttrs>) {
          AppendInt(key, a.dim);
          AppendInt(key, a.start);
          AppendInt(key, a.length);
        } else if constexpr (std::is_same_v<A, UpdateNarrowAttrs>) {
          AppendInt(key, a.dim);
          AppendInt(key, a.start);
        } else if constexpr (std::is_same_v<A, ReduceSumAttrs>) {
          AppendInts(key, a.dims);
        }
      },
      node.attrs);
  return key;
}

}  // namespace

std::vector<bool> MayBeNegativeZero(const IrGraph& graph) {
  std::vector<bool> facts;
  facts.reserve(graph.size());
  for (const IrNode& node : graph.nodes()) facts.push_back(MayBeNegZeroNode(graph, node, facts));
  return facts;
}

RootedGraph Simplify(const RootedGraph& in, const CompilerOptions& options) {
  if (in.roots.empty()) Fail(ErrorCode::kEmptyRoots, "simplify: no roots");
  RootedGraph current = SimplifyOnce(in, options);
  while (true) {
    RootedGraph next = SimplifyOnce(current, options);
    if (next.graph.size() == current.graph.size()) return next;
    current = std::move(next);
  }
}

RootedGraph Cse(const RootedGraph& in) {
  if (in.roots.empty()) Fail(ErrorCode::kEmptyRoots, "cse: no roots");
  const IrGraph& g = in.graph;
  IrGraph out(g.device());
  std::vector<NodeId> remap(g.size(), -1);
  std::unordered_map<std::string, NodeId> seen;
  for (const IrNode& node : g.nodes()) {
    std::vector<NodeId> ops;
    for (NodeId op : node.operands) ops.push_back(remap[op]);
    // Leaves are distinct parameters even when their bindings coincide.
    if (node.kind == OpKind::kDeviceData) {
      remap[node.id] = out.RecordNode(node.kind, std::move(ops), node.attrs, node.data);
      continue;
    }
    std::string key = StructuralKey(node, ops);
    auto it = seen.find(key);
    if (it != seen.end()) {
      remap[node.id] = it->second;
      continue;
    }
    NodeId id = out.RecordNode(node.kind, std::move(ops), node.attrs, node.data);
    seen.emplace(std::move(key), id);
    remap[node.id] = id;
  }
  std::vector<NodeId> roots;
  for (NodeId r : in.roots) roots.push_back(remap[r]);
  return Compact(out, roots);
}

RootedGraph Dce(const RootedGraph& in) {
  if (in.roots.empty()) Fail(ErrorCode::kEmptyRoots, "dce: no roots");
  for (NodeId r : in.roots) {
    if (r < 0 || r >= static_cast<NodeId>(in.graph.size())) {
      Fail(ErrorCode::kInvalidAttrs, "dce: root out of range");
    }
  }
  return Compact(in.graph, in.roots);
}

}  // namespace lt
