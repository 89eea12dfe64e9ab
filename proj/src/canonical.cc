#include "lt/canonical.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>

#include "lt/error.h"

namespace lt {
namespace {

uint64_t Mix(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

void CheckRoots(const IrGraph& graph, std::span<const NodeId> roots) {
  if (roots.empty()) Fail(ErrorCode::kEmptyRoots, "no roots given");
  for (NodeId root : roots) graph.node(root);
}

// Longest path to a leaf, for every node reachable from the roots.
std::vector<int64_t> Heights(const IrGraph& graph, std::span<const NodeId> roots) {
  std::vector<int64_t> height(graph.size(), -1);
  std::vector<std::pair<NodeId, bool>> stack;
  for (NodeId root : roots) stack.emplace_back(root, false);
  while (!stack.empty()) {
    auto [id, expanded] = stack.back();
    stack.pop_back();
    if (height[id] >= 0) continue;
    const IrNode& node = graph.node(id);
    if (!expanded) {
      stack.emplace_back(id, true);
      for (NodeId op : node.operands) {
        if (height[op] < 0) stack.emplace_back(op, false);
      }
      continue;
    }
    int64_t h = 0;
    for (NodeId op : node.operands) h = std::max(h, height[op] + 1);
    height[id] = h;
  }
  return height;
}

std::string FormatScalar(double value) {
  char buf[64];
  auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

void HashAttrs(Hasher128& h, const NodeAttrs& attrs) {
  h.Add(attrs.index());
  std::visit(
      [&](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, DeviceDataAttrs>) {
          h.Add(static_cast<uint64_t>(a.device.ordinal));
          h.Add(a.dynamic_scalar ? 1 : 0);
        } else if constexpr (std::is_same_v<A, ConstantAttrs>) {
          h.AddDouble(a.value);
          h.Add(static_cast<uint64_t>(a.dtype));
        } else if constexpr (std::is_same_v<A, ExpandAttrs>) {
          for (int64_t d : a.target_dims) h.Add(d);
        } else if constexpr (std::is_same_v<A, ReshapeAttrs>) {
          for (int64_t d : a.dims) h.Add(d);
        } else if constexpr (std::is_same_v<A, PermuteAttrs>) {
          for (int64_t d : a.permutation) h.Add(d);
        } else if constexpr (std::is_same_v<A, NarrowAttrs>) {
          h.Add(a.dim);
          h.Add(a.start);
          h.Add(a.length);
        } else if constexpr (std::is_same_v<A, UpdateNarrowAttrs>) {
          h.Add(a.dim);
          h.Add(a.start);
        } else if constexpr (std::is_same_v<A, ReduceSumAttrs>) {
          h.Add(a.dims.size());
          for (int64_t d : a.dims) h.Add(d);
        }
      },
      attrs);
}

std::string AttrsText(const IrNode& node) {
  return std::visit(
      [&](const auto& a) -> std::string {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, DeviceDataAttrs>) {
          std::string out = ", device=" + a.device.ToString();
          if (a.dynamic_scalar) out += ", scalar=1";
          return out;
        } else if constexpr (std::is_same_v<A, ConstantAttrs>) {
          return ", value=" + FormatScalar(a.value);
        } else if constexpr (std::is_same_v<A, ExpandAttrs>) {
          return ", size=" + DimsToString(a.target_dims);
        } else if constexpr (std::is_same_v<A, ReshapeAttrs>) {
          return ", size=" + DimsToString(a.dims);
        } else if constexpr (std::is_same_v<A, PermuteAttrs>) {
          return ", dims=" + DimsToString(a.permutation);
        } else if constexpr (std::is_same_v<A, NarrowAttrs>) {
          return ", dim=" + std::to_string(a.dim) + ", start=" +
                 std::to_string(a.start) + ", length=" + std::to_string(a.length);
        } else if constexpr (std::is_same_v<A, UpdateNarrowAttrs>) {
          return ", dim=" + std::to_string(a.dim) + ", start=" +
                 std::to_string(a.start);
        } else if constexpr (std::is_same_v<A, ReduceSumAttrs>) {
          return ", dims=" + DimsToString(a.dims);
        } else {
          return "";
        }
      },
      node.attrs);
}

}  // namespace

void Hasher128::Add(uint64_t word) {
  ++count_;
  a_ = Mix(a_ ^ word) + 0x9e3779b97f4a7c15ULL;
  b_ = Mix(b_ + word * 0xd6e8feb86659fd93ULL + count_);
}

void Hasher128::AddDouble(double value) { Add(std::bit_cast<uint64_t>(value)); }

void Hasher128::AddString(std::string_view text) {
  Add(text.size());
  for (char c : text) Add(static_cast<unsigned char>(c));
}

CacheKey Hasher128::Finish(size_t param_arity) const {
  return CacheKey{Mix(a_ ^ count_), Mix(b_ ^ (count_ << 1)), param_arity};
}

std::string CacheKey::ToString() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

std::vector<NodeId> CanonicalPostOrder(const IrGraph& graph,
                                       std::span<const NodeId> roots) {
  CheckRoots(graph, roots);
  std::vector<int64_t> height = Heights(graph, roots);
  std::vector<bool> visited(graph.size(), false);
  std::vector<NodeId> order;
  std::vector<std::pair<NodeId, bool>> stack;
  for (NodeId root : roots) {
    stack.emplace_back(root, false);
    while (!stack.empty()) {
      auto [id, expanded] = stack.back();
      stack.pop_back();
      if (visited[id]) continue;
      if (expanded) {
        visited[id] = true;
        order.push_back(id);
        continue;
      }
      stack.emplace_back(id, true);
      const auto& operands = graph.node(id).operands;
      std::vector<size_t> positions(operands.size());
      for (size_t i = 0; i < positions.size(); ++i) positions[i] = i;
      // Visit order: taller first, then higher operand position first.
      std::sort(positions.begin(), positions.end(), [&](size_t x, size_t y) {
        int64_t hx = height[operands[x]];
        int64_t hy = height[operands[y]];
        if (hx != hy) return hx > hy;
        return x > y;
      });
      // Stack is LIFO: push in reverse visit order.
      for (auto it = positions.rbegin(); it != positions.rend(); ++it) {
        NodeId op = operands[*it];
        if (!visited[op]) stack.emplace_back(op, false);
      }
    }
  }
  return order;
}

CanonicalForm Canonicalize(const IrGraph& graph, std::span<const NodeId> roots) {
  CanonicalForm form;
  form.post_order = CanonicalPostOrder(graph, roots);
  form.index.assign(graph.size(), -1);
  for (size_t i = 0; i < form.post_order.size(); ++i) {
    form.index[form.post_order[i]] = static_cast<int64_t>(i);
  }
  Hasher128 h;
  h.Add(static_cast<uint64_t>(graph.device().ordinal));
  for (NodeId id : form.post_order) {
    const IrNode& node = graph.node(id);
    h.Add(static_cast<uint64_t>(node.kind));
    h.Add(static_cast<uint64_t>(node.shape.dtype));
    h.Add(node.shape.dims.size());
    for (int64_t d : node.shape.dims) h.Add(d);
    HashAttrs(h, node.attrs);
    h.Add(node.operands.size());
    for (NodeId op : node.operands) h.Add(form.index[op]);
    if (node.kind == OpKind::kDeviceData) {
      const auto& a = std::get<DeviceDataAttrs>(node.attrs);
      form.params.push_back(ParamDescriptor{id, node.shape, a.dynamic_scalar});
    }
  }
  h.Add(0xfeedULL);
  h.Add(roots.size());
  for (NodeId root : roots) {
    form.root_indices.push_back(form.index[root]);
    h.Add(form.index[root]);
  }
  form.key = h.Finish(form.params.size());
  return form;
}

std::string DumpText(const IrGraph& graph, std::span<const NodeId> roots) {
  std::vector<NodeId> order = CanonicalPostOrder(graph, roots);
  std::vector<int64_t> index(graph.size(), -1);
  for (size_t i = 0; i < order.size(); ++i) index[order[i]] = static_cast<int64_t>(i);
  std::string out = "IR {\n";
  for (NodeId id : order) {
    const IrNode& node = graph.node(id);
    out += "  %" + std::to_string(index[id]) + " = " + node.shape.ToString() + " " +
           OpName(node.kind) + "(";
    for (size_t i = 0; i < node.operands.size(); ++i) {
      if (i > 0) out += ", ";
      out += "%" + std::to_string(index[node.operands[i]]);
    }
    out += ")" + AttrsText(node);
    for (size_t r = 0; r < roots.size(); ++r) {
      if (roots[r] == id) out += ", ROOT=" + std::to_string(r);
    }
    out += "\n";
  }
  out += "}\n";
  return out;
}

RootedGraph CanonicalSnapshot(const IrGraph& graph, std::span<const NodeId> roots,
                              const CanonicalForm& form) {
  RootedGraph out{IrGraph(graph.device()), {}};
  int next_param = 0;
  for (NodeId id : form.post_order) {
    const IrNode& node = graph.node(id);
    std::vector<NodeId> operands;
    operands.reserve(node.operands.size());
    for (NodeId op : node.operands) operands.push_back(form.index[op]);
    NodeAttrs attrs = node.attrs;
    if (auto* dd = std::get_if<DeviceDataAttrs>(&attrs)) dd->param_slot = next_param++;
    out.graph.RecordNode(node.kind, std::move(operands), std::move(attrs));
  }
  for (NodeId root : roots) out.roots.push_back(form.index[root]);
  return out;
}

}  // namespace lt
