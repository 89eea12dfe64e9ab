#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "lt/compiler.h"
#include "lt/error.h"

namespace lt {
namespace {

// Non-constant nodes that may join a fused loop.
bool Fusible(const IrNode& node, const IrGraph& graph) {
  if (node.shape.dtype == DType::kPred) return false;
  if (IsElementwise(node.kind)) return true;
  if (node.kind == OpKind::kExpand) {
    const Shape& in = graph.node(node.operands[0]).shape;
    return in.rank() == 0 || in == node.shape;
  }
  return false;
}

class UnionFind {
 public:
  explicit UnionFind(size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  size_t Find(size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  // Keeps the smaller index as representative.
  void Union(size_t a, size_t b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<size_t> parent_;
};

struct Partition {
  // Unit id per node, -1 for leaves (DeviceData, inlined constants).
  std::vector<int> unit;
  int count = 0;
};

}  // namespace

bool IsFusedStep(const PlanStep& step) {
  return std::holds_alternative<FusedElementwise>(step);
}

std::vector<ValueRef> StepInputs(const PlanStep& step) {
  return std::visit([](const auto& s) { return s.inputs; }, step);
}

std::vector<int> StepOutputs(const PlanStep& step) {
  if (const auto* f = std::get_if<FusedElementwise>(&step)) {
    std::vector<int> out;
    for (const auto& [instr, temp] : f->outputs) out.push_back(temp);
    return out;
  }
  return {std::get<SingleOp>(step).output};
}

StepSchedule FuseElementwise(const RootedGraph& rooted, std::vector<Shape> param_shapes) {
  const IrGraph& g = rooted.graph;
  const size_t n = g.size();
  StepSchedule schedule;
  schedule.param_shapes = std::move(param_shapes);

  std::vector<std::vector<NodeId>> users(n);
  for (const IrNode& node : g.nodes()) {
    for (NodeId op : node.operands) users[op].push_back(node.id);
  }
  std::vector<bool> is_root(n, false);
  for (NodeId r : rooted.roots) is_root[r] = true;

  std::vector<bool> fusible(n, false);
  for (const IrNode& node : g.nodes()) fusible[node.id] = Fusible(node, g);

  // A constant is inlined into fused consumers; it needs its own value only
  // when a root or a non-fused consumer reads it.
  std::vector<bool> leaf(n, false);
  std::vector<bool> materialize_constant(n, false);
  for (const IrNode& node : g.nodes()) {
    if (node.kind == OpKind::kDeviceData) leaf[node.id] = true;
    if (node.kind == OpKind::kConstant) {
      leaf[node.id] = true;
      bool needed = is_root[node.id];
      for (NodeId u : users[node.id]) needed = needed || !fusible[u];
      materialize_constant[node.id] = needed;
    }
  }

  // Region growing: union same-shape fusible producer/consumer pairs unless
  // the merge would create a cycle between regions.
  UnionFind uf(n);
  auto creates_cycle = [&](size_t ra, size_t rb) {
    // Path search over the region quotient graph: from ra, any path of
    // length >= 2 reaching rb (or from rb reaching ra) forms a cycle.
    auto quotient_path = [&](size_t from, size_t to) {
      std::vector<bool> visited(n, false);
      std::vector<size_t> frontier;
      // Successor regions of `from`, excluding `to` itself.
      for (NodeId id = 0; id < static_cast<NodeId>(n); ++id) {
        if (leaf[id] || uf.Find(id) != from) continue;
        for (NodeId u : users[id]) {
          size_t ru = uf.Find(u);
          if (ru != from && ru != to && !visited[ru]) {
            visited[ru] = true;
            frontier.push_back(ru);
          }
        }
      }
      while (!frontier.empty()) {
        size_t r = frontier.back();
        frontier.pop_back();
        for (NodeId id = 0; id < static_cast<NodeId>(n); ++id) {
          if (leaf[id] || uf.Find(id) != r) continue;
          for (NodeId u : users[id]) {
            size_t ru = uf.Find(u);
            if (ru == to) return true;
            if (ru != r && !visited[ru]) {
              visited[ru] = true;
              frontier.push_back(ru);
            }
          }
        }
      }
      return false;
    };
    return quotient_path(ra, rb) || quotient_path(rb, ra);
  };

  for (const IrNode& node : g.nodes()) {
    if (!fusible[node.id]) continue;
    for (NodeId op : node.operands) {
      if (!fusible[op] || g.node(op).shape != node.shape) continue;
      size_t ra = uf.Find(op), rb = uf.Find(node.id);
      if (ra == rb) continue;
      if (!creates_cycle(ra, rb)) uf.Union(ra, rb);
    }
  }

  // Units: one per region or non-fusible compute node, plus materialized
  // constants.
  Partition part;
  part.unit.assign(n, -1);
  std::map<size_t, int> unit_of_rep;
  for (const IrNode& node : g.nodes()) {
    bool compute = !leaf[node.id] || materialize_constant[node.id];
    if (!compute) continue;
    size_t rep = leaf[node.id] ? node.id : uf.Find(node.id);
    auto [it, inserted] = unit_of_rep.emplace(rep, part.count);
    if (inserted) ++part.count;
    part.unit[node.id] = it->second;
  }

  std::vector<std::vector<NodeId>> unit_nodes(part.count);
  for (NodeId id = 0; id < static_cast<NodeId>(n); ++id) {
    if (part.unit[id] >= 0) unit_nodes[part.unit[id]].push_back(id);
  }

  // Topological order of units; ready units are taken by smallest first node.
  std::vector<std::set<int>> succ(part.count);
  std::vector<int> indegree(part.count, 0);
  for (const IrNode& node : g.nodes()) {
    int u = part.unit[node.id];
    if (u < 0 || leaf[node.id]) continue;
    for (NodeId op : node.operands) {
      int v = part.unit[op];
      if (v < 0 || v == u) continue;
      // Constants read by fused consumers are inlined, not edges.
      if (g.node(op).kind == OpKind::kConstant && fusible[node.id]) continue;
      if (succ[v].insert(u).second) ++indegree[u];
    }
  }
  std::priority_queue<std::pair<NodeId, int>, std::vector<std::pair<NodeId, int>>,
                      std::greater<>>
      ready;
  for (int u = 0; u < part.count; ++u) {
    if (indegree[u] == 0) ready.emplace(unit_nodes[u].front(), u);
  }

  std::vector<std::optional<ValueRef>> value(n);
  for (const IrNode& node : g.nodes()) {
    if (node.kind == OpKind::kDeviceData) {
      const auto& attrs = std::get<DeviceDataAttrs>(node.attrs);
      if (!attrs.param_slot) Fail(ErrorCode::kInternal, "device_data without a param slot");
      value[node.id] = ValueRef::Param(*attrs.param_slot);
    }
  }
  auto new_temp = [&](const Shape& shape) {
    schedule.temp_shapes.push_back(shape);
    return static_cast<int>(schedule.temp_shapes.size()) - 1;
  };

  int scheduled = 0;
  while (!ready.empty()) {
    int u = ready.top().second;
    ready.pop();
    ++scheduled;
    const auto& nodes = unit_nodes[u];
    const IrNode& first = g.node(nodes.front());

    if (nodes.size() == 1 && !fusible[first.id] && first.kind != OpKind::kConstant) {
      SingleOp single;
      single.kind = first.kind;
      single.attrs = first.attrs;
      for (NodeId op : first.operands) single.inputs.push_back(*value[op]);
      single.output = new_temp(first.shape);
      value[first.id] = ValueRef::Temp(single.output);
      schedule.steps.emplace_back(std::move(single));
    } else {
      FusedElementwise fused;
      fused.shape = first.shape;
      std::map<NodeId, int> instr_of;
      std::map<std::pair<int, int>, int> input_of;
      auto operand_ref = [&](NodeId op) -> int {
        auto it = instr_of.find(op);
        if (it != instr_of.end()) return it->second;
        const IrNode& o = g.node(op);
        if (o.kind == OpKind::kConstant) {
          int idx = static_cast<int>(fused.instrs.size());
          fused.instrs.push_back({OpKind::kConstant, 0, 0, std::get<ConstantAttrs>(o.attrs).value});
          instr_of[op] = idx;
          return idx;
        }
        ValueRef ref = *value[op];
        auto key = std::make_pair(static_cast<int>(ref.kind), ref.index);
        auto [in_it, inserted] = input_of.emplace(key, static_cast<int>(fused.inputs.size()));
        if (inserted) fused.inputs.push_back(ref);
        return -1 - in_it->second;
      };
      for (NodeId id : nodes) {
        const IrNode& node = g.node(id);
        FusedInstr instr;
        instr.kind = node.kind;
        if (node.kind == OpKind::kConstant) {
          instr.constant = std::get<ConstantAttrs>(node.attrs).value;
        } else {
          instr.a = operand_ref(node.operands[0]);
          if (node.operands.size() > 1) instr.b = operand_ref(node.operands[1]);
        }
        instr_of[id] = static_cast<int>(fused.instrs.size());
        fused.instrs.push_back(instr);
      }
      for (NodeId id : nodes) {
        bool escapes = is_root[id];
        for (NodeId user : users[id]) escapes = escapes || part.unit[user] != u;
        if (!escapes) continue;
        int temp = new_temp(g.node(id).shape);
        fused.outputs.emplace_back(instr_of[id], temp);
        value[id] = ValueRef::Temp(temp);
      }
      schedule.steps.emplace_back(std::move(fused));
    }

    for (int s : succ[u]) {
      if (--indegree[s] == 0) ready.emplace(unit_nodes[s].front(), s);
    }
  }
  if (scheduled != part.count) Fail(ErrorCode::kInternal, "fusion produced a cyclic schedule");

  for (NodeId r : rooted.roots) schedule.outputs.push_back(*value[r]);
  return schedule;
}

}  // namespace lt
