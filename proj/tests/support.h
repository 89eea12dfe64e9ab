#pragma once

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "lt/canonical.h"
#include "lt/compiler.h"
#include "lt/eager.h"
#include "lt/ir.h"

namespace lt::testing {

inline DataPtr Bound(BufferPtr buffer) { return DataHandle::Ready(std::move(buffer)); }

inline NodeId Leaf(IrGraph& g, const Dims& dims, uint64_t seed) {
  return g.AddDeviceData(Bound(RandnBuffer(dims, g.device(), seed)));
}

inline NodeId LeafI64(IrGraph& g, const Dims& dims, std::vector<int64_t> values) {
  return g.AddDeviceData(Bound(AllocFromHost(dims, g.device(), Storage(std::move(values)))));
}

// Reference semantics: every node evaluated on its own through the eager
// kernels, in creation order.
inline std::vector<BufferPtr> EvalNodeByNode(const IrGraph& g) {
  std::vector<BufferPtr> values(g.size());
  for (const IrNode& n : g.nodes()) {
    if (n.kind == OpKind::kDeviceData) {
      values[n.id] = n.data->Get();
    } else if (n.kind == OpKind::kConstant) {
      const auto& c = std::get<ConstantAttrs>(n.attrs);
      values[n.id] = FullBuffer({}, g.device(), c.value, c.dtype);
    } else {
      std::vector<BufferPtr> in;
      for (NodeId o : n.operands) in.push_back(values[o]);
      values[n.id] = Dispatch(n.kind, in, n.attrs);
    }
  }
  return values;
}

// Bindings for a compiled program, in its canonical parameter order.
inline std::vector<BufferPtr> BindingsFor(const IrGraph& g, const CanonicalForm& form) {
  std::vector<BufferPtr> out;
  for (const auto& p : form.params) out.push_back(g.node(p.node).data->Get());
  return out;
}

// Random well-typed f32 graphs over a few fixed shapes, mixing elementwise,
// scalar, view, reduction and matmul nodes. Values stay finite except through
// division.
class GraphGen {
 public:
  explicit GraphGen(uint64_t seed, Device device = Device{}) : rng_(seed), g_(device) {}

  IrGraph& graph() { return g_; }

  NodeId Build(int ops) {
    pool_.clear();
    for (int i = 0; i < 3; ++i) AddLeaf({3, 4});
    AddLeaf({4, 3});
    for (int i = 0; i < ops; ++i) Step();
    return pool_.back();
  }

  std::vector<NodeId> Roots(int count) {
    std::vector<NodeId> roots;
    for (int i = 0; i < count; ++i) roots.push_back(pool_[Uniform(0, pool_.size() - 1)]);
    roots.push_back(pool_.back());
    return roots;
  }

 private:
  size_t Uniform(size_t lo, size_t hi) {
    return std::uniform_int_distribution<size_t>(lo, hi)(rng_);
  }

  void AddLeaf(const Dims& dims) { pool_.push_back(Leaf(g_, dims, rng_() % 97)); }

  NodeId Same(const Shape& s) {
    std::vector<NodeId> match;
    for (NodeId id : pool_) {
      if (g_.node(id).shape == s) match.push_back(id);
    }
    if (match.empty()) {
      NodeId leaf = Leaf(g_, s.dims, rng_() % 97);
      pool_.push_back(leaf);
      return leaf;
    }
    return match[Uniform(0, match.size() - 1)];
  }

  NodeId Scalar(const Shape& like) {
    static const double kValues[] = {0.0, 1.0, -0.0, 2.5, -1.0};
    double v = kValues[Uniform(0, 4)];
    NodeId c;
    if (std::signbit(v) && v == 0.0) {
      c = g_.RecordNode(OpKind::kNeg, {g_.AddConstant(0, DType::kF32)}, {});
    } else if (v == 0.0 || v == 1.0) {
      c = g_.AddConstant(v, DType::kF32);
    } else {
      c = g_.AddDeviceData(Bound(FullBuffer({}, g_.device(), v, DType::kF32)), true);
    }
    return g_.RecordNode(OpKind::kExpand, {c}, ExpandAttrs{like.dims});
  }

  void Step() {
    NodeId a = pool_[Uniform(0, pool_.size() - 1)];
    Shape sa = g_.node(a).shape;
    NodeId out = -1;
    switch (Uniform(0, 10)) {
      case 0:
      case 1:
      case 2: {
        static const OpKind kOps[] = {OpKind::kAdd, OpKind::kSub, OpKind::kMul, OpKind::kMax,
                                      OpKind::kDiv};
        out = g_.RecordNode(kOps[Uniform(0, 4)], {a, Same(sa)}, {});
        break;
      }
      case 3: {
        static const OpKind kOps[] = {OpKind::kAdd, OpKind::kMul, OpKind::kSub};
        NodeId s = Scalar(sa);
        out = Uniform(0, 1) ? g_.RecordNode(kOps[Uniform(0, 2)], {a, s}, {})
                            : g_.RecordNode(kOps[Uniform(0, 2)], {s, a}, {});
        break;
      }
      case 4:
        out = g_.RecordNode(Uniform(0, 1) ? OpKind::kNeg : OpKind::kRelu, {a}, {});
        break;
      case 5:
        if (sa.rank() == 2) {
          NodeId b = Same(Shape{DType::kF32, {sa.dims[1], sa.dims[0]}});
          out = g_.RecordNode(OpKind::kMatMul, {a, b}, {});
        }
        break;
      case 6:
        if (sa.rank() == 2) {
          out = g_.RecordNode(OpKind::kPermute, {a}, PermuteAttrs{{1, 0}});
        }
        break;
      case 7:
        if (sa.rank() == 2) {
          out = g_.RecordNode(OpKind::kReshape, {a}, ReshapeAttrs{{sa.dims[1], sa.dims[0]}});
        }
        break;
      case 8:
        if (sa.rank() == 2) {
          out = g_.RecordNode(OpKind::kReduceSum, {a}, ReduceSumAttrs{{int64_t(Uniform(0, 1))}});
        }
        break;
      case 9:
        if (sa.rank() == 2 && sa.dims[0] > 1) {
          NodeId n = g_.RecordNode(OpKind::kNarrow, {a}, NarrowAttrs{0, 1, sa.dims[0] - 1});
          NodeId upd = g_.RecordNode(OpKind::kRelu, {n}, {});
          out = g_.RecordNode(OpKind::kUpdateNarrow, {a, upd}, UpdateNarrowAttrs{0, 1});
        }
        break;
      default:
        out = g_.RecordNode(OpKind::kAdd, {a, a}, {});
        break;
    }
    if (out >= 0) pool_.push_back(out);
  }

  std::mt19937_64 rng_;
  IrGraph g_;
  std::vector<NodeId> pool_;
};

}  // namespace lt::testing
