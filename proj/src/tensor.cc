#include "lt/tensor.h"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "lt/eager.h"
#include "lt/error.h"

namespace lt {
namespace {

BufferPtr Gather(const Buffer& base, const Buffer& index_map) {
  auto idx = index_map.data<int64_t>();
  return std::visit(
      [&](const auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        std::vector<T> out(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) out[i] = values[idx[i]];
        return std::make_shared<Buffer>(Shape(base.dtype(), index_map.shape().dims),
                                        base.device(), Storage(std::move(out)));
      },
      base.storage());
}

BufferPtr Scatter(const Buffer& base, const Buffer& index_map, const Buffer& update) {
  auto idx = index_map.data<int64_t>();
  Storage out = base.storage();
  std::visit(
      [&](auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        auto src = update.data<T>();
        for (size_t i = 0; i < idx.size(); ++i) values[idx[i]] = src[i];
      },
      out);
  return std::make_shared<Buffer>(base.shape(), base.device(), std::move(out));
}

// Eager-mode value of a tensor. Views read through their index map.
BufferPtr EagerValue(const TensorImpl& t) {
  if (t.view) {
    if (!t.view->index_map) {
      Fail(ErrorCode::kInvalidView,
           "view was created in lazy mode; recreate it after switching to eager");
    }
    return Gather(*EagerValue(*t.view->base), *t.view->index_map);
  }
  if (!t.data) Fail(ErrorCode::kInternal, "eager tensor without a value");
  return t.data->Get();
}

LazyTensor Materialized(BufferPtr buffer) {
  auto impl = NewTensorImpl(buffer->device(), buffer->shape());
  impl->data = DataHandle::Ready(std::move(buffer));
  return LazyTensor(std::move(impl));
}

void CheckSameDevice(const LazyTensor& a, const LazyTensor& b) {
  if (a.device() != b.device()) {
    Fail(ErrorCode::kDeviceMismatch, "operands on " + a.device().ToString() + " and " +
                                         b.device().ToString());
  }
}

// A value under construction: an open-graph node (lazy) or a buffer (eager).
struct Val {
  NodeId node = -1;
  BufferPtr buffer;
};

// Applies ops in the device's current mode. Holds the device lock for the
// duration of one API call.
class OpBuilder {
 public:
  explicit OpBuilder(Device device)
      : ctx_(Context(device)), lock_(ctx_.mutex()), eager_(ctx_.mode() == ExecutionMode::kEager) {}

  bool eager() const { return eager_; }
  DeviceContext& ctx() { return ctx_; }

  Val Of(const LazyTensor& t) {
    if (eager_) return {-1, EagerValue(t.impl())};
    return {ctx_.NodeFor(t.impl()), nullptr};
  }

  // Rank-0 scalar broadcast to `dims`.
  Val Scalar(double value, DType dtype, const Dims& dims) {
    Val s;
    if (eager_) {
      s.buffer = FullBuffer({}, ctx_.device(), value, dtype);
    } else {
      s.node = WrapScalar(ctx_.open_graph(), value, dtype).node;
    }
    if (dims.empty()) return s;
    return Apply(OpKind::kExpand, {s}, ExpandAttrs{dims});
  }

  Val Apply(OpKind kind, std::vector<Val> operands, NodeAttrs attrs = {}) {
    if (eager_) {
      std::vector<BufferPtr> inputs;
      for (Val& v : operands) inputs.push_back(std::move(v.buffer));
      ctx_.CountEagerDispatch();
      return {-1, Dispatch(kind, inputs, attrs)};
    }
    std::vector<NodeId> nodes;
    for (const Val& v : operands) nodes.push_back(v.node);
    return {ctx_.Record(kind, std::move(nodes), std::move(attrs)), nullptr};
  }

  LazyTensor Finish(const Val& v) {
    if (eager_) return Materialized(v.buffer);
    auto impl = NewTensorImpl(ctx_.device(), ctx_.graph().node(v.node).shape);
    impl->node = v.node;
    impl->epoch = ctx_.epoch();
    return LazyTensor(std::move(impl));
  }

  // In-place substitution of a non-view tensor's value.
  void SetValue(TensorImpl& t, const Val& v) {
    if (eager_) {
      t.data = DataHandle::Ready(v.buffer);
    } else {
      if (t.data && !t.pre_update) t.pre_update = t.data;
      t.data = nullptr;
      t.node = v.node;
      t.epoch = ctx_.epoch();
    }
    ++t.mutation_counter;
  }

  // Writes a view's new value back into its base.
  void UpdateView(TensorImpl& v, const Val& value) {
    ViewInfo& vi = *v.view;
    TensorImpl& base = *vi.base;
    if (eager_) {
      BufferPtr updated = Scatter(*EagerValue(base), *vi.index_map, *value.buffer);
      SetValue(base, {-1, updated});
      vi.generation = base.mutation_counter;
      ++v.mutation_counter;
      return;
    }
    // Forward sequence: the base's value after each view op.
    std::vector<Shape> shapes{base.shape};
    std::vector<NodeId> chain{ctx_.NodeFor(base)};
    bool need_chain = false;
    for (size_t i = 1; i < vi.ops.size(); ++i) {
      need_chain = need_chain || std::holds_alternative<NarrowAttrs>(vi.ops[i]);
    }
    for (size_t i = 0; i + 1 < vi.ops.size(); ++i) {
      const ViewOp& op = vi.ops[i];
      std::visit(
          [&](const auto& attrs) {
            Shape in = shapes.back();
            shapes.push_back(InferShape(ViewOpKind(op), std::span<const Shape>(&in, 1), attrs));
            if (need_chain) chain.push_back(ctx_.Record(ViewOpKind(op), {chain.back()}, attrs));
          },
          op);
    }
    // Backward sequence: undo the view ops in reverse to rebuild the base.
    NodeId cur = value.node;
    for (size_t i = vi.ops.size(); i-- > 0;) {
      const ViewOp& op = vi.ops[i];
      if (std::holds_alternative<ReshapeAttrs>(op)) {
        cur = ctx_.Record(OpKind::kReshape, {cur}, ReshapeAttrs{shapes[i].dims});
      } else if (const auto* p = std::get_if<PermuteAttrs>(&op)) {
        cur = ctx_.Record(OpKind::kPermute, {cur}, PermuteAttrs{InversePermutation(p->permutation)});
      } else {
        const auto& n = std::get<NarrowAttrs>(op);
        cur = ctx_.Record(OpKind::kUpdateNarrow, {chain[i], cur}, UpdateNarrowAttrs{n.dim, n.start});
      }
    }
    SetValue(base, {cur, nullptr});
    v.node = value.node;
    v.epoch = ctx_.epoch();
    v.data = nullptr;
    vi.generation = base.mutation_counter;
    ++v.mutation_counter;
  }

 private:
  DeviceContext& ctx_;
  std::lock_guard<std::recursive_mutex> lock_;
  bool eager_;
};

LazyTensor Binary(OpKind kind, const LazyTensor& a, const LazyTensor& b,
                  std::optional<double> alpha = std::nullopt) {
  CheckSameDevice(a, b);
  OpBuilder ob(a.device());
  Val va = ob.Of(a);
  Val vb = ob.Of(b);
  if (alpha) {
    vb = ob.Apply(OpKind::kMul, {ob.Scalar(*alpha, b.dtype(), b.dims()), vb});
  }
  return ob.Finish(ob.Apply(kind, {va, vb}));
}

LazyTensor BinaryScalar(OpKind kind, const LazyTensor& a, double b) {
  OpBuilder ob(a.device());
  Val va = ob.Of(a);
  return ob.Finish(ob.Apply(kind, {va, ob.Scalar(b, a.dtype(), a.dims())}));
}

LazyTensor Unary(OpKind kind, const LazyTensor& a, NodeAttrs attrs = {}) {
  OpBuilder ob(a.device());
  return ob.Finish(ob.Apply(kind, {ob.Of(a)}, std::move(attrs)));
}

// Shared in-place path: `compute` builds the new value from the current one.
template <typename Fn>
void InPlace(const LazyTensor& t, Fn&& compute) {
  OpBuilder ob(t.device());
  Val updated = compute(ob, ob.Of(t));
  if (t.is_view()) {
    ob.UpdateView(t.impl(), updated);
  } else {
    ob.SetValue(t.impl(), updated);
  }
}

LazyTensor MakeView(const LazyTensor& t, ViewOp op) {
  const Shape in = t.shape();
  Shape out;
  try {
    out = std::visit(
        [&](const auto& attrs) {
          return InferShape(ViewOpKind(op), std::span<const Shape>(&in, 1), attrs);
        },
        op);
  } catch (const Error& e) {
    Fail(ErrorCode::kInvalidView, e.what());
  }
  OpBuilder ob(t.device());
  const TensorImpl& src = t.impl();
  ViewInfo info;
  info.base = src.view ? src.view->base : t.impl_ptr();
  if (src.view) info.ops = src.view->ops;
  info.ops.push_back(op);

  auto impl = NewTensorImpl(t.device(), out);
  if (ob.eager()) {
    BufferPtr map = src.view ? src.view->index_map
                             : IotaBuffer(info.base->shape.dims, t.device());
    info.index_map = std::visit(
        [&](const auto& attrs) {
          return Dispatch(ViewOpKind(op), std::span<const BufferPtr>(&map, 1), attrs);
        },
        op);
  } else {
    NodeId n = ob.ctx().NodeFor(t.impl());
    impl->node = std::visit(
        [&](const auto& attrs) { return ob.ctx().Record(ViewOpKind(op), {n}, attrs); }, op);
    impl->epoch = ob.ctx().epoch();
  }
  info.generation = info.base->mutation_counter;
  impl->view = std::move(info);
  return LazyTensor(std::move(impl));
}

}  // namespace

TensorImpl& LazyTensor::impl() const {
  if (!impl_) Fail(ErrorCode::kInternal, "use of an undefined tensor");
  return *impl_;
}

bool LazyTensor::is_pending() const {
  DeviceContext& ctx = Context(device());
  std::lock_guard lock(ctx.mutex());
  const TensorImpl& t = impl();
  return t.node && t.epoch == ctx.epoch();
}

LazyTensor& LazyTensor::add_(const LazyTensor& rhs, std::optional<double> alpha) {
  CheckSameDevice(*this, rhs);
  InPlace(*this, [&](OpBuilder& ob, Val cur) {
    Val r = ob.Of(rhs);
    if (alpha) r = ob.Apply(OpKind::kMul, {ob.Scalar(*alpha, rhs.dtype(), rhs.dims()), r});
    return ob.Apply(OpKind::kAdd, {cur, r});
  });
  return *this;
}

LazyTensor& LazyTensor::add_(double rhs) {
  InPlace(*this, [&](OpBuilder& ob, Val cur) {
    return ob.Apply(OpKind::kAdd, {cur, ob.Scalar(rhs, dtype(), dims())});
  });
  return *this;
}

LazyTensor& LazyTensor::sub_(const LazyTensor& rhs) {
  CheckSameDevice(*this, rhs);
  InPlace(*this, [&](OpBuilder& ob, Val cur) { return ob.Apply(OpKind::kSub, {cur, ob.Of(rhs)}); });
  return *this;
}

LazyTensor& LazyTensor::sub_(double rhs) {
  InPlace(*this, [&](OpBuilder& ob, Val cur) {
    return ob.Apply(OpKind::kSub, {cur, ob.Scalar(rhs, dtype(), dims())});
  });
  return *this;
}

LazyTensor& LazyTensor::mul_(const LazyTensor& rhs) {
  CheckSameDevice(*this, rhs);
  InPlace(*this, [&](OpBuilder& ob, Val cur) { return ob.Apply(OpKind::kMul, {cur, ob.Of(rhs)}); });
  return *this;
}

LazyTensor& LazyTensor::mul_(double rhs) {
  InPlace(*this, [&](OpBuilder& ob, Val cur) {
    return ob.Apply(OpKind::kMul, {cur, ob.Scalar(rhs, dtype(), dims())});
  });
  return *this;
}

LazyTensor& LazyTensor::assign_(const LazyTensor& rhs) {
  CheckSameDevice(*this, rhs);
  if (rhs.shape() != shape()) {
    Fail(ErrorCode::kShapeMismatch, "assign_ of " + rhs.shape().ToString() + " into " +
                                        shape().ToString());
  }
  InPlace(*this, [&](OpBuilder& ob, Val) { return ob.Of(rhs); });
  return *this;
}

LazyTensor& LazyTensor::assign_(double rhs) {
  InPlace(*this, [&](OpBuilder& ob, Val) { return ob.Scalar(rhs, dtype(), dims()); });
  return *this;
}

LazyTensor FromHost(Storage values, const Dims& dims, Device device) {
  CheckDevice(device);
  return Materialized(AllocFromHost(dims, device, std::move(values)));
}

LazyTensor Full(const Dims& dims, double value, Device device, DType dtype) {
  CheckDevice(device);
  return Materialized(FullBuffer(dims, device, value, dtype));
}

LazyTensor Randn(const Dims& dims, uint64_t seed, Device device) {
  CheckDevice(device);
  return Materialized(RandnBuffer(dims, device, seed));
}

LazyTensor Add(const LazyTensor& a, const LazyTensor& b, std::optional<double> alpha) {
  return Binary(OpKind::kAdd, a, b, alpha);
}
LazyTensor Sub(const LazyTensor& a, const LazyTensor& b, std::optional<double> alpha) {
  return Binary(OpKind::kSub, a, b, alpha);
}
LazyTensor Mul(const LazyTensor& a, const LazyTensor& b) { return Binary(OpKind::kMul, a, b); }
LazyTensor Div(const LazyTensor& a, const LazyTensor& b) { return Binary(OpKind::kDiv, a, b); }
LazyTensor Maximum(const LazyTensor& a, const LazyTensor& b) {
  return Binary(OpKind::kMax, a, b);
}

LazyTensor Add(const LazyTensor& a, double b) { return BinaryScalar(OpKind::kAdd, a, b); }
LazyTensor Sub(const LazyTensor& a, double b) { return BinaryScalar(OpKind::kSub, a, b); }
LazyTensor Mul(const LazyTensor& a, double b) { return BinaryScalar(OpKind::kMul, a, b); }
LazyTensor Div(const LazyTensor& a, double b) { return BinaryScalar(OpKind::kDiv, a, b); }
LazyTensor Maximum(const LazyTensor& a, double b) { return BinaryScalar(OpKind::kMax, a, b); }

LazyTensor Neg(const LazyTensor& a) { return Unary(OpKind::kNeg, a); }
LazyTensor Relu(const LazyTensor& a) { return Unary(OpKind::kRelu, a); }

LazyTensor MatMul(const LazyTensor& a, const LazyTensor& b) {
  return Binary(OpKind::kMatMul, a, b);
}

LazyTensor Sum(const LazyTensor& a, std::vector<int64_t> dims) {
  return Unary(OpKind::kReduceSum, a, ReduceSumAttrs{std::move(dims)});
}

LazyTensor SumAll(const LazyTensor& a) {
  std::vector<int64_t> dims(a.shape().rank());
  std::iota(dims.begin(), dims.end(), 0);
  return Sum(a, std::move(dims));
}

LazyTensor Expand(const LazyTensor& a, const Dims& dims) {
  return Unary(OpKind::kExpand, a, ExpandAttrs{dims});
}

LazyTensor View(const LazyTensor& t, const Dims& dims) { return MakeView(t, ReshapeAttrs{dims}); }

LazyTensor Permute(const LazyTensor& t, std::vector<int64_t> permutation) {
  return MakeView(t, PermuteAttrs{std::move(permutation)});
}

LazyTensor Narrow(const LazyTensor& t, int64_t dim, int64_t start, int64_t length) {
  return MakeView(t, NarrowAttrs{dim, start, length});
}

LazyTensor FallbackOp(std::string_view name, const LazyTensor& t, int64_t dim) {
  if (!IsEagerOnlyOp(name)) Fail(ErrorCode::kUnknownOp, "no eager-only op named " + std::string(name));
  // Step 1: evaluate the inputs. Step 2: run the eager kernel. Step 3: the
  // result enters later graphs as a fresh leaf.
  BufferPtr input = GetBuffer(t);
  BufferPtr out = ExtraEagerOnly(name, std::span<const BufferPtr>(&input, 1), dim);
  Context(t.device()).CountFallbackDispatch();
  return Materialized(std::move(out));
}

LazyTensor Argsort(const LazyTensor& t, int64_t dim) { return FallbackOp("argsort", t, dim); }
LazyTensor NonzeroCount(const LazyTensor& t) { return FallbackOp("nonzero_count", t); }

void SyncTensor(const LazyTensor& t) { Context(t.device()).SyncTensor(t.impl()); }

BufferPtr GetBuffer(const LazyTensor& t) {
  DeviceContext& ctx = Context(t.device());
  DataPtr data;
  {
    std::lock_guard lock(ctx.mutex());
    if (ctx.mode() == ExecutionMode::kEager) return EagerValue(t.impl());
    ctx.SyncTensor(t.impl());
    data = t.impl().data;
  }
  // Blocks until the executor publishes the value, outside the device lock.
  return data->Get();
}

Storage ToHost(const LazyTensor& t) { return ReadToHost(*GetBuffer(t)); }

double Item(const LazyTensor& t) {
  if (t.shape().rank() != 0) {
    Fail(ErrorCode::kRankError, "item() needs a rank-0 tensor, got " + t.shape().ToString());
  }
  Storage values = ToHost(t);
  return std::visit([](const auto& v) { return static_cast<double>(v[0]); }, values);
}

std::string ToString(const LazyTensor& t) {
  Storage values = ToHost(t);
  std::ostringstream out;
  out << t.shape().ToString() << " {";
  std::visit(
      [&](const auto& v) {
        for (size_t i = 0; i < v.size(); ++i) {
          if (i) out << ", ";
          if constexpr (std::is_same_v<std::decay_t<decltype(v[i])>, float>) {
            out << std::setprecision(9) << v[i];
          } else {
            out << static_cast<int64_t>(v[i]);
          }
        }
      },
      values);
  out << "}";
  return out.str();
}

}  // namespace lt
