#include "lt/ir.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "lt/error.h"

namespace lt {
namespace {

template <typename A>
const A& AttrsAs(OpKind kind, const NodeAttrs& attrs) {
  const A* value = std::get_if<A>(&attrs);
  if (value == nullptr) {
    Fail(ErrorCode::kInvalidAttrs,
         std::string("wrong attribute kind for ") + OpName(kind));
  }
  return *value;
}

void CheckArity(OpKind kind, std::span<const Shape> operands, size_t arity) {
  if (operands.size() != arity) {
    Fail(ErrorCode::kArityMismatch,
         std::string(OpName(kind)) + " takes " + std::to_string(arity) +
             " operands, got " + std::to_string(operands.size()));
  }
}

[[noreturn]] void ShapeError(OpKind kind, const Shape& a, const Shape& b) {
  Fail(ErrorCode::kShapeMismatch, std::string(OpName(kind)) + ": " +
                                      a.ToString() + " vs " + b.ToString());
}

void CheckArithmetic(OpKind kind, const Shape& shape) {
  if (shape.dtype == DType::kPred) {
    Fail(ErrorCode::kDTypeMismatch,
         std::string(OpName(kind)) + " is not defined on " + shape.ToString());
  }
}

void CheckDims(const Dims& dims) {
  for (int64_t d : dims) {
    if (d < 0) Fail(ErrorCode::kInvalidAttrs, "negative dimension in " + DimsToString(dims));
  }
}

}  // namespace

const char* OpName(OpKind kind) {
  switch (kind) {
    case OpKind::kDeviceData:
      return "device_data";
    case OpKind::kConstant:
      return "constant";
    case OpKind::kExpand:
      return "expand";
    case OpKind::kAdd:
      return "add";
    case OpKind::kSub:
      return "subtract";
    case OpKind::kMul:
      return "multiply";
    case OpKind::kDiv:
      return "divide";
    case OpKind::kNeg:
      return "negate";
    case OpKind::kRelu:
      return "relu";
    case OpKind::kMax:
      return "maximum";
    case OpKind::kMatMul:
      return "matmul";
    case OpKind::kReduceSum:
      return "reduce_sum";
    case OpKind::kReshape:
      return "reshape";
    case OpKind::kPermute:
      return "permute";
    case OpKind::kNarrow:
      return "narrow";
    case OpKind::kUpdateNarrow:
      return "update_narrow";
  }
  return "?";
}

bool IsBinaryElementwise(OpKind kind) {
  return kind == OpKind::kAdd || kind == OpKind::kSub || kind == OpKind::kMul ||
         kind == OpKind::kDiv || kind == OpKind::kMax;
}

bool IsUnaryElementwise(OpKind kind) {
  return kind == OpKind::kNeg || kind == OpKind::kRelu;
}

bool IsElementwise(OpKind kind) {
  return IsBinaryElementwise(kind) || IsUnaryElementwise(kind);
}

bool IsViewOp(OpKind kind) {
  return kind == OpKind::kReshape || kind == OpKind::kPermute ||
         kind == OpKind::kNarrow;
}

std::vector<int64_t> InversePermutation(std::span<const int64_t> permutation) {
  std::vector<int64_t> inverse(permutation.size());
  for (size_t i = 0; i < permutation.size(); ++i) {
    inverse[permutation[i]] = static_cast<int64_t>(i);
  }
  return inverse;
}

Shape InferShape(OpKind kind, std::span<const Shape> operands,
                 const NodeAttrs& attrs) {
  switch (kind) {
    case OpKind::kDeviceData: {
      CheckArity(kind, operands, 0);
      const auto& a = AttrsAs<DeviceDataAttrs>(kind, attrs);
      CheckDims(a.shape.dims);
      if (a.dynamic_scalar && a.shape.rank() != 0) {
        Fail(ErrorCode::kInvalidAttrs, "dynamic scalar must be rank 0");
      }
      return a.shape;
    }
    case OpKind::kConstant: {
      CheckArity(kind, operands, 0);
      const auto& a = AttrsAs<ConstantAttrs>(kind, attrs);
      return Shape(a.dtype, {});
    }
    case OpKind::kExpand: {
      CheckArity(kind, operands, 1);
      const auto& a = AttrsAs<ExpandAttrs>(kind, attrs);
      CheckDims(a.target_dims);
      const Shape& in = operands[0];
      if (in.rank() != 0 && in.dims != a.target_dims) {
        ShapeError(kind, in, Shape(in.dtype, a.target_dims));
      }
      return Shape(in.dtype, a.target_dims);
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv:
    case OpKind::kMax: {
      CheckArity(kind, operands, 2);
      AttrsAs<std::monostate>(kind, attrs);
      const Shape& a = operands[0];
      const Shape& b = operands[1];
      if (a.dtype != b.dtype) {
        Fail(ErrorCode::kDTypeMismatch, std::string(OpName(kind)) + ": " +
                                            a.ToString() + " vs " + b.ToString());
      }
      if (a.dims != b.dims) ShapeError(kind, a, b);
      CheckArithmetic(kind, a);
      return a;
    }
    case OpKind::kNeg:
    case OpKind::kRelu: {
      CheckArity(kind, operands, 1);
      AttrsAs<std::monostate>(kind, attrs);
      CheckArithmetic(kind, operands[0]);
      return operands[0];
    }
    case OpKind::kMatMul: {
      CheckArity(kind, operands, 2);
      AttrsAs<std::monostate>(kind, attrs);
      const Shape& a = operands[0];
      const Shape& b = operands[1];
      if (a.dtype != b.dtype) {
        Fail(ErrorCode::kDTypeMismatch, std::string(OpName(kind)) + ": " +
                                            a.ToString() + " vs " + b.ToString());
      }
      if (a.rank() != 2 || b.rank() != 2 || a.dims[1] != b.dims[0]) {
        ShapeError(kind, a, b);
      }
      CheckArithmetic(kind, a);
      return Shape(a.dtype, {a.dims[0], b.dims[1]});
    }
    case OpKind::kReduceSum: {
      CheckArity(kind, operands, 1);
      const auto& a = AttrsAs<ReduceSumAttrs>(kind, attrs);
      const Shape& in = operands[0];
      CheckArithmetic(kind, in);
      std::vector<bool> reduced(in.rank(), false);
      for (int64_t d : a.dims) {
        if (d < 0 || d >= in.rank() || reduced[d]) {
          Fail(ErrorCode::kInvalidAttrs, "reduce_sum dims " + DimsToString(a.dims) +
                                             " invalid for " + in.ToString());
        }
        reduced[d] = true;
      }
      Dims out;
      for (int64_t i = 0; i < in.rank(); ++i) {
        if (!reduced[i]) out.push_back(in.dims[i]);
      }
      return Shape(in.dtype, out);
    }
    case OpKind::kReshape: {
      CheckArity(kind, operands, 1);
      const auto& a = AttrsAs<ReshapeAttrs>(kind, attrs);
      CheckDims(a.dims);
      const Shape& in = operands[0];
      if (ElementCount(a.dims) != in.element_count()) {
        ShapeError(kind, in, Shape(in.dtype, a.dims));
      }
      return Shape(in.dtype, a.dims);
    }
    case OpKind::kPermute: {
      CheckArity(kind, operands, 1);
      const auto& a = AttrsAs<PermuteAttrs>(kind, attrs);
      const Shape& in = operands[0];
      if (static_cast<int64_t>(a.permutation.size()) != in.rank()) {
        Fail(ErrorCode::kInvalidAttrs, "permutation " + DimsToString(a.permutation) +
                                           " does not match " + in.ToString());
      }
      std::vector<bool> seen(in.rank(), false);
      Dims out;
      for (int64_t p : a.permutation) {
        if (p < 0 || p >= in.rank() || seen[p]) {
          Fail(ErrorCode::kInvalidAttrs,
               "invalid permutation " + DimsToString(a.permutation));
        }
        seen[p] = true;
        out.push_back(in.dims[p]);
      }
      return Shape(in.dtype, out);
    }
    case OpKind::kNarrow: {
      CheckArity(kind, operands, 1);
      const auto& a = AttrsAs<NarrowAttrs>(kind, attrs);
      const Shape& in = operands[0];
      if (a.dim < 0 || a.dim >= in.rank() || a.start < 0 || a.length < 0 ||
          a.start + a.length > in.dims[a.dim]) {
        Fail(ErrorCode::kInvalidAttrs,
             "narrow(dim=" + std::to_string(a.dim) + ", start=" +
                 std::to_string(a.start) + ", length=" + std::to_string(a.length) +
                 ") out of range for " + in.ToString());
      }
      Shape out = in;
      out.dims[a.dim] = a.length;
      return out;
    }
    case OpKind::kUpdateNarrow: {
      CheckArity(kind, operands, 2);
      const auto& a = AttrsAs<UpdateNarrowAttrs>(kind, attrs);
      const Shape& base = operands[0];
      const Shape& update = operands[1];
      if (base.dtype != update.dtype) {
        Fail(ErrorCode::kDTypeMismatch, std::string(OpName(kind)) + ": " +
                                            base.ToString() + " vs " +
                                            update.ToString());
      }
      if (a.dim < 0 || a.dim >= base.rank() || update.rank() != base.rank() ||
          a.start < 0) {
        ShapeError(kind, base, update);
      }
      for (int64_t i = 0; i < base.rank(); ++i) {
        if (i == a.dim) {
          if (a.start + update.dims[i] > base.dims[i]) ShapeError(kind, base, update);
        } else if (update.dims[i] != base.dims[i]) {
          ShapeError(kind, base, update);
        }
      }
      return base;
    }
  }
  Fail(ErrorCode::kUnknownOp, "unknown op kind");
}

IrGraph::IrGraph(Device device) : device_(device) {}

const IrNode& IrGraph::node(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    Fail(ErrorCode::kInvalidAttrs, "no node %" + std::to_string(id));
  }
  return nodes_[id];
}

NodeId IrGraph::RecordNode(OpKind kind, std::vector<NodeId> operands,
                           NodeAttrs attrs, DataPtr data) {
  std::vector<Shape> shapes;
  shapes.reserve(operands.size());
  for (NodeId id : operands) shapes.push_back(node(id).shape);
  if (kind == OpKind::kDeviceData) {
    const auto& a = AttrsAs<DeviceDataAttrs>(kind, attrs);
    if (a.device != device_) {
      Fail(ErrorCode::kDeviceMismatch, "device_data on " + a.device.ToString() +
                                           " recorded into a graph on " +
                                           device_.ToString());
    }
  }
  IrNode node;
  node.id = static_cast<NodeId>(nodes_.size());
  node.kind = kind;
  node.shape = InferShape(kind, shapes, attrs);
  node.operands = std::move(operands);
  node.attrs = std::move(attrs);
  node.data = std::move(data);
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

NodeId IrGraph::AddDeviceData(DataPtr data, bool dynamic_scalar) {
  DeviceDataAttrs attrs{data->device(), data->shape(), dynamic_scalar, std::nullopt};
  return RecordNode(OpKind::kDeviceData, {}, std::move(attrs), std::move(data));
}

NodeId IrGraph::AddConstant(double value, DType dtype) {
  return RecordNode(OpKind::kConstant, {}, ConstantAttrs{ConvertScalar(value, dtype), dtype});
}

double ConvertScalar(double value, DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return static_cast<double>(static_cast<float>(value));
    case DType::kI64:
      return static_cast<double>(static_cast<int64_t>(value));
    case DType::kPred:
      return value != 0 ? 1.0 : 0.0;
  }
  return value;
}

bool IsSpecialScalar(double value, DType dtype) {
  double converted = ConvertScalar(value, dtype);
  return std::bit_cast<uint64_t>(converted) == std::bit_cast<uint64_t>(0.0) ||
         std::bit_cast<uint64_t>(converted) == std::bit_cast<uint64_t>(1.0);
}

WrappedScalar WrapScalar(IrGraph& graph, double value, DType dtype) {
  double converted = ConvertScalar(value, dtype);
  if (IsSpecialScalar(converted, dtype)) {
    return {graph.AddConstant(converted, dtype), std::nullopt};
  }
  Storage storage = MakeStorage(dtype, 1);
  std::visit([&](auto& v) { v[0] = static_cast<typename std::decay_t<decltype(v)>::value_type>(converted); },
             storage);
  auto buffer = std::make_shared<Buffer>(Shape(dtype, {}), graph.device(),
                                         std::move(storage));
  NodeId id = graph.AddDeviceData(DataHandle::Ready(std::move(buffer)),
                                  /*dynamic_scalar=*/true);
  return {id, converted};
}

}  // namespace lt
