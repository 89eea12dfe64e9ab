#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lt/buffer.h"
#include "lt/types.h"

namespace lt {

enum class OpKind : uint8_t {
  kDeviceData,
  kConstant,
  kExpand,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kRelu,
  kMax,
  kMatMul,
  kReduceSum,
  kReshape,
  kPermute,
  kNarrow,
  kUpdateNarrow,
};

inline constexpr std::array<OpKind, 16> kAllOpKinds = {
    OpKind::kDeviceData, OpKind::kConstant, OpKind::kExpand,
    OpKind::kAdd,        OpKind::kSub,      OpKind::kMul,
    OpKind::kDiv,        OpKind::kNeg,      OpKind::kRelu,
    OpKind::kMax,        OpKind::kMatMul,   OpKind::kReduceSum,
    OpKind::kReshape,    OpKind::kPermute,  OpKind::kNarrow,
    OpKind::kUpdateNarrow};

// Name used in the textual IR ("multiply", "device_data", ...).
const char* OpName(OpKind kind);

bool IsBinaryElementwise(OpKind kind);
bool IsUnaryElementwise(OpKind kind);
bool IsElementwise(OpKind kind);
// Reshape, Permute and Narrow: the kinds a view may be built from.
bool IsViewOp(OpKind kind);

struct DeviceDataAttrs {
  Device device;
  Shape shape;
  bool dynamic_scalar = false;
  // Position in the canonical parameter order. Assigned when a graph is
  // snapshotted for compilation; never part of the cache key.
  std::optional<int> param_slot;

  bool operator==(const DeviceDataAttrs&) const = default;
};

struct ConstantAttrs {
  double value = 0;
  DType dtype = DType::kF32;

  bool operator==(const ConstantAttrs&) const = default;
};

struct ExpandAttrs {
  Dims target_dims;
  bool operator==(const ExpandAttrs&) const = default;
};

struct ReshapeAttrs {
  Dims dims;
  bool operator==(const ReshapeAttrs&) const = default;
};

struct PermuteAttrs {
  std::vector<int64_t> permutation;
  bool operator==(const PermuteAttrs&) const = default;
};

struct NarrowAttrs {
  int64_t dim = 0;
  int64_t start = 0;
  int64_t length = 0;
  bool operator==(const NarrowAttrs&) const = default;
};

struct UpdateNarrowAttrs {
  int64_t dim = 0;
  int64_t start = 0;
  bool operator==(const UpdateNarrowAttrs&) const = default;
};

struct ReduceSumAttrs {
  std::vector<int64_t> dims;
  bool operator==(const ReduceSumAttrs&) const = default;
};

using NodeAttrs =
    std::variant<std::monostate, DeviceDataAttrs, ConstantAttrs, ExpandAttrs,
                 ReshapeAttrs, PermuteAttrs, NarrowAttrs, UpdateNarrowAttrs,
                 ReduceSumAttrs>;

using NodeId = int64_t;

struct IrNode {
  NodeId id = 0;
  OpKind kind = OpKind::kConstant;
  std::vector<NodeId> operands;
  Shape shape;
  NodeAttrs attrs;
  // Bound value of a DeviceData leaf. Not structural.
  DataPtr data;
};

// Append-only DAG of IR nodes. Operands always refer to earlier nodes, so the
// graph is acyclic by construction.
class IrGraph {
 public:
  explicit IrGraph(Device device = Device{});

  Device device() const { return device_; }
  size_t size() const { return nodes_.size(); }
  const IrNode& node(NodeId id) const;
  const std::vector<IrNode>& nodes() const { return nodes_; }

  NodeId RecordNode(OpKind kind, std::vector<NodeId> operands, NodeAttrs attrs,
                    DataPtr data = nullptr);

  NodeId AddDeviceData(DataPtr data, bool dynamic_scalar = false);
  NodeId AddConstant(double value, DType dtype);

 private:
  Device device_;
  std::vector<IrNode> nodes_;
};

Shape InferShape(OpKind kind, std::span<const Shape> operands,
                 const NodeAttrs& attrs);

// 0 and 1 (bitwise +0.0 and 1.0 after conversion to the dtype) are embedded in
// the graph; every other scalar becomes a rank-0 dynamic parameter.
bool IsSpecialScalar(double value, DType dtype);

// Rounds a host scalar to what the dtype can represent.
double ConvertScalar(double value, DType dtype);

struct WrappedScalar {
  NodeId node;
  std::optional<double> binding;
};

WrappedScalar WrapScalar(IrGraph& graph, double value, DType dtype);

std::vector<int64_t> InversePermutation(std::span<const int64_t> permutation);

}  // namespace lt
