#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lt/buffer.h"
#include "lt/runtime.h"
#include "lt/types.h"

namespace lt {

// Eager-looking tensor handle. Operations record into the device's open graph
// (lazy mode) or dispatch immediately (eager mode); copies of a handle refer to
// the same tensor.
class LazyTensor {
 public:
  LazyTensor() = default;
  explicit LazyTensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  bool defined() const { return impl_ != nullptr; }
  int64_t uid() const { return impl().uid; }
  Device device() const { return impl().device; }
  const Shape& shape() const { return impl().shape; }
  DType dtype() const { return impl().shape.dtype; }
  const Dims& dims() const { return impl().shape.dims; }
  bool is_view() const { return impl().view.has_value(); }
  // True when the tensor has a pending computation in the open graph.
  bool is_pending() const;

  TensorImpl& impl() const;
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

  // In-place updates: the tensor keeps its uid and takes the new value.
  LazyTensor& add_(const LazyTensor& rhs, std::optional<double> alpha = std::nullopt);
  LazyTensor& add_(double rhs);
  LazyTensor& sub_(const LazyTensor& rhs);
  LazyTensor& sub_(double rhs);
  LazyTensor& mul_(const LazyTensor& rhs);
  LazyTensor& mul_(double rhs);
  LazyTensor& assign_(const LazyTensor& rhs);
  LazyTensor& assign_(double rhs);

  LazyTensor& operator+=(const LazyTensor& rhs) { return add_(rhs); }
  LazyTensor& operator+=(double rhs) { return add_(rhs); }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

LazyTensor FromHost(Storage values, const Dims& dims, Device device = Device{});
LazyTensor Full(const Dims& dims, double value, Device device = Device{},
                DType dtype = DType::kF32);
LazyTensor Randn(const Dims& dims, uint64_t seed, Device device = Device{});

// With alpha, b is scaled first: a + alpha * b.
LazyTensor Add(const LazyTensor& a, const LazyTensor& b,
               std::optional<double> alpha = std::nullopt);
LazyTensor Sub(const LazyTensor& a, const LazyTensor& b,
               std::optional<double> alpha = std::nullopt);
LazyTensor Mul(const LazyTensor& a, const LazyTensor& b);
LazyTensor Div(const LazyTensor& a, const LazyTensor& b);
LazyTensor Maximum(const LazyTensor& a, const LazyTensor& b);

// Scalar right-hand sides go through WrapScalar and an explicit expand.
LazyTensor Add(const LazyTensor& a, double b);
LazyTensor Sub(const LazyTensor& a, double b);
LazyTensor Mul(const LazyTensor& a, double b);
LazyTensor Div(const LazyTensor& a, double b);
LazyTensor Maximum(const LazyTensor& a, double b);

LazyTensor Neg(const LazyTensor& a);
LazyTensor Relu(const LazyTensor& a);
LazyTensor MatMul(const LazyTensor& a, const LazyTensor& b);
LazyTensor Sum(const LazyTensor& a, std::vector<int64_t> dims);
LazyTensor SumAll(const LazyTensor& a);
LazyTensor Expand(const LazyTensor& a, const Dims& dims);

// Views share storage semantics with their base.
LazyTensor View(const LazyTensor& t, const Dims& dims);
LazyTensor Permute(const LazyTensor& t, std::vector<int64_t> permutation);
LazyTensor Narrow(const LazyTensor& t, int64_t dim, int64_t start, int64_t length);

// Ops with no compiler lowering: inputs are materialized and the eager kernel
// runs directly.
LazyTensor Argsort(const LazyTensor& t, int64_t dim = -1);
LazyTensor NonzeroCount(const LazyTensor& t);
LazyTensor FallbackOp(std::string_view name, const LazyTensor& t, int64_t dim = -1);

// IR-incompatible accessors; each forces t's computation.
Storage ToHost(const LazyTensor& t);
double Item(const LazyTensor& t);
std::string ToString(const LazyTensor& t);
// Materialized buffer of t (forces computation).
BufferPtr GetBuffer(const LazyTensor& t);

void SyncTensor(const LazyTensor& t);

}  // namespace lt
