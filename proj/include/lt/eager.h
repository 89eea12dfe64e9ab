#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

#include "lt/buffer.h"
#include "lt/ir.h"

namespace lt {

using Kernel = std::function<BufferPtr(std::span<const BufferPtr>, const NodeAttrs&)>;

// Reference CPU kernels, one per OpKind. Kernels never write their inputs.
class KernelRegistry {
 public:
  static KernelRegistry& Get();

  BufferPtr Dispatch(OpKind kind, std::span<const BufferPtr> inputs,
                     const NodeAttrs& attrs);

  bool HasKernel(OpKind kind) const;
  int64_t dispatch_count(OpKind kind) const;
  int64_t eager_only_count() const { return eager_only_count_.load(); }

  BufferPtr DispatchEagerOnly(std::string_view name,
                              std::span<const BufferPtr> inputs, int64_t dim);

 private:
  KernelRegistry();

  std::array<Kernel, kAllOpKinds.size()> kernels_;
  std::array<std::atomic<int64_t>, kAllOpKinds.size()> counts_{};
  std::atomic<int64_t> eager_only_count_{0};
};

BufferPtr Dispatch(OpKind kind, std::span<const BufferPtr> inputs,
                   const NodeAttrs& attrs = {});

// Ops without a compiler lowering: "argsort" (stable, ascending along `dim`,
// NaN last) and "nonzero_count" (rank-0 i64). Unknown names raise UnknownOp.
BufferPtr ExtraEagerOnly(std::string_view name, std::span<const BufferPtr> inputs,
                         int64_t dim = -1);

bool IsEagerOnlyOp(std::string_view name);

// Deterministic standard normals keyed by (seed, element index).
BufferPtr RandnBuffer(const Dims& dims, Device device, uint64_t seed);
BufferPtr FullBuffer(const Dims& dims, Device device, double value, DType dtype);
// Row-major element indices 0..n-1 as i64.
BufferPtr IotaBuffer(const Dims& dims, Device device);

}  // namespace lt
