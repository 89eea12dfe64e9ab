#include "lt/eager.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lt/elementwise.h"
#include "lt/error.h"

namespace lt {
namespace {

Dims Strides(const Dims& dims) {
  Dims strides(dims.size(), 1);
  for (int64_t i = static_cast<int64_t>(dims.size()) - 2; i >= 0; --i) {
    strides[i] = strides[i + 1] * dims[i + 1];
  }
  return strides;
}

// Calls fn with a typed tag for the buffer's element type.
template <typename Fn>
decltype(auto) VisitDType(DType dtype, Fn&& fn) {
  switch (dtype) {
    case DType::kF32:
      return fn(float{});
    case DType::kI64:
      return fn(int64_t{});
    case DType::kPred:
      return fn(uint8_t{});
  }
  Fail(ErrorCode::kInternal, "bad dtype");
}

template <typename Fn>
decltype(auto) VisitArithmetic(DType dtype, Fn&& fn) {
  switch (dtype) {
    case DType::kF32:
      return fn(float{});
    case DType::kI64:
      return fn(int64_t{});
    case DType::kPred:
      break;
  }
  Fail(ErrorCode::kDTypeMismatch, "arithmetic on pred");
}

BufferPtr NewBuffer(const Shape& shape, Device device) {
  return std::make_shared<Buffer>(shape, device,
                                  MakeStorage(shape.dtype, shape.element_count()));
}

BufferPtr CopyKernel(const Buffer& in, const Shape& out_shape) {
  return std::make_shared<Buffer>(out_shape, in.device(), in.storage());
}

BufferPtr ConstantKernel(const ConstantAttrs& attrs, Device device) {
  auto out = NewBuffer(Shape(attrs.dtype, {}), device);
  VisitDType(attrs.dtype, [&](auto tag) {
    using T = decltype(tag);
    out->mutable_data<T>()[0] = static_cast<T>(attrs.value);
  });
  return out;
}

BufferPtr ExpandKernel(const Buffer& in, const Shape& out_shape) {
  if (in.shape().rank() != 0) return CopyKernel(in, out_shape);
  auto out = NewBuffer(out_shape, in.device());
  VisitDType(in.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto dst = out->mutable_data<T>();
    std::fill(dst.begin(), dst.end(), in.data<T>()[0]);
  });
  return out;
}

BufferPtr BinaryKernel(OpKind kind, const Buffer& a, const Buffer& b,
                       const Shape& out_shape) {
  auto out = NewBuffer(out_shape, a.device());
  VisitArithmetic(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = a.data<T>();
    auto y = b.data<T>();
    auto dst = out->mutable_data<T>();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] = ApplyBinary<T>(kind, x[i], y[i]);
  });
  return out;
}

BufferPtr UnaryKernel(OpKind kind, const Buffer& a, const Shape& out_shape) {
  auto out = NewBuffer(out_shape, a.device());
  VisitArithmetic(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = a.data<T>();
    auto dst = out->mutable_data<T>();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] = ApplyUnary<T>(kind, x[i]);
  });
  return out;
}

BufferPtr MatMulKernel(const Buffer& a, const Buffer& b, const Shape& out_shape) {
  auto out = NewBuffer(out_shape, a.device());
  const int64_t m = a.shape().dims[0];
  const int64_t k = a.shape().dims[1];
  const int64_t n = b.shape().dims[1];
  VisitArithmetic(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = a.data<T>();
    auto y = b.data<T>();
    auto dst = out->mutable_data<T>();
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < n; ++j) {
        T acc = T(0);
        for (int64_t p = 0; p < k; ++p) {
          acc = ApplyBinary<T>(OpKind::kAdd, acc,
                               ApplyBinary<T>(OpKind::kMul, x[i * k + p], y[p * n + j]));
        }
        dst[i * n + j] = acc;
      }
    }
  });
  return out;
}

BufferPtr ReduceSumKernel(const Buffer& in, const ReduceSumAttrs& attrs,
                          const Shape& out_shape) {
  auto out = NewBuffer(out_shape, in.device());
  const Dims& dims = in.shape().dims;
  std::vector<bool> reduced(dims.size(), false);
  for (int64_t d : attrs.dims) reduced[d] = true;
  // Output stride contributed by each input dimension (0 when reduced).
  Dims out_strides = Strides(out_shape.dims);
  Dims contrib(dims.size(), 0);
  for (size_t i = 0, o = 0; i < dims.size(); ++i) {
    if (!reduced[i]) contrib[i] = out_strides[o++];
  }
  VisitArithmetic(in.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = in.data<T>();
    auto dst = out->mutable_data<T>();
    std::fill(dst.begin(), dst.end(), T(0));
    std::vector<int64_t> idx(dims.size(), 0);
    int64_t out_offset = 0;
    for (size_t flat = 0; flat < x.size(); ++flat) {
      dst[out_offset] = ApplyBinary<T>(OpKind::kAdd, dst[out_offset], x[flat]);
      for (int64_t d = static_cast<int64_t>(dims.size()) - 1; d >= 0; --d) {
        if (++idx[d] < dims[d]) {
          out_offset += contrib[d];
          break;
        }
        out_offset -= contrib[d] * (dims[d] - 1);
        idx[d] = 0;
      }
    }
  });
  return out;
}

// Copies the strided window `in[offset + sum(idx[d] * strides[d])]` for all
// idx < out dims into a fresh row-major buffer.
template <typename T>
void StridedGather(std::span<const T> in, int64_t offset, const Dims& out_dims,
                   const Dims& in_strides, std::span<T> out) {
  if (out.empty()) return;
  std::vector<int64_t> idx(out_dims.size(), 0);
  int64_t src = offset;
  for (size_t flat = 0; flat < out.size(); ++flat) {
    out[flat] = in[src];
    for (int64_t d = static_cast<int64_t>(out_dims.size()) - 1; d >= 0; --d) {
      if (++idx[d] < out_dims[d]) {
        src += in_strides[d];
        break;
      }
      src -= in_strides[d] * (out_dims[d] - 1);
      idx[d] = 0;
    }
  }
}

BufferPtr PermuteKernel(const Buffer& in, const PermuteAttrs& attrs,
                        const Shape& out_shape) {
  auto out = NewBuffer(out_shape, in.device());
  Dims in_strides = Strides(in.shape().dims);
  Dims strides(attrs.permutation.size());
  for (size_t i = 0; i < strides.size(); ++i) strides[i] = in_strides[attrs.permutation[i]];
  VisitDType(in.dtype(), [&](auto tag) {
    using T = decltype(tag);
    StridedGather<T>(in.data<T>(), 0, out_shape.dims, strides, out->mutable_data<T>());
  });
  return out;
}

BufferPtr NarrowKernel(const Buffer& in, const NarrowAttrs& attrs,
                       const Shape& out_shape) {
  auto out = NewBuffer(out_shape, in.device());
  Dims strides = Strides(in.shape().dims);
  VisitDType(in.dtype(), [&](auto tag) {
    using T = decltype(tag);
    StridedGather<T>(in.data<T>(), attrs.start * strides[attrs.dim], out_shape.dims,
                     strides, out->mutable_data<T>());
  });
  return out;
}

BufferPtr UpdateNarrowKernel(const Buffer& base, const Buffer& update,
                             const UpdateNarrowAttrs& attrs, const Shape& out_shape) {
  auto out = CopyKernel(base, out_shape);
  Dims strides = Strides(base.shape().dims);
  const Dims& upd_dims = update.shape().dims;
  VisitDType(base.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto src = update.data<T>();
    auto dst = out->mutable_data<T>();
    if (src.empty()) return;
    std::vector<int64_t> idx(upd_dims.size(), 0);
    int64_t pos = attrs.start * strides[attrs.dim];
    for (size_t flat = 0; flat < src.size(); ++flat) {
      dst[pos] = src[flat];
      for (int64_t d = static_cast<int64_t>(upd_dims.size()) - 1; d >= 0; --d) {
        if (++idx[d] < upd_dims[d]) {
          pos += strides[d];
          break;
        }
        pos -= strides[d] * (upd_dims[d] - 1);
        idx[d] = 0;
      }
    }
  });
  return out;
}

Shape InferFromBuffers(OpKind kind, std::span<const BufferPtr> inputs,
                       const NodeAttrs& attrs) {
  std::vector<Shape> shapes;
  shapes.reserve(inputs.size());
  for (const auto& b : inputs) shapes.push_back(b->shape());
  return InferShape(kind, shapes, attrs);
}

template <typename T>
bool SortLess(T a, T b) {
  if constexpr (std::is_same_v<T, float>) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
  }
  return a < b;
}

BufferPtr ArgsortKernel(const Buffer& in, int64_t dim) {
  const Dims& dims = in.shape().dims;
  auto out = NewBuffer(Shape(DType::kI64, dims), in.device());
  auto dst = out->mutable_data<int64_t>();
  if (dims.empty()) {
    dst[0] = 0;
    return out;
  }
  const int64_t rank = static_cast<int64_t>(dims.size());
  if (dim < 0) dim += rank;
  if (dim < 0 || dim >= rank) {
    Fail(ErrorCode::kInvalidAttrs, "argsort dim out of range for " + in.shape().ToString());
  }
  Dims strides = Strides(dims);
  const int64_t len = dims[dim];
  const int64_t stride = strides[dim];
  const int64_t total = in.shape().element_count();
  VisitDType(in.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = in.data<T>();
    std::vector<int64_t> order(len);
    for (int64_t base = 0; base < total; ++base) {
      // Each line along `dim` starts where the index along `dim` is zero.
      if ((base / stride) % len != 0) continue;
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return SortLess<T>(x[base + a * stride], x[base + b * stride]);
      });
      for (int64_t i = 0; i < len; ++i) dst[base + i * stride] = order[i];
    }
  });
  return out;
}

BufferPtr NonzeroCountKernel(const Buffer& in) {
  auto out = NewBuffer(Shape(DType::kI64, {}), in.device());
  int64_t count = 0;
  VisitDType(in.dtype(), [&](auto tag) {
    using T = decltype(tag);
    for (T v : in.data<T>()) {
      if (!(v == T(0))) ++count;
    }
  });
  out->mutable_data<int64_t>()[0] = count;
  return out;
}

uint64_t SplitMix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

KernelRegistry& KernelRegistry::Get() {
  static KernelRegistry* registry = new KernelRegistry();
  return *registry;
}

KernelRegistry::KernelRegistry() {
  auto set = [&](OpKind kind, Kernel kernel) {
    kernels_[static_cast<size_t>(kind)] = std::move(kernel);
  };
  set(OpKind::kDeviceData, [](std::span<const BufferPtr> in, const NodeAttrs&) {
    if (in.size() != 1) Fail(ErrorCode::kArityMismatch, "device_data takes its bound buffer");
    return CopyKernel(*in[0], in[0]->shape());
  });
  set(OpKind::kConstant, [](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
    InferShape(OpKind::kConstant, {}, attrs);
    (void)in;
    return ConstantKernel(std::get<ConstantAttrs>(attrs), Device{});
  });
  set(OpKind::kExpand, [](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
    return ExpandKernel(*in[0], InferFromBuffers(OpKind::kExpand, in, attrs));
  });
  for (OpKind kind : {OpKind::kAdd, OpKind::kSub, OpKind::kMul, OpKind::kDiv, OpKind::kMax}) {
    set(kind, [kind](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
      Shape out = InferFromBuffers(kind, in, attrs);
      return BinaryKernel(kind, *in[0], *in[1], out);
    });
  }
  for (OpKind kind : {OpKind::kNeg, OpKind::kRelu}) {
    set(kind, [kind](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
      return UnaryKernel(kind, *in[0], InferFromBuffers(kind, in, attrs));
    });
  }
  set(OpKind::kMatMul, [](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
    return MatMulKernel(*in[0], *in[1], InferFromBuffers(OpKind::kMatMul, in, attrs));
  });
  set(OpKind::kReduceSum, [](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
    Shape out = InferFromBuffers(OpKind::kReduceSum, in, attrs);
    return ReduceSumKernel(*in[0], std::get<ReduceSumAttrs>(attrs), out);
  });
  set(OpKind::kReshape, [](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
    return CopyKernel(*in[0], InferFromBuffers(OpKind::kReshape, in, attrs));
  });
  set(OpKind::kPermute, [](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
    Shape out = InferFromBuffers(OpKind::kPermute, in, attrs);
    return PermuteKernel(*in[0], std::get<PermuteAttrs>(attrs), out);
  });
  set(OpKind::kNarrow, [](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
    Shape out = InferFromBuffers(OpKind::kNarrow, in, attrs);
    return NarrowKernel(*in[0], std::get<NarrowAttrs>(attrs), out);
  });
  set(OpKind::kUpdateNarrow, [](std::span<const BufferPtr> in, const NodeAttrs& attrs) {
    Shape out = InferFromBuffers(OpKind::kUpdateNarrow, in, attrs);
    return UpdateNarrowKernel(*in[0], *in[1], std::get<UpdateNarrowAttrs>(attrs), out);
  });
}

bool KernelRegistry::HasKernel(OpKind kind) const {
  return static_cast<bool>(kernels_[static_cast<size_t>(kind)]);
}

int64_t KernelRegistry::dispatch_count(OpKind kind) const {
  return counts_[static_cast<size_t>(kind)].load();
}

BufferPtr KernelRegistry::Dispatch(OpKind kind, std::span<const BufferPtr> inputs,
                                   const NodeAttrs& attrs) {
  const Kernel& kernel = kernels_[static_cast<size_t>(kind)];
  if (!kernel) Fail(ErrorCode::kUnknownOp, std::string("no kernel for ") + OpName(kind));
  for (const auto& in : inputs) {
    if (!in) Fail(ErrorCode::kInternal, "null input buffer");
  }
  BufferPtr out = kernel(inputs, attrs);
  counts_[static_cast<size_t>(kind)].fetch_add(1);
  if (!inputs.empty() && out->device() != inputs[0]->device()) {
    out = std::make_shared<Buffer>(out->shape(), inputs[0]->device(), out->storage());
  }
  return out;
}

BufferPtr KernelRegistry::DispatchEagerOnly(std::string_view name,
                                            std::span<const BufferPtr> inputs,
                                            int64_t dim) {
  if (!IsEagerOnlyOp(name)) {
    Fail(ErrorCode::kUnknownOp, "no eager implementation of '" + std::string(name) + "'");
  }
  if (inputs.size() != 1 || !inputs[0]) {
    Fail(ErrorCode::kArityMismatch, std::string(name) + " takes one input");
  }
  BufferPtr out = name == "argsort" ? ArgsortKernel(*inputs[0], dim)
                                    : NonzeroCountKernel(*inputs[0]);
  eager_only_count_.fetch_add(1);
  return out;
}

bool IsEagerOnlyOp(std::string_view name) {
  return name == "argsort" || name == "nonzero_count";
}

BufferPtr Dispatch(OpKind kind, std::span<const BufferPtr> inputs,
                   const NodeAttrs& attrs) {
  return KernelRegistry::Get().Dispatch(kind, inputs, attrs);
}

BufferPtr ExtraEagerOnly(std::string_view name, std::span<const BufferPtr> inputs,
                         int64_t dim) {
  return KernelRegistry::Get().DispatchEagerOnly(name, inputs, dim);
}

BufferPtr RandnBuffer(const Dims& dims, Device device, uint64_t seed) {
  auto out = NewBuffer(Shape(DType::kF32, dims), device);
  auto dst = out->mutable_data<float>();
  const uint64_t key = SplitMix(seed);
  for (size_t i = 0; i < dst.size(); ++i) {
    uint64_t r1 = SplitMix(key ^ (2 * i));
    uint64_t r2 = SplitMix(key ^ (2 * i + 1));
    double u1 = (static_cast<double>(r1 >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(r2 >> 11) * 0x1.0p-53;
    dst[i] = static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                                std::cos(2.0 * 3.14159265358979323846 * u2));
  }
  return out;
}

BufferPtr FullBuffer(const Dims& dims, Device device, double value, DType dtype) {
  auto out = NewBuffer(Shape(dtype, dims), device);
  VisitDType(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto dst = out->mutable_data<T>();
    std::fill(dst.begin(), dst.end(), static_cast<T>(ConvertScalar(value, dtype)));
  });
  return out;
}

BufferPtr IotaBuffer(const Dims& dims, Device device) {
  auto out = NewBuffer(Shape(DType::kI64, dims), device);
  auto dst = out->mutable_data<int64_t>();
  std::iota(dst.begin(), dst.end(), int64_t{0});
  return out;
}

}  // namespace lt
