#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <span>
#include <variant>
#include <vector>

#include "lt/error.h"
#include "lt/types.h"

namespace lt {

// Row-major host storage. PRED elements are stored one byte each.
using Storage =
    std::variant<std::vector<float>, std::vector<int64_t>, std::vector<uint8_t>>;

Storage MakeStorage(DType dtype, int64_t count);
DType StorageDType(const Storage& storage);
int64_t StorageSize(const Storage& storage);

template <typename T>
struct DTypeOf;
template <>
struct DTypeOf<float> {
  static constexpr DType value = DType::kF32;
};
template <>
struct DTypeOf<int64_t> {
  static constexpr DType value = DType::kI64;
};
template <>
struct DTypeOf<uint8_t> {
  static constexpr DType value = DType::kPred;
};

// A materialized device value. Ids are process-unique and never reused, with
// one exception: an output written into a donated input keeps that input's id.
class Buffer {
 public:
  Buffer(Shape shape, Device device, Storage data);

  // Builds the output that took over a donated input's storage and identity.
  static std::shared_ptr<Buffer> Aliasing(int64_t id, Shape shape,
                                          Device device, Storage data);

  int64_t id() const { return id_; }
  const Shape& shape() const { return shape_; }
  DType dtype() const { return shape_.dtype; }
  Device device() const { return device_; }
  bool donated() const { return donated_; }

  template <typename T>
  std::span<const T> data() const {
    CheckLive();
    return std::get<std::vector<T>>(data_);
  }

  template <typename T>
  std::span<T> mutable_data() {
    CheckLive();
    return std::get<std::vector<T>>(data_);
  }

  const Storage& storage() const {
    CheckLive();
    return data_;
  }

  // Moves the storage out and marks the buffer donated; later reads fail.
  Storage Donate();

  // Moves the storage out of a dead temporary so the memory can be reused.
  Storage Release();

  uint64_t Checksum() const;
  bool BitwiseEqual(const Buffer& other) const;

 private:
  Buffer(int64_t id, Shape shape, Device device, Storage data);

  void CheckLive() const;

  int64_t id_;
  Shape shape_;
  Device device_;
  Storage data_;
  bool donated_ = false;
};

using BufferPtr = std::shared_ptr<Buffer>;

int64_t NextBufferId();

// Lossless host <-> buffer transfer.
BufferPtr AllocFromHost(const Dims& dims, Device device, Storage values);
Storage ReadToHost(const Buffer& buffer);

// Placeholder for a value that may still be in flight on the device executor.
// Readers block until the producer publishes a buffer or an error.
class DataHandle {
 public:
  DataHandle(Shape shape, Device device);

  static std::shared_ptr<DataHandle> Ready(BufferPtr buffer);

  const Shape& shape() const { return shape_; }
  Device device() const { return device_; }

  void Set(BufferPtr buffer);
  void SetError(std::exception_ptr error);

  bool ready() const;
  BufferPtr Get() const;

 private:
  Shape shape_;
  Device device_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  bool ready_ = false;
  BufferPtr buffer_;
  std::exception_ptr error_;
};

using DataPtr = std::shared_ptr<DataHandle>;

}  // namespace lt
