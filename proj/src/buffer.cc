#include "lt/buffer.h"

#include <atomic>
#include <cstring>

namespace lt {
namespace {

std::atomic<int64_t> g_next_buffer_id{1};

uint64_t Fnv1a(const void* data, size_t size, uint64_t hash) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace

int64_t NextBufferId() { return g_next_buffer_id.fetch_add(1); }

Storage MakeStorage(DType dtype, int64_t count) {
  switch (dtype) {
    case DType::kF32:
      return std::vector<float>(count);
    case DType::kI64:
      return std::vector<int64_t>(count);
    case DType::kPred:
      return std::vector<uint8_t>(count);
  }
  Fail(ErrorCode::kInternal, "bad dtype");
}

DType StorageDType(const Storage& storage) {
  return std::visit(
      [](const auto& v) {
        return DTypeOf<typename std::decay_t<decltype(v)>::value_type>::value;
      },
      storage);
}

int64_t StorageSize(const Storage& storage) {
  return std::visit([](const auto& v) { return static_cast<int64_t>(v.size()); },
                    storage);
}

Buffer::Buffer(Shape shape, Device device, Storage data)
    : Buffer(NextBufferId(), std::move(shape), device, std::move(data)) {}

Buffer::Buffer(int64_t id, Shape shape, Device device, Storage data)
    : id_(id), shape_(std::move(shape)), device_(device), data_(std::move(data)) {
  if (StorageDType(data_) != shape_.dtype) {
    Fail(ErrorCode::kDTypeMismatch, "storage does not match " + shape_.ToString());
  }
  if (StorageSize(data_) != shape_.element_count()) {
    Fail(ErrorCode::kLengthMismatch,
         std::to_string(StorageSize(data_)) + " values for shape " +
             shape_.ToString());
  }
}

std::shared_ptr<Buffer> Buffer::Aliasing(int64_t id, Shape shape, Device device,
                                         Storage data) {
  return std::shared_ptr<Buffer>(
      new Buffer(id, std::move(shape), device, std::move(data)));
}

void Buffer::CheckLive() const {
  if (donated_) {
    Fail(ErrorCode::kUseAfterDonation,
         "buffer " + std::to_string(id_) + " was donated to a computation");
  }
}

Storage Buffer::Donate() {
  CheckLive();
  donated_ = true;
  return std::move(data_);
}

Storage Buffer::Release() {
  CheckLive();
  donated_ = true;
  return std::move(data_);
}

uint64_t Buffer::Checksum() const {
  CheckLive();
  uint64_t hash = 0xcbf29ce484222325ULL;
  hash = Fnv1a(&shape_.dtype, sizeof(shape_.dtype), hash);
  for (int64_t d : shape_.dims) hash = Fnv1a(&d, sizeof(d), hash);
  std::visit(
      [&](const auto& v) {
        hash = Fnv1a(v.data(), v.size() * sizeof(v[0]), hash);
      },
      data_);
  return hash;
}

bool Buffer::BitwiseEqual(const Buffer& other) const {
  CheckLive();
  other.CheckLive();
  if (shape_ != other.shape_) return false;
  return std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        const auto& w = std::get<V>(other.data_);
        return std::memcmp(v.data(), w.data(), v.size() * sizeof(v[0])) == 0;
      },
      data_);
}

BufferPtr AllocFromHost(const Dims& dims, Device device, Storage values) {
  for (int64_t d : dims) {
    if (d < 0) Fail(ErrorCode::kInvalidAttrs, "negative dimension");
  }
  Shape shape(StorageDType(values), dims);
  if (StorageSize(values) != shape.element_count()) {
    Fail(ErrorCode::kLengthMismatch,
         std::to_string(StorageSize(values)) + " values for shape " +
             shape.ToString());
  }
  return std::make_shared<Buffer>(std::move(shape), device, std::move(values));
}

Storage ReadToHost(const Buffer& buffer) { return buffer.storage(); }

DataHandle::DataHandle(Shape shape, Device device)
    : shape_(std::move(shape)), device_(device) {}

std::shared_ptr<DataHandle> DataHandle::Ready(BufferPtr buffer) {
  auto handle = std::make_shared<DataHandle>(buffer->shape(), buffer->device());
  handle->Set(std::move(buffer));
  return handle;
}

void DataHandle::Set(BufferPtr buffer) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    buffer_ = std::move(buffer);
    ready_ = true;
  }
  cv_.notify_all();
}

void DataHandle::SetError(std::exception_ptr error) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    error_ = std::move(error);
    ready_ = true;
  }
  cv_.notify_all();
}

bool DataHandle::ready() const {
  std::lock_guard<std::mutex> lock(mu_);
  return ready_;
}

BufferPtr DataHandle::Get() const {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [this] { return ready_; });
  if (error_) std::rethrow_exception(error_);
  return buffer_;
}

}  // namespace lt
