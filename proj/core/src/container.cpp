#include "segadv/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "segadv/errors.hpp"

namespace segadv::io {
namespace {

constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderSize = 8;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::byte>((v >> (8 * k)) & 0xffu));
}

std::uint32_t get_u32(std::span<const std::byte> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= std::to_integer<std::uint32_t>(in[off + k]) << (8 * k);
  return v;
}

// Copies 4-byte words into a little-endian byte stream.
template <class T>
std::vector<std::byte> pack_words(std::span<const T> values) {
  static_assert(sizeof(T) == 4);
  std::vector<std::byte> out;
  out.reserve(values.size() * 4);
  for (T v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

template <class T>
std::vector<T> unpack_words(std::span<const std::byte> payload) {
  std::vector<T> out(payload.size() / 4);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::bit_cast<T>(get_u32(payload, 4 * k));
  return out;
}

std::size_t element_count(const std::vector<std::uint32_t>& extents) {
  std::size_t n = 1;
  for (auto e : extents) n *= e;
  return n;
}

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::Float32:
    case DType::Int32:
      return 4;
    case DType::UInt8:
      return 1;
  }
  throw InputError("unknown tensor dtype " + std::to_string(static_cast<int>(t)));
}

std::vector<std::byte> encode(const StoredTensor& t) {
  if (t.extents.size() > 255) throw InputError("tensor rank exceeds container limit");
  if (t.payload.size() != element_count(t.extents) * dtype_size(t.dtype)) {
    throw InputError("tensor payload size does not match its extents");
  }
  std::vector<std::byte> out;
  out.reserve(kHeaderSize + 4 * t.extents.size() + t.payload.size());
  for (char c : {'S', 'E', 'G', 'T'}) out.push_back(static_cast<std::byte>(c));
  out.push_back(static_cast<std::byte>(kVersion));
  out.push_back(static_cast<std::byte>(t.dtype));
  out.push_back(static_cast<std::byte>(t.extents.size()));
  out.push_back(std::byte{0});
  for (auto e : t.extents) put_u32(out, e);
  out.insert(out.end(), t.payload.begin(), t.payload.end());
  return out;
}

StoredTensor decode(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderSize) throw InputError("tensor container truncated header");
  if (std::memcmp(bytes.data(), "SEGT", 4) != 0) throw InputError("tensor container has bad magic");
  const auto version = std::to_integer<std::uint8_t>(bytes[4]);
  if (version != kVersion) throw InputError("unsupported tensor container version " + std::to_string(version));
  const auto dtype_byte = std::to_integer<std::uint8_t>(bytes[5]);
  if (dtype_byte > 2) throw InputError("unknown tensor dtype " + std::to_string(dtype_byte));

  StoredTensor t;
  t.dtype = static_cast<DType>(dtype_byte);
  const std::size_t ndim = std::to_integer<std::uint8_t>(bytes[6]);
  if (bytes.size() < kHeaderSize + 4 * ndim) throw InputError("tensor container truncated extents");
  for (std::size_t k = 0; k < ndim; ++k) t.extents.push_back(get_u32(bytes, kHeaderSize + 4 * k));

  const std::size_t offset = kHeaderSize + 4 * ndim;
  const std::size_t expected = element_count(t.extents) * dtype_size(t.dtype);
  if (bytes.size() - offset != expected) {
    throw InputError("tensor container payload is " + std::to_string(bytes.size() - offset) + " bytes, expected " +
                     std::to_string(expected));
  }
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return t;
}

StoredTensor from_tensor(const Tensor& t) {
  StoredTensor s;
  s.dtype = DType::Float32;
  for (auto d : t.dims()) s.extents.push_back(static_cast<std::uint32_t>(d));
  s.payload = pack_words<float>(t.values());
  return s;
}

StoredTensor from_labels(const LabelMap& labels) {
  StoredTensor s;
  s.dtype = DType::Int32;
  s.extents = {static_cast<std::uint32_t>(labels.height()), static_cast<std::uint32_t>(labels.width())};
  s.payload = pack_words<std::int32_t>(labels.ids());
  return s;
}

StoredTensor from_bytes(std::vector<std::uint32_t> extents, std::span<const std::uint8_t> values) {
  StoredTensor s;
  s.dtype = DType::UInt8;
  s.extents = std::move(extents);
  s.payload.resize(values.size());
  std::memcpy(s.payload.data(), values.data(), values.size());
  return s;
}

Tensor to_tensor(const StoredTensor& t) {
  if (t.dtype != DType::Float32) throw InputError("expected a float32 tensor");
  Shape dims(t.extents.begin(), t.extents.end());
  return Tensor(std::move(dims), unpack_words<float>(t.payload));
}

LabelMap to_labels(const StoredTensor& t) {
  if (t.dtype != DType::Int32 || t.extents.size() != 2) throw InputError("expected a rank-2 int32 label map");
  return LabelMap(t.extents[0], t.extents[1], unpack_words<std::int32_t>(t.payload));
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(is.tellg());
  is.seekg(0);
  std::vector<std::byte> bytes(size);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!is) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode(from_tensor(t))); }

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
  write_file(path, encode(from_labels(labels)));
}

Tensor read_tensor(const std::filesystem::path& path) { return to_tensor(decode(read_file(path))); }

LabelMap read_labels(const std::filesystem::path& path) { return to_labels(decode(read_file(path))); }

}  // namespace segadv::io
