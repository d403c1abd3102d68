#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "segadv/tensor.hpp"

// Binary tensor container (.ten):
//
//   offset 0  magic "SEGT"
//          4  version (1)
//          5  dtype   (0 = float32, 1 = uint8, 2 = int32)
//          6  ndim
//          7  pad (0)
//          8  ndim x uint32 extents, little-endian
//          .. row-major payload, little-endian
namespace segadv::io {

enum class DType : std::uint8_t { Float32 = 0, UInt8 = 1, Int32 = 2 };

std::size_t dtype_size(DType t);

/// Type-erased container contents; payload is already little-endian.
struct StoredTensor {
  DType dtype = DType::Float32;
  std::vector<std::uint32_t> extents;
  std::vector<std::byte> payload;

  bool operator==(const StoredTensor&) const = default;
};

std::vector<std::byte> encode(const StoredTensor& t);
StoredTensor decode(std::span<const std::byte> bytes);

StoredTensor from_tensor(const Tensor& t);
StoredTensor from_labels(const LabelMap& labels);
StoredTensor from_bytes(std::vector<std::uint32_t> extents, std::span<const std::uint8_t> values);

Tensor to_tensor(const StoredTensor& t);
LabelMap to_labels(const StoredTensor& t);

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);
std::vector<std::byte> read_file(const std::filesystem::path& path);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
void write_labels(const std::filesystem::path& path, const LabelMap& labels);
Tensor read_tensor(const std::filesystem::path& path);
LabelMap read_labels(const std::filesystem::path& path);

}  // namespace segadv::io
