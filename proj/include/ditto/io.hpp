/// File I/O helpers: atomic writes, raw little-endian float32 payloads,
/// FNV-1a checksums.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ditto/tensor.hpp"

namespace ditto {

/// 64-bit FNV-1a over a byte range.
std::uint64_t fnv1a(const void* data, std::size_t nbytes);

/// Write `contents` to `path` atomically (temp file in the same directory,
/// then rename). Parent directories are created on demand.
void atomic_write(const std::filesystem::path& path, const std::string& contents);
void atomic_write(const std::filesystem::path& path, const std::vector<std::byte>& contents);

std::string read_text(const std::filesystem::path& path);
std::vector<std::byte> read_bytes(const std::filesystem::path& path);

/// Serialize a tensor as IEEE-754 little-endian float32, row-major.
std::vector<std::byte> tensor_to_f32(const Tensor& t);

/// Inverse of tensor_to_f32; byte count must equal 4 * product(shape).
Tensor tensor_from_f32(const std::vector<std::byte>& bytes,
                       const std::vector<std::size_t>& shape);

}  // namespace ditto
