#pragma once

#include "btd/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace btd::io {

// Malformed or truncated input; `offset` is the byte position where parsing
// failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

inline constexpr std::uint32_t kBt3dVersion = 1;
inline constexpr std::uint32_t kBmatVersion = 1;

// "BT3D" | u32 version | u32 I | u32 J | u32 K | I*J*K f64, little-endian.
std::vector<std::uint8_t> encode_bt3d(const Tensor3& t);
Tensor3 decode_bt3d(const std::vector<std::uint8_t>& bytes);

// "BMAT" | u32 version | u32 rows | u32 cols | rows*cols f64 column-major.
std::vector<std::uint8_t> encode_bmat(const Matrix& m);
Matrix decode_bmat(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text);

Tensor3 read_bt3d(const std::filesystem::path& path);
void write_bt3d(const std::filesystem::path& path, const Tensor3& t);
Matrix read_bmat(const std::filesystem::path& path);
void write_bmat(const std::filesystem::path& path, const Matrix& m);

}  // namespace btd::io
