#pragma once

#include "texbank/types.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string_view>

namespace texbank::detail {

/// Little-endian primitive writer over an ostream.
class BinaryWriter {
public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* data, std::size_t n);
  void string(std::string_view s);
  void matrix(const Matrix& m);
  void vector(const Vector& v);

private:
  std::ostream& out_;
};

/// Little-endian reader; every short read throws FormatError.
class BinaryReader {
public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void bytes(void* data, std::size_t n);
  std::string string();
  Matrix matrix();
  Vector vector();
  /// True when no bytes remain.
  bool at_end();

private:
  std::istream& in_;
};

/// Writes through a temporary file in the same directory, then renames.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& body);

}  // namespace texbank::detail
