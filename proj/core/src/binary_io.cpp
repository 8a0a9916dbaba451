#include "binary_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>

namespace texbank::detail {

void BinaryWriter::magic(std::string_view tag) { bytes(tag.data(), tag.size()); }

void BinaryWriter::u32(std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b.data(), b.size());
}

void BinaryWriter::u64(std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b.data(), b.size());
}

void BinaryWriter::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw Error("write failed");
}

void BinaryWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void BinaryWriter::matrix(const Matrix& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) f64(m(i, j));
}

void BinaryWriter::vector(const Vector& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) f64(v[i]);
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  bytes(got.data(), got.size());
  if (got != tag) throw FormatError("bad magic: expected " + std::string(tag));
}

std::uint32_t BinaryReader::u32() {
  std::array<unsigned char, 4> b{};
  bytes(b.data(), b.size());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::array<unsigned char, 8> b{};
  bytes(b.data(), b.size());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void BinaryReader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("unexpected end of data");
}

std::string BinaryReader::string() {
  const auto n = u32();
  if (n > (1u << 24)) throw FormatError("string length out of range");
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

Matrix BinaryReader::matrix() {
  const auto rows = u64();
  const auto cols = u64();
  if (rows > (1ull << 32) || cols > (1ull << 32) || (rows && cols > (1ull << 34) / rows))
    throw FormatError("matrix size out of range");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
  if (!m.allFinite()) throw FormatError("non-finite matrix entry");
  return m;
}

Vector BinaryReader::vector() {
  const auto n = u64();
  if (n > (1ull << 34)) throw FormatError("vector size out of range");
  Vector v(static_cast<Index>(n));
  for (Index i = 0; i < v.size(); ++i) v[i] = f64();
  if (!v.allFinite()) throw FormatError("non-finite vector entry");
  return v;
}

bool BinaryReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& body) {
  std::random_device rd;
  auto tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    try {
      body(out);
      out.flush();
      if (!out) throw Error("write failed: " + tmp.string());
    } catch (...) {
      out.close();
      std::filesystem::remove(tmp);
      throw;
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace texbank::detail
