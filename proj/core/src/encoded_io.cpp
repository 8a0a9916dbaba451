#include "texbank/encoders.hpp"

#include "binary_io.hpp"

#include <cmath>
#include <fstream>

namespace texbank {
namespace {

constexpr std::uint32_t kEncodedVersion = 1;
constexpr std::uint32_t kMaxEncodedDim = 1u << 30;

}  // namespace

void write_encoded_vector(std::ostream& out, const EncodedVector& vec) {
  if (!vec.values.allFinite()) throw std::invalid_argument("encoded vector has non-finite values");
  detail::BinaryWriter w(out);
  w.magic("TXEV");
  w.u32(kEncodedVersion);
  w.u32(static_cast<std::uint32_t>(vec.kind));
  w.u32(static_cast<std::uint32_t>(vec.dim()));
  for (Index i = 0; i < vec.dim(); ++i) w.f32(static_cast<float>(vec.values[i]));
}

EncodedVector read_encoded_vector(std::istream& in) {
  detail::BinaryReader r(in);
  r.expect_magic("TXEV");
  if (const auto version = r.u32(); version != kEncodedVersion)
    throw FormatError("unsupported encoded vector version " + std::to_string(version));
  const auto kind = r.u32();
  if (kind < 1 || kind > 5) throw FormatError("unknown encoder kind tag " + std::to_string(kind));
  const auto dim = r.u32();
  if (dim > kMaxEncodedDim) throw FormatError("encoded vector too large");
  EncodedVector vec;
  vec.kind = static_cast<EncoderKind>(kind);
  vec.values.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    vec.values[i] = r.f32();
    if (!std::isfinite(vec.values[i])) throw FormatError("non-finite value in encoded vector");
  }
  return vec;
}

void save_encoded_vectors(const std::vector<EncodedVector>& vecs, const std::filesystem::path& path) {
  detail::write_atomically(path, [&](std::ostream& out) {
    for (const auto& v : vecs) write_encoded_vector(out, v);
  });
}

std::vector<EncodedVector> load_encoded_vectors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open encoded vectors " + path.string());
  std::vector<EncodedVector> vecs;
  while (in.peek() != std::char_traits<char>::eof()) vecs.push_back(read_encoded_vector(in));
  return vecs;
}

}  // namespace texbank
