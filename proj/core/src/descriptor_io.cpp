#include "texbank/descriptors.hpp"

#include "binary_io.hpp"

#include <fstream>

namespace texbank {
namespace {

constexpr std::uint32_t kFieldVersion = 1;
constexpr std::uint64_t kMaxFieldValues = 1ull << 32;

}  // namespace

void write_descriptor_field(std::ostream& out, const DescriptorField& field) {
  field.validate();
  detail::BinaryWriter w(out);
  w.magic("TXDF");
  w.u32(kFieldVersion);
  w.u32(field.grid_w);
  w.u32(field.grid_h);
  w.u32(field.dim);
  w.u32(field.stride);
  w.u32(field.offset);
  w.u32(field.receptive_field);
  w.f32(static_cast<float>(field.scale_factor));
  for (double v : field.data) w.f32(static_cast<float>(v));
}

DescriptorField read_descriptor_field(std::istream& in) {
  detail::BinaryReader r(in);
  r.expect_magic("TXDF");
  if (const auto version = r.u32(); version != kFieldVersion)
    throw FormatError("unsupported descriptor field version " + std::to_string(version));
  DescriptorField field;
  field.grid_w = r.u32();
  field.grid_h = r.u32();
  field.dim = r.u32();
  field.stride = r.u32();
  field.offset = r.u32();
  field.receptive_field = r.u32();
  field.scale_factor = r.f32();
  const std::uint64_t values = static_cast<std::uint64_t>(field.grid_w) * field.grid_h * field.dim;
  if (values > kMaxFieldValues) throw FormatError("descriptor field too large");
  field.data.resize(values);
  for (auto& v : field.data) v = r.f32();
  field.validate();
  return field;
}

void save_descriptor_field(const DescriptorField& field, const std::filesystem::path& path) {
  detail::write_atomically(path, [&](std::ostream& out) { write_descriptor_field(out, field); });
}

DescriptorField load_descriptor_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open descriptor field " + path.string());
  auto field = read_descriptor_field(in);
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing data after descriptor field in " + path.string());
  return field;
}

void save_descriptor_fields(const std::vector<DescriptorField>& fields,
                            const std::filesystem::path& path) {
  detail::write_atomically(path, [&](std::ostream& out) {
    for (const auto& f : fields) write_descriptor_field(out, f);
  });
}

std::vector<DescriptorField> load_descriptor_fields(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open descriptor fields " + path.string());
  std::vector<DescriptorField> fields;
  while (in.peek() != std::char_traits<char>::eof()) fields.push_back(read_descriptor_field(in));
  if (fields.empty()) throw FormatError("no descriptor fields in " + path.string());
  return fields;
}

}  // namespace texbank
