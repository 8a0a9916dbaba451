#include "texbank/manifest.hpp"
#include "texbank/types.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace texbank {
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

Split parse_split(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw FormatError("unknown split id '" + text + "'");
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::size_t DatasetManifest::count(Split split) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.split == split;
  return n;
}

int DatasetManifest::label_index(const std::string& name) const {
  for (std::size_t i = 0; i < vocabulary.size(); ++i)
    if (vocabulary[i] == name) return static_cast<int>(i);
  return -1;
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  DatasetManifest manifest;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto where = "manifest line " + std::to_string(line_no) + ": ";

    const auto fields = split(line, '\t');
    if (fields.size() < 3 || fields.size() > 4)
      throw FormatError(where + "expected 3 or 4 tab-separated fields");
    if (fields[0].empty()) throw FormatError(where + "empty image path");
    if (!seen.insert(fields[0]).second)
      throw FormatError(where + "duplicate image id '" + fields[0] + "'");

    ManifestEntry entry;
    entry.image = resolve(fields[0], base_dir);
    for (const auto& name : split(fields[1], ',')) {
      if (name.empty()) throw FormatError(where + "empty label");
      int idx = manifest.label_index(name);
      if (idx < 0) {
        idx = static_cast<int>(manifest.vocabulary.size());
        manifest.vocabulary.push_back(name);
      }
      entry.labels.push_back(idx);
    }
    if (entry.labels.empty()) throw FormatError(where + "missing label");
    try {
      entry.split = parse_split(fields[2]);
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
    if (fields.size() == 4 && !fields[3].empty()) {
      entry.mask = resolve(fields[3], base_dir);
      if (!std::filesystem::exists(*entry.mask))
        throw FormatError(where + "mask not found: " + entry.mask->string());
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

}  // namespace texbank
