#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace texbank {

enum class Split { Train, Val, Test };

Split parse_split(const std::string& text);
const char* to_string(Split split);

struct ManifestEntry {
  std::filesystem::path image;
  std::vector<int> labels;  // indices into DatasetManifest::vocabulary
  Split split = Split::Train;
  std::optional<std::filesystem::path> mask;
};

struct DatasetManifest {
  std::vector<std::string> vocabulary;  // in order of first appearance
  std::vector<ManifestEntry> entries;

  std::size_t count(Split split) const;
  int label_index(const std::string& name) const;  // -1 if absent
};

/// Parses `<image>\t<label>[,label...]\t<split>[\t<mask>]` records. Relative
/// paths are resolved against the manifest's directory.
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace texbank
