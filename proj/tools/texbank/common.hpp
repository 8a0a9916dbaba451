#pragma once

#include "texbank/descriptors.hpp"
#include "texbank/encoders.hpp"
#include "texbank/image.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace texbank::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Bad invocation or missing upstream artifact; exit status 1.
class UserError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 1;
  fs::path out = ".";
  bool allow_lineage_mismatch = false;
};

std::string sha256_hex(std::string_view bytes);
std::string read_file(const fs::path& path);
void write_file_atomically(const fs::path& path, std::string_view bytes);

/// Sidecar record written next to every artifact as `<artifact>.prov.json`.
struct Provenance {
  std::string command;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::string dataset;  // hash of the manifest the chain started from
  std::string vocab;    // config hash of the vocabulary in use, if any
  Json pipeline = Json::object();
  Json inputs = Json::array();
  std::string config_hash;

  void add_input(const fs::path& path, const Provenance& upstream);
  /// Hash of command, config, seed, dataset and input hashes.
  void finalize();
  Json to_json() const;
  static Provenance from_json(const Json& j);
};

fs::path provenance_path(const fs::path& artifact);
void write_provenance(const fs::path& artifact, Provenance prov);
Provenance read_provenance(const fs::path& artifact);

/// Throws UserError on a mismatch unless allowed, in which case it warns.
void check_lineage(const std::string& what, const std::string& expected, const std::string& actual,
                   bool allow);

/// One image of a dataset as carried between stages.
struct Item {
  fs::path image;
  fs::path fields;  // descriptor file, empty before extraction
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::string split;
  std::optional<fs::path> mask;
};

struct Dataset {
  std::vector<std::string> classes;
  std::vector<Item> items;
  fs::path encodings;  // vector file, set after encoding
  fs::path vocab;      // vocabulary model, set after encoding
};

/// Paths are stored relative to the index file when possible.
void save_dataset(const Dataset& data, const fs::path& file);
Dataset load_dataset(const fs::path& file);

/// Item indices whose split is listed in `splits` (comma separated), or all
/// items for "all".
std::vector<std::size_t> select_split(const Dataset& data, const std::string& splits);

struct DescriptorSettings {
  std::string kind = "mr8";  // mr8, lm, patch, lbp, dsift
  int patch_size = 7;
  int stride = 1;
  int lbp_radius = 1;
  int lbp_neighbors = 8;
  int lbp_cell = 8;
  bool lbp_catch_all = true;
  int dsift_step = 2;
  int dsift_bin = 8;
  bool multiscale = false;
  PyramidOptions pyramid;

  void validate() const;
  Json to_json() const;
  static DescriptorSettings from_json(const Json& j);
};

std::vector<DescriptorField> extract_fields(const GrayImage& img, const DescriptorSettings& settings);

/// Sample with the extent of the source image.
DescriptorSample load_sample(const Item& item);

struct EncoderSettings {
  std::string encoder = "fv";
  double kcb_lambda = 1.0;
  Index llc_neighbors = 5;
  int spp_x = 1;
  int spp_y = 1;
  std::string postprocess = "default";  // default, none, or a list of sqrt,intra,l2

  PostProcessSpec postprocess_spec() const;
  void validate() const;
  Json to_json() const;
  static EncoderSettings from_json(const Json& j);
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads and rethrows the
/// failure with the lowest index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

std::string join(const std::vector<std::string>& parts, char sep);
std::vector<std::string> split(const std::string& text, char sep);

}  // namespace texbank::cli
