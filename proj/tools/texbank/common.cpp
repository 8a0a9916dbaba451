#include "common.hpp"

#include "texbank/filterbank.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>
#include <thread>

namespace texbank::cli {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomically(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UserError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw UserError("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

void Provenance::add_input(const fs::path& path, const Provenance& upstream) {
  inputs.push_back({{"path", path.filename().string()}, {"command", upstream.command},
                    {"config_hash", upstream.config_hash}});
}

void Provenance::finalize() {
  Json basis = {{"command", command}, {"config", config}, {"seed", seed}, {"dataset", dataset}, {"inputs", inputs}};
  config_hash = sha256_hex(basis.dump());
}

Json Provenance::to_json() const {
  return {{"tool", "texbank"},   {"command", command}, {"config_hash", config_hash},
          {"seed", seed},        {"dataset", dataset}, {"vocab", vocab},
          {"config", config},    {"pipeline", pipeline}, {"inputs", inputs}};
}

Provenance Provenance::from_json(const Json& j) {
  Provenance p;
  p.command = j.at("command").get<std::string>();
  p.config_hash = j.at("config_hash").get<std::string>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.dataset = j.at("dataset").get<std::string>();
  p.vocab = j.at("vocab").get<std::string>();
  p.config = j.at("config");
  p.pipeline = j.at("pipeline");
  p.inputs = j.at("inputs");
  return p;
}

fs::path provenance_path(const fs::path& artifact) {
  auto p = artifact;
  p += ".prov.json";
  return p;
}

void write_provenance(const fs::path& artifact, Provenance prov) {
  prov.finalize();
  write_file_atomically(provenance_path(artifact), prov.to_json().dump(2) + "\n");
}

Provenance read_provenance(const fs::path& artifact) {
  const auto path = provenance_path(artifact);
  if (!fs::exists(path)) throw UserError("missing provenance record " + path.string());
  try {
    return Provenance::from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw UserError("malformed provenance record " + path.string() + ": " + e.what());
  }
}

void check_lineage(const std::string& what, const std::string& expected, const std::string& actual, bool allow) {
  if (expected == actual) return;
  const std::string msg = what + " lineage mismatch (" + expected.substr(0, 12) + " vs " + actual.substr(0, 12) + ")";
  if (!allow) throw UserError(msg + "; pass --allow-lineage-mismatch to override");
  spdlog::warn("{}", msg);
}

namespace {

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (p.empty()) return "";
  const auto rel = fs::proximate(p, base);
  return rel.generic_string();
}

fs::path resolve(const std::string& p, const fs::path& base) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

void save_dataset(const Dataset& data, const fs::path& file) {
  const auto base = file.has_parent_path() ? file.parent_path() : fs::path(".");
  Json items = Json::array();
  for (const auto& it : data.items) {
    Json j = {{"image", relative_to(it.image, base)}, {"fields", relative_to(it.fields, base)},
              {"width", it.width}, {"height", it.height}, {"labels", it.labels}, {"split", it.split}};
    if (it.mask) j["mask"] = relative_to(*it.mask, base);
    items.push_back(std::move(j));
  }
  Json doc = {{"classes", data.classes}, {"encodings", relative_to(data.encodings, base)},
              {"vocab", relative_to(data.vocab, base)}, {"items", std::move(items)}};
  write_file_atomically(file, doc.dump(1) + "\n");
}

Dataset load_dataset(const fs::path& file) {
  const auto base = file.has_parent_path() ? file.parent_path() : fs::path(".");
  Dataset data;
  try {
    const Json doc = Json::parse(read_file(file));
    data.classes = doc.at("classes").get<std::vector<std::string>>();
    data.encodings = resolve(doc.value("encodings", ""), base);
    data.vocab = resolve(doc.value("vocab", ""), base);
    for (const auto& j : doc.at("items")) {
      Item it;
      it.image = resolve(j.at("image").get<std::string>(), base);
      it.fields = resolve(j.at("fields").get<std::string>(), base);
      it.width = j.at("width").get<int>();
      it.height = j.at("height").get<int>();
      it.labels = j.at("labels").get<std::vector<int>>();
      it.split = j.at("split").get<std::string>();
      if (j.contains("mask")) it.mask = resolve(j.at("mask").get<std::string>(), base);
      for (int l : it.labels)
        if (l < 0 || l >= static_cast<int>(data.classes.size()))
          throw UserError("label index out of range in " + file.string());
      data.items.push_back(std::move(it));
    }
  } catch (const Json::exception& e) {
    throw UserError("malformed dataset index " + file.string() + ": " + e.what());
  }
  return data;
}

std::vector<std::size_t> select_split(const Dataset& data, const std::string& splits) {
  const auto wanted = split(splits, ',');
  const bool all = std::find(wanted.begin(), wanted.end(), "all") != wanted.end();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.items.size(); ++i)
    if (all || std::find(wanted.begin(), wanted.end(), data.items[i].split) != wanted.end()) out.push_back(i);
  if (out.empty()) throw UserError("no items in split '" + splits + "'");
  return out;
}

void DescriptorSettings::validate() const {
  static const std::vector<std::string> kinds{"mr8", "lm", "patch", "lbp", "dsift"};
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
    throw UserError("unknown descriptor '" + kind + "' (mr8, lm, patch, lbp, dsift)");
  if (stride < 1 || dsift_step < 1 || dsift_bin < 1 || lbp_cell < 1 || lbp_radius < 1)
    throw UserError("descriptor steps, cells and radii must be positive");
  if (patch_size < 1 || patch_size % 2 == 0) throw UserError("patch size must be odd");
  if (lbp_neighbors != 8) throw UserError("uniform LBP uses 8 neighbours");
}

Json DescriptorSettings::to_json() const {
  Json j = {{"kind", kind}, {"multiscale", multiscale}};
  if (kind == "patch") {
    j["patch_size"] = patch_size;
    j["stride"] = stride;
  } else if (kind == "lbp") {
    j["lbp_radius"] = lbp_radius;
    j["lbp_neighbors"] = lbp_neighbors;
    j["lbp_cell"] = lbp_cell;
    j["lbp_catch_all"] = lbp_catch_all;
  } else if (kind == "dsift") {
    j["dsift_step"] = dsift_step;
    j["dsift_bin"] = dsift_bin;
  }
  if (multiscale)
    j["pyramid"] = {{"s_min", pyramid.s_min}, {"s_max", pyramid.s_max}, {"step", pyramid.step},
                    {"max_area", pyramid.max_area}};
  return j;
}

DescriptorSettings DescriptorSettings::from_json(const Json& j) {
  DescriptorSettings s;
  s.kind = j.at("kind").get<std::string>();
  s.multiscale = j.value("multiscale", false);
  s.patch_size = j.value("patch_size", s.patch_size);
  s.stride = j.value("stride", s.stride);
  s.lbp_radius = j.value("lbp_radius", s.lbp_radius);
  s.lbp_neighbors = j.value("lbp_neighbors", s.lbp_neighbors);
  s.lbp_cell = j.value("lbp_cell", s.lbp_cell);
  s.lbp_catch_all = j.value("lbp_catch_all", s.lbp_catch_all);
  s.dsift_step = j.value("dsift_step", s.dsift_step);
  s.dsift_bin = j.value("dsift_bin", s.dsift_bin);
  if (j.contains("pyramid")) {
    const auto& p = j.at("pyramid");
    s.pyramid.s_min = p.at("s_min").get<double>();
    s.pyramid.s_max = p.at("s_max").get<double>();
    s.pyramid.step = p.at("step").get<double>();
    s.pyramid.max_area = p.at("max_area").get<double>();
  }
  return s;
}

namespace {

// Raw responses as a descriptor field, one dimension per kernel.
DescriptorField response_field(const FilterResponseField& r) {
  DescriptorField f;
  f.grid_w = static_cast<std::uint32_t>(r.width);
  f.grid_h = static_cast<std::uint32_t>(r.height);
  f.dim = static_cast<std::uint32_t>(r.channels.size());
  f.offset = static_cast<std::uint32_t>(r.support / 2);
  f.receptive_field = static_cast<std::uint32_t>(r.support);
  f.data.resize(f.count() * f.dim);
  for (std::size_t p = 0; p < f.count(); ++p)
    for (std::size_t c = 0; c < f.dim; ++c) f.data[p * f.dim + c] = r.channels[c][p];
  return f;
}

Extractor make_extractor(const DescriptorSettings& s) {
  if (s.kind == "mr8") {
    auto bank = std::make_shared<FilterBank>(make_mr_bank());
    return [bank](const GrayImage& img) { return mr8_collapse(apply_bank(img, *bank)); };
  }
  if (s.kind == "lm") {
    auto bank = std::make_shared<FilterBank>(make_lm());
    return [bank](const GrayImage& img) { return response_field(apply_bank(img, *bank)); };
  }
  if (s.kind == "patch")
    return [s](const GrayImage& img) { return extract_patches(img, s.patch_size, s.stride); };
  if (s.kind == "lbp") {
    LbpOptions o;
    o.radius = s.lbp_radius;
    o.neighbors = s.lbp_neighbors;
    o.cell = s.lbp_cell;
    o.keep_catch_all = s.lbp_catch_all;
    return [o](const GrayImage& img) { return extract_lbp(img, o); };
  }
  DsiftOptions o;
  o.step = s.dsift_step;
  o.bin_size = s.dsift_bin;
  return [o](const GrayImage& img) { return extract_dsift(img, o); };
}

}  // namespace

std::vector<DescriptorField> extract_fields(const GrayImage& img, const DescriptorSettings& settings) {
  const auto extractor = make_extractor(settings);
  if (!settings.multiscale) return {extractor(img)};
  return extract_levels(build_pyramid(img, settings.pyramid), extractor);
}

DescriptorSample load_sample(const Item& item) {
  if (item.fields.empty()) throw UserError("item " + item.image.string() + " has no descriptor file");
  auto sample = fields_to_sample(load_descriptor_fields(item.fields));
  sample.image_width = item.width;
  sample.image_height = item.height;
  return sample;
}

PostProcessSpec EncoderSettings::postprocess_spec() const {
  if (postprocess == "default") return default_postprocess(parse_encoder_kind(encoder));
  PostProcessSpec spec;
  if (postprocess == "none") return spec;
  for (const auto& step : split(postprocess, ',')) {
    if (step == "sqrt") spec.signed_sqrt = true;
    else if (step == "intra") spec.intra_norm = true;
    else if (step == "l2") spec.global_l2 = true;
    else throw UserError("unknown post-processing step '" + step + "' (sqrt, intra, l2)");
  }
  return spec;
}

void EncoderSettings::validate() const {
  try {
    const auto kind = parse_encoder_kind(encoder);
    if (postprocess_spec().intra_norm && kind != EncoderKind::Vlad)
      throw UserError("intra-normalisation applies to VLAD only");
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  if (!(kcb_lambda > 0)) throw UserError("KCB lambda must be positive");
  if (llc_neighbors < 1) throw UserError("LLC needs at least one neighbour");
  if (spp_x < 1 || spp_y < 1) throw UserError("spatial grid must be at least 1x1");
}

Json EncoderSettings::to_json() const {
  Json j = {{"encoder", encoder}};
  if (encoder == "kcb") j["kcb_lambda"] = kcb_lambda;
  if (encoder == "llc") j["llc_neighbors"] = llc_neighbors;
  j["spp"] = {spp_x, spp_y};
  j["postprocess"] = postprocess;
  return j;
}

EncoderSettings EncoderSettings::from_json(const Json& j) {
  EncoderSettings s;
  s.encoder = j.at("encoder").get<std::string>();
  s.kcb_lambda = j.value("kcb_lambda", s.kcb_lambda);
  s.llc_neighbors = j.value("llc_neighbors", s.llc_neighbors);
  s.spp_x = j.at("spp").at(0).get<int>();
  s.spp_y = j.at("spp").at(1).get<int>();
  s.postprocess = j.at("postprocess").get<std::string>();
  return s;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  if (text.back() == sep) out.emplace_back();
  return out;
}

}  // namespace texbank::cli
