#include "texbank/segment.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace texbank {

std::vector<RegionProposal> score_proposals(const std::vector<Mask>& proposals, const LinearClassifier& clf,
                                            const DescriptorSample& sample, const Encoder& encoder,
                                            const ScoringOptions& options) {
  if (clf.classes() < 1) throw std::invalid_argument("classifier has no classes");
  if (clf.dim() != encoded_dimension(encoder))
    throw std::invalid_argument("classifier dimension does not match the encoder");
  std::vector<RegionProposal> scored;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const Mask& mask = proposals[i];
    if (sample.image_width > 0 && (mask.width != sample.image_width || mask.height != sample.image_height))
      throw std::invalid_argument("proposal " + std::to_string(i) + " does not match the image size");
    const std::size_t area = mask.area();
    if (area == 0) throw std::invalid_argument("proposal " + std::to_string(i) + " is empty");
    EncodedVector code;
    try {
      code = region_pool(sample, mask, encoder);
    } catch (const EmptyRegionError&) {
      spdlog::warn("proposal {} contains no descriptor centres; dropped", i);
      continue;
    }
    code = postprocess(std::move(code), options.postprocess);
    const Matrix row = code.values.transpose();
    const Matrix s = clf.decision_values(row);
    Index best = 0;
    const double top = s.row(0).maxCoeff(&best);
    RegionProposal p;
    p.mask = mask;
    p.area = area;
    p.label = static_cast<Label>(best + 1);
    p.score = options.divide_by_area ? top / static_cast<double>(area) : top;
    p.source = i;
    scored.push_back(std::move(p));
  }
  return scored;
}

SegmentationResult greedy_paste(const std::vector<RegionProposal>& proposals, int width, int height) {
  if (proposals.empty()) throw std::invalid_argument("no proposals to paste");
  SegmentationResult out;
  out.labels = PixelLabelMap::filled(width, height, 0);
  out.owner.assign(static_cast<std::size_t>(width) * height, -1);
  for (const auto& p : proposals)
    if (p.mask.width != width || p.mask.height != height)
      throw std::invalid_argument("proposal mask does not match the output size");

  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return proposals[a].score < proposals[b].score; });
  for (std::size_t idx : order) {
    const auto& p = proposals[idx];
    for (std::size_t px = 0; px < p.mask.bits.size(); ++px) {
      if (!p.mask.bits[px]) continue;
      out.labels.labels[px] = p.label;
      out.owner[px] = static_cast<int>(idx);
    }
  }
  return out;
}

std::map<int, Mask> load_rle_proposals(const std::filesystem::path& path, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  std::ifstream in(path);
  if (!in) throw Error("cannot open proposal list " + path.string());
  std::map<int, Mask> regions;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    long long id = 0, row = 0, c0 = 0, c1 = 0;
    std::string extra;
    if (!(fields >> id >> row >> c0 >> c1) || (fields >> extra))
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected '<region-id> <row> <col-start> <col-end>'");
    if (row < 0 || row >= height || c0 < 0 || c1 >= width || c0 > c1)
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": run outside the image");
    auto [it, inserted] = regions.try_emplace(static_cast<int>(id));
    if (inserted) it->second = Mask::filled(width, height, false);
    for (long long c = c0; c <= c1; ++c) it->second.bits[static_cast<std::size_t>(row) * width + c] = 1;
  }
  if (regions.empty()) throw FormatError("no proposals in " + path.string());
  return regions;
}

void save_label_map(const PixelLabelMap& map, const std::filesystem::path& path) {
  if (map.width <= 0 || map.height <= 0 ||
      map.labels.size() != static_cast<std::size_t>(map.width) * map.height)
    throw std::invalid_argument("malformed label map");
  cv::Mat img(map.height, map.width, CV_16UC1);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) img.at<std::uint16_t>(y, x) = map.at(x, y);
  auto tmp = path;
  tmp += ".tmp.pgm";
  if (!cv::imwrite(tmp.string(), img)) throw Error("cannot write label map " + path.string());
  std::filesystem::rename(tmp, path);
}

PixelLabelMap load_label_map(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("label map not found: " + path.string());
  const cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw FormatError("cannot decode label map " + path.string());
  if (img.channels() != 1) throw FormatError("label map must be single-channel");
  PixelLabelMap map = PixelLabelMap::filled(img.cols, img.rows, 0);
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) {
      if (img.depth() == CV_16U) map.at(x, y) = img.at<std::uint16_t>(y, x);
      else if (img.depth() == CV_8U) map.at(x, y) = img.at<std::uint8_t>(y, x);
      else throw FormatError("label map must be 8- or 16-bit");
    }
  return map;
}

}  // namespace texbank
