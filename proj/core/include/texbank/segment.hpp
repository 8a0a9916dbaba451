#pragma once

#include "texbank/descriptors.hpp"
#include "texbank/encoders.hpp"
#include "texbank/image.hpp"
#include "texbank/learn.hpp"
#include "texbank/metrics.hpp"

#include <filesystem>
#include <map>
#include <vector>

namespace texbank {

struct RegionProposal {
  Mask mask;
  std::size_t area = 0;
  Label label = 0;     // 1-based class id
  double score = 0.0;
  std::size_t source = 0;  // index in the proposal list it came from
};

struct ScoringOptions {
  PostProcessSpec postprocess;
  bool divide_by_area = true;  // off for crisp partitions
};

/// Encodes each proposal over the shared sample, labels it with the best
/// class and scores it by that class score over the area. Proposals without
/// descriptors are dropped with a warning.
std::vector<RegionProposal> score_proposals(const std::vector<Mask>& proposals,
                                            const LinearClassifier& clf,
                                            const DescriptorSample& sample,
                                            const Encoder& encoder,
                                            const ScoringOptions& options = {});

struct SegmentationResult {
  PixelLabelMap labels;
  std::vector<int> owner;  // proposal index per pixel, -1 if uncovered
};

/// Paints proposals in ascending score order (stable), so the highest
/// scoring proposal covering a pixel wins. Uncovered pixels get label 0.
SegmentationResult greedy_paste(const std::vector<RegionProposal>& proposals, int width,
                                int height);

/// `<region-id> <row> <col-start> <col-end>` runs (inclusive), one per line.
/// Regions come back ordered by id.
std::map<int, Mask> load_rle_proposals(const std::filesystem::path& path, int width, int height);

void save_label_map(const PixelLabelMap& map, const std::filesystem::path& path);  // 16-bit PGM
PixelLabelMap load_label_map(const std::filesystem::path& path);

}  // namespace texbank
