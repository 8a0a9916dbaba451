#pragma once

#include "texbank/filterbank.hpp"
#include "texbank/learn.hpp"
#include "texbank/vocab.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace texbank {

enum class SectionType : std::uint32_t {
  Whitener = 1,
  Codebook = 2,
  Gmm = 3,
  LinearClassifier = 4,
  Calibration = 5,
  FilterBank = 6,
  KernelModel = 7,
};

/// Everything a pipeline needs to reproduce its vectors and scores. Sections
/// that are absent are simply not written.
struct ModelBundle {
  std::optional<PcaWhitener> whitener;
  std::optional<Codebook> codebook;
  std::optional<GmmModel> gmm;
  std::optional<LinearClassifier> classifier;
  std::optional<std::vector<CalibrationParams>> calibration;
  std::optional<FilterBank> filter_bank;
  std::optional<KernelModel> kernel_model;
};

/// "TXMD", u32 version, u32 section count, then per section u32 type, u64
/// byte length and payload. Little-endian; reals are f64. Unknown section
/// types are skipped on read.
void write_model(std::ostream& out, const ModelBundle& bundle);
ModelBundle read_model(std::istream& in);
void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace texbank
