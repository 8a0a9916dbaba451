#pragma once

#include "texbank/image.hpp"
#include "texbank/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

namespace texbank {

/// Dense grid of local descriptors. Cell (i, j) is centred at
/// (offset + i * stride, offset + j * stride) in the coordinates of the image
/// it was computed on; scale_factor maps those back to the source image.
struct DescriptorField {
  std::uint32_t grid_w = 0;
  std::uint32_t grid_h = 0;
  std::uint32_t dim = 0;
  std::uint32_t stride = 1;
  std::uint32_t offset = 0;
  std::uint32_t receptive_field = 1;
  double scale_factor = 1.0;
  std::vector<double> data;  // grid_h x grid_w x dim, channel fastest

  std::size_t count() const { return static_cast<std::size_t>(grid_w) * grid_h; }
  const double* descriptor(std::uint32_t i, std::uint32_t j) const {
    return data.data() + (static_cast<std::size_t>(j) * grid_w + i) * dim;
  }
  double* descriptor(std::uint32_t i, std::uint32_t j) {
    return data.data() + (static_cast<std::size_t>(j) * grid_w + i) * dim;
  }
  /// Throws FormatError when the geometry and payload disagree or values are
  /// not finite.
  void validate() const;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
  double scale = 1.0;

  friend bool operator==(const Position&, const Position&) = default;
};

/// A sequence of descriptors with their centres in source-image coordinates.
struct DescriptorSample {
  Matrix descriptors;  // n x D
  std::vector<Position> positions;
  int image_width = 0;   // source extent, used for spatial pooling
  int image_height = 0;

  Index size() const { return descriptors.rows(); }
  Index dim() const { return descriptors.cols(); }
  bool empty() const { return descriptors.rows() == 0; }
};

/// Descriptor rows and centre positions of one field.
DescriptorSample to_sample(const DescriptorField& field);

/// Concatenates samples. Dimensions must agree.
DescriptorSample concatenate(const std::vector<DescriptorSample>& parts);

/// Keeps the rows whose index is listed, in the listed order.
DescriptorSample select(const DescriptorSample& sample, const std::vector<Index>& rows);

DescriptorField extract_patches(const GrayImage& img, int size, int stride = 1);

struct LbpOptions {
  int radius = 1;
  int neighbors = 8;
  int cell = 8;
  bool keep_catch_all = true;  // 59 bins; false drops it for 58
  bool bilinear = true;        // false snaps neighbours to the nearest pixel
};

/// Uniform-pattern code (0..58, 58 is the catch-all) for every interior
/// pixel; returned image is (W - 2r) x (H - 2r), row-major.
std::vector<int> lbp_codes(const GrayImage& img, const LbpOptions& options);
int lbp_uniform_bin(unsigned code);
int lbp_bin_count(const LbpOptions& options);

/// Per-cell L1-normalised uniform-LBP histograms on a grid of cells.
DescriptorField extract_lbp(const GrayImage& img, const LbpOptions& options = {});

struct DsiftOptions {
  int step = 2;
  int bin_size = 8;
  double clamp = 0.2;
};

/// 4x4x8 dense SIFT with bilinear spatial and orientation binning. The
/// receptive field is 5 * bin_size pixels.
DescriptorField extract_dsift(const GrayImage& img, const DsiftOptions& options = {});

/// Raw binary format: "TXDF", u32 version, six u32 geometry fields, f32 scale,
/// f32 payload, little-endian.
void write_descriptor_field(std::ostream& out, const DescriptorField& field);
DescriptorField read_descriptor_field(std::istream& in);
void save_descriptor_field(const DescriptorField& field, const std::filesystem::path& path);
DescriptorField load_descriptor_field(const std::filesystem::path& path);

/// All fields stored back-to-back in one file (one per pyramid level).
void save_descriptor_fields(const std::vector<DescriptorField>& fields,
                            const std::filesystem::path& path);
std::vector<DescriptorField> load_descriptor_fields(const std::filesystem::path& path);

using Extractor = std::function<DescriptorField(const GrayImage&)>;

/// Runs the extractor on every level and concatenates the results, mapping
/// positions back to the base image.
DescriptorSample multiscale_collect(const ScalePyramid& pyramid, const Extractor& extractor);

/// Fields for every pyramid level, with scale factors filled in.
std::vector<DescriptorField> extract_levels(const ScalePyramid& pyramid, const Extractor& extractor);

DescriptorSample fields_to_sample(const std::vector<DescriptorField>& fields);

}  // namespace texbank
