#pragma once

#include "texbank/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace texbank {

/// Single-channel image with intensities in [0, 1], row-major.
class GrayImage {
public:
  GrayImage() = default;
  /// Throws std::invalid_argument on size mismatch or values outside [0, 1].
  GrayImage(int width, int height, std::vector<double> data);
  static GrayImage filled(int width, int height, double value);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const double> pixels() const { return data_; }
  std::span<const double> row(int y) const {
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Binary pixel mask. Nonzero bytes are inside.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  static Mask filled(int width, int height, bool value);
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  std::size_t area() const;
};

struct PyramidLevel {
  double scale_factor = 1.0;
  GrayImage image;
};

/// Levels ordered by strictly increasing scale factor.
struct ScalePyramid {
  int base_width = 0;
  int base_height = 0;
  std::vector<PyramidLevel> levels;
};

struct PyramidOptions {
  double s_min = -3.0;
  double s_max = 1.5;
  double step = 0.5;
  double max_area = 1024.0 * 1024.0;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Reads an 8-bit PNG, PPM or PGM. Colour input is converted to luma.
GrayImage load_image(const std::filesystem::path& path);

/// Writes an 8-bit image (format chosen by extension), rounding to the
/// nearest of 256 levels.
void save_image(const GrayImage& img, const std::filesystem::path& path);

/// Reads an 8-bit single-channel raster as a mask (nonzero = inside).
Mask load_mask(const std::filesystem::path& path);

/// Bilinear resize to the given size. Identity when the size is unchanged.
GrayImage resize_bilinear(const GrayImage& img, int width, int height);

/// Rescales by 2^s for s = s_min, s_min + step, ... <= s_max, dropping levels
/// whose area is strictly larger than max_area.
ScalePyramid build_pyramid(const GrayImage& img, const PyramidOptions& options = {});

}  // namespace texbank
