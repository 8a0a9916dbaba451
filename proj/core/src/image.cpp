#include "texbank/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace texbank {
namespace {

bool supported_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

cv::Mat read_raster(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw Error("cannot read image: " + path.string());
  if (!supported_extension(path)) throw FormatError("unsupported image format: " + path.string());
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw FormatError("cannot decode image: " + path.string());
  if (raw.depth() != CV_8U) throw FormatError("only 8-bit images are supported: " + path.string());
  if (raw.rows == 0 || raw.cols == 0) throw FormatError("zero-area image: " + path.string());
  return raw;
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative image size");
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("image data does not match its size");
  for (double v : data_)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("image intensity outside [0, 1]");
}

GrayImage GrayImage::filled(int width, int height, double value) {
  return GrayImage(width, height,
                   std::vector<double>(static_cast<std::size_t>(width) * height, value));
}

Mask Mask::filled(int width, int height, bool value) {
  return Mask{width, height,
              std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, value ? 1 : 0)};
}

std::size_t Mask::area() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

GrayImage load_image(const std::filesystem::path& path) {
  const cv::Mat raw = read_raster(path);
  const int channels = raw.channels();
  if (channels != 1 && channels != 3 && channels != 4)
    throw FormatError("unsupported channel count in " + path.string());

  std::vector<double> data(static_cast<std::size_t>(raw.rows) * raw.cols);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<std::uint8_t>(y);
    for (int x = 0; x < raw.cols; ++x) {
      const auto* px = row + static_cast<std::ptrdiff_t>(x) * channels;
      double v = 0.0;
      if (channels == 1 || (px[0] == px[1] && px[1] == px[2])) {
        v = px[0] / 255.0;
      } else {
        // OpenCV stores colour as BGR(A).
        v = (kLumaR * px[2] + kLumaG * px[1] + kLumaB * px[0]) / 255.0;
      }
      data[static_cast<std::size_t>(y) * raw.cols + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return GrayImage(raw.cols, raw.rows, std::move(data));
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  if (img.empty()) throw std::invalid_argument("cannot save an empty image");
  if (!supported_extension(path)) throw FormatError("unsupported image format: " + path.string());
  cv::Mat out(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(img.at(x, y) * 255.0));
  if (!cv::imwrite(path.string(), out)) throw Error("cannot write image: " + path.string());
}

Mask load_mask(const std::filesystem::path& path) {
  const cv::Mat raw = read_raster(path);
  if (raw.channels() != 1) throw FormatError("mask must be single-channel: " + path.string());
  Mask mask = Mask::filled(raw.cols, raw.rows, false);
  for (int y = 0; y < raw.rows; ++y)
    for (int x = 0; x < raw.cols; ++x)
      mask.bits[static_cast<std::size_t>(y) * raw.cols + x] = raw.at<std::uint8_t>(y, x) ? 1 : 0;
  return mask;
}

GrayImage resize_bilinear(const GrayImage& img, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("resize target must be positive");
  if (img.empty()) throw std::invalid_argument("cannot resize an empty image");
  if (width == img.width() && height == img.height()) return img;

  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double b = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double a = fx - x0;
      const double top = (1 - a) * img.at(x0, y0) + a * img.at(x1, y0);
      const double bottom = (1 - a) * img.at(x0, y1) + a * img.at(x1, y1);
      out[static_cast<std::size_t>(y) * width + x] = std::clamp((1 - b) * top + b * bottom, 0.0, 1.0);
    }
  }
  return GrayImage(width, height, std::move(out));
}

ScalePyramid build_pyramid(const GrayImage& img, const PyramidOptions& options) {
  if (img.empty()) throw std::invalid_argument("cannot build a pyramid of an empty image");
  if (!(options.s_min <= options.s_max)) throw std::invalid_argument("s_min must not exceed s_max");
  if (!(options.step > 0)) throw std::invalid_argument("pyramid step must be positive");
  if (!(options.max_area > 0)) throw std::invalid_argument("max_area must be positive");

  ScalePyramid pyramid{img.width(), img.height(), {}};
  const auto count =
      static_cast<int>(std::floor((options.s_max - options.s_min) / options.step + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) {
    const double s = options.s_min + i * options.step;
    const double factor = std::exp2(s);
    const int w = std::max(1, static_cast<int>(std::lround(img.width() * factor)));
    const int h = std::max(1, static_cast<int>(std::lround(img.height() * factor)));
    if (static_cast<double>(w) * h > options.max_area) continue;
    pyramid.levels.push_back({factor, s == 0.0 ? img : resize_bilinear(img, w, h)});
  }
  if (pyramid.levels.empty()) throw Error("every pyramid level exceeds the area cap");
  return pyramid;
}

}  // namespace texbank
