#include "texbank/descriptors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace texbank {
namespace {

constexpr int kLbpUniformBins = 58;

std::uint32_t grid_count(int extent, int receptive_field, int stride) {
  return static_cast<std::uint32_t>((extent - receptive_field) / stride + 1);
}

std::array<int, 256> make_uniform_table() {
  std::array<int, 256> table{};
  int next = 0;
  for (unsigned code = 0; code < 256; ++code) {
    int transitions = 0;
    for (int b = 0; b < 8; ++b) {
      const unsigned cur = (code >> b) & 1u;
      const unsigned nxt = (code >> ((b + 1) % 8)) & 1u;
      transitions += cur != nxt;
    }
    table[code] = transitions <= 2 ? next++ : kLbpUniformBins;
  }
  return table;
}

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

double sample_bilinear(const GrayImage& img, double fx, double fy) {
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double a = fx - x0;
  const double b = fy - y0;
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double top = (1 - a) * img.at(x0, y0) + a * img.at(x1, y0);
  const double bottom = (1 - a) * img.at(x0, y1) + a * img.at(x1, y1);
  return (1 - b) * top + b * bottom;
}

// Separable triangular window of half-width `half`, zero outside the image.
std::vector<double> triangle_filter(const std::vector<double>& in, int w, int h, int half) {
  std::vector<double> weights(2 * half - 1);
  for (int d = -(half - 1); d <= half - 1; ++d)
    weights[d + half - 1] = 1.0 - std::abs(d) / static_cast<double>(half);

  std::vector<double> tmp(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -(half - 1); d <= half - 1; ++d) {
        const int xx = x + d;
        if (xx >= 0 && xx < w) acc += weights[d + half - 1] * in[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  std::vector<double> out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -(half - 1); d <= half - 1; ++d) {
        const int yy = y + d;
        if (yy >= 0 && yy < h) acc += weights[d + half - 1] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

}  // namespace

void DescriptorField::validate() const {
  if (stride < 1) throw FormatError("descriptor field stride must be at least 1");
  if (data.size() != count() * dim) throw FormatError("descriptor field size mismatch");
  for (double v : data)
    if (!std::isfinite(v)) throw FormatError("descriptor field contains non-finite values");
  if (!(scale_factor > 0) || !std::isfinite(scale_factor))
    throw FormatError("descriptor field scale factor must be positive");
}

DescriptorSample to_sample(const DescriptorField& field) {
  field.validate();
  DescriptorSample sample;
  sample.descriptors.resize(static_cast<Index>(field.count()), field.dim);
  sample.positions.reserve(field.count());
  Index row = 0;
  for (std::uint32_t j = 0; j < field.grid_h; ++j) {
    for (std::uint32_t i = 0; i < field.grid_w; ++i, ++row) {
      const double* d = field.descriptor(i, j);
      for (std::uint32_t c = 0; c < field.dim; ++c) sample.descriptors(row, c) = d[c];
      sample.positions.push_back({(field.offset + static_cast<double>(i) * field.stride) / field.scale_factor,
                                  (field.offset + static_cast<double>(j) * field.stride) / field.scale_factor,
                                  field.scale_factor});
    }
  }
  auto extent = [&](std::uint32_t n) {
    if (n == 0) return 0;
    const double span = static_cast<double>(n - 1) * field.stride + field.receptive_field;
    return static_cast<int>(std::lround(span / field.scale_factor));
  };
  sample.image_width = extent(field.grid_w);
  sample.image_height = extent(field.grid_h);
  return sample;
}

DescriptorSample concatenate(const std::vector<DescriptorSample>& parts) {
  Index rows = 0;
  Index dim = -1;
  DescriptorSample out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (dim >= 0 && p.dim() != dim) throw std::invalid_argument("descriptor dimensions differ");
    dim = p.dim();
    rows += p.size();
  }
  out.descriptors.resize(rows, std::max<Index>(dim, 0));
  Index at = 0;
  for (const auto& p : parts) {
    out.image_width = std::max(out.image_width, p.image_width);
    out.image_height = std::max(out.image_height, p.image_height);
    if (p.empty()) continue;
    out.descriptors.middleRows(at, p.size()) = p.descriptors;
    out.positions.insert(out.positions.end(), p.positions.begin(), p.positions.end());
    at += p.size();
  }
  return out;
}

DescriptorSample select(const DescriptorSample& sample, const std::vector<Index>& rows) {
  DescriptorSample out;
  out.image_width = sample.image_width;
  out.image_height = sample.image_height;
  out.descriptors.resize(static_cast<Index>(rows.size()), sample.dim());
  out.positions.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.descriptors.row(static_cast<Index>(k)) = sample.descriptors.row(rows[k]);
    if (!sample.positions.empty()) out.positions.push_back(sample.positions[static_cast<std::size_t>(rows[k])]);
  }
  return out;
}

DescriptorField extract_patches(const GrayImage& img, int size, int stride) {
  if (size <= 0 || size % 2 == 0) throw std::invalid_argument("patch size must be odd");
  if (stride < 1) throw std::invalid_argument("patch stride must be at least 1");
  if (img.width() < size || img.height() < size) throw Error("image is smaller than the patch");

  DescriptorField field;
  field.grid_w = grid_count(img.width(), size, stride);
  field.grid_h = grid_count(img.height(), size, stride);
  field.dim = static_cast<std::uint32_t>(size * size);
  field.stride = static_cast<std::uint32_t>(stride);
  field.offset = static_cast<std::uint32_t>(size / 2);
  field.receptive_field = static_cast<std::uint32_t>(size);
  field.data.resize(field.count() * field.dim);
  for (std::uint32_t j = 0; j < field.grid_h; ++j) {
    for (std::uint32_t i = 0; i < field.grid_w; ++i) {
      double* d = field.descriptor(i, j);
      const int x0 = static_cast<int>(i) * stride;
      const int y0 = static_cast<int>(j) * stride;
      for (int dy = 0; dy < size; ++dy)
        for (int dx = 0; dx < size; ++dx) *d++ = img.at(x0 + dx, y0 + dy);
    }
  }
  return field;
}

int lbp_uniform_bin(unsigned code) {
  static const auto table = make_uniform_table();
  return table[code & 0xffu];
}

int lbp_bin_count(const LbpOptions& options) {
  return options.keep_catch_all ? kLbpUniformBins + 1 : kLbpUniformBins;
}

std::vector<int> lbp_codes(const GrayImage& img, const LbpOptions& options) {
  if (options.neighbors != 8) throw std::invalid_argument("LBP supports 8 neighbours");
  if (options.radius < 1) throw std::invalid_argument("LBP radius must be at least 1");
  const int r = options.radius;
  if (img.width() <= 2 * r || img.height() <= 2 * r) throw Error("LBP radius too large for image");

  std::array<double, 8> dx{};
  std::array<double, 8> dy{};
  for (int j = 0; j < 8; ++j) {
    const double angle = 2 * std::numbers::pi * j / 8;
    dx[j] = snap(r * std::cos(angle));
    dy[j] = snap(-r * std::sin(angle));
    if (!options.bilinear) {
      dx[j] = std::round(dx[j]);
      dy[j] = std::round(dy[j]);
    }
  }

  const int w = img.width() - 2 * r;
  const int h = img.height() - 2 * r;
  std::vector<int> codes(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int cx = x + r;
      const int cy = y + r;
      const double center = img.at(cx, cy);
      unsigned code = 0;
      for (int j = 0; j < 8; ++j) {
        const double neighbor = sample_bilinear(img, cx + dx[j], cy + dy[j]);
        if (center > neighbor) code |= 1u << j;
      }
      codes[static_cast<std::size_t>(y) * w + x] = lbp_uniform_bin(code);
    }
  }
  return codes;
}

DescriptorField extract_lbp(const GrayImage& img, const LbpOptions& options) {
  if (options.cell < 1 || options.cell < options.radius)
    throw std::invalid_argument("LBP cell must be at least the radius");
  const auto codes = lbp_codes(img, options);
  const int r = options.radius;
  const int w = img.width() - 2 * r;
  const int h = img.height() - 2 * r;
  if (w < options.cell || h < options.cell) throw Error("image too small for one LBP cell");

  const int cell = options.cell;
  const int bins = lbp_bin_count(options);
  DescriptorField field;
  field.grid_w = grid_count(w, cell, cell);
  field.grid_h = grid_count(h, cell, cell);
  field.dim = static_cast<std::uint32_t>(bins);
  field.stride = static_cast<std::uint32_t>(cell);
  field.receptive_field = static_cast<std::uint32_t>(cell + 2 * r);
  field.offset = field.receptive_field / 2;
  field.data.assign(field.count() * field.dim, 0.0);
  for (std::uint32_t j = 0; j < field.grid_h; ++j) {
    for (std::uint32_t i = 0; i < field.grid_w; ++i) {
      double* hist = field.descriptor(i, j);
      double total = 0.0;
      for (int y = 0; y < cell; ++y) {
        for (int x = 0; x < cell; ++x) {
          const int bin = codes[static_cast<std::size_t>(j * cell + y) * w + (i * cell + x)];
          if (bin < bins) {
            hist[bin] += 1.0;
            total += 1.0;
          }
        }
      }
      if (total > 0)
        for (int b = 0; b < bins; ++b) hist[b] /= total;
    }
  }
  return field;
}

DescriptorField extract_dsift(const GrayImage& img, const DsiftOptions& options) {
  constexpr int kSpatialBins = 4;
  constexpr int kOrientations = 8;
  const int bin = options.bin_size;
  if (bin < 2 || bin % 2 != 0) throw std::invalid_argument("dSIFT bin size must be even");
  if (options.step < 1) throw std::invalid_argument("dSIFT step must be at least 1");
  if (!(options.clamp > 0)) throw std::invalid_argument("dSIFT clamp must be positive");
  const int rf = (kSpatialBins + 1) * bin;
  const int w = img.width();
  const int h = img.height();
  if (w < rf || h < rf) throw Error("image is smaller than the dSIFT receptive field");

  // Orientation-binned gradient magnitude, linearly interpolated in angle.
  const auto n = static_cast<std::size_t>(w) * h;
  std::vector<std::vector<double>> maps(kOrientations, std::vector<double>(n, 0.0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = x == 0       ? img.at(1, y) - img.at(0, y)
                        : x == w - 1 ? img.at(w - 1, y) - img.at(w - 2, y)
                                     : 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      const double gy = y == 0       ? img.at(x, 1) - img.at(x, 0)
                        : y == h - 1 ? img.at(x, h - 1) - img.at(x, h - 2)
                                     : 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0) angle += 2 * std::numbers::pi;
      const double t = angle / (2 * std::numbers::pi) * kOrientations;
      const int o0 = static_cast<int>(std::floor(t)) % kOrientations;
      const double frac = t - std::floor(t);
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      maps[o0][p] += (1 - frac) * mag;
      maps[(o0 + 1) % kOrientations][p] += frac * mag;
    }
  }
  for (auto& m : maps) m = triangle_filter(m, w, h, bin);

  DescriptorField field;
  field.grid_w = grid_count(w, rf, options.step);
  field.grid_h = grid_count(h, rf, options.step);
  field.dim = kSpatialBins * kSpatialBins * kOrientations;
  field.stride = static_cast<std::uint32_t>(options.step);
  field.offset = static_cast<std::uint32_t>(rf / 2);
  field.receptive_field = static_cast<std::uint32_t>(rf);
  field.data.assign(field.count() * field.dim, 0.0);

  const int half_span = 3 * bin / 2;  // bin centres sit at c - 1.5B ... c + 1.5B
  for (std::uint32_t j = 0; j < field.grid_h; ++j) {
    for (std::uint32_t i = 0; i < field.grid_w; ++i) {
      double* d = field.descriptor(i, j);
      const int cx = static_cast<int>(field.offset + i * field.stride);
      const int cy = static_cast<int>(field.offset + j * field.stride);
      for (int by = 0; by < kSpatialBins; ++by) {
        const int py = cy - half_span + by * bin;
        for (int bx = 0; bx < kSpatialBins; ++bx) {
          const int px = cx - half_span + bx * bin;
          const std::size_t p = static_cast<std::size_t>(py) * w + px;
          for (int o = 0; o < kOrientations; ++o)
            d[(by * kSpatialBins + bx) * kOrientations + o] = maps[o][p];
        }
      }
      Eigen::Map<Vector> v(d, field.dim);
      const double norm = v.norm();
      if (norm == 0.0) continue;
      v /= norm;
      v = v.cwiseMin(options.clamp);
      v /= v.norm();
    }
  }
  return field;
}

std::vector<DescriptorField> extract_levels(const ScalePyramid& pyramid, const Extractor& extractor) {
  std::vector<DescriptorField> fields;
  fields.reserve(pyramid.levels.size());
  for (const auto& level : pyramid.levels) {
    auto field = extractor(level.image);
    field.scale_factor = level.scale_factor;
    fields.push_back(std::move(field));
  }
  return fields;
}

DescriptorSample fields_to_sample(const std::vector<DescriptorField>& fields) {
  std::vector<DescriptorSample> parts;
  parts.reserve(fields.size());
  for (const auto& f : fields) parts.push_back(to_sample(f));
  return concatenate(parts);
}

DescriptorSample multiscale_collect(const ScalePyramid& pyramid, const Extractor& extractor) {
  auto sample = fields_to_sample(extract_levels(pyramid, extractor));
  sample.image_width = pyramid.base_width;
  sample.image_height = pyramid.base_height;
  return sample;
}

}  // namespace texbank
