#include "texbank/filterbank.hpp"
#include "texbank/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace texbank {
namespace {

constexpr double kElongation = 3.0;

void check_support(int support) {
  if (support <= 0 || support % 2 == 0)
    throw std::invalid_argument("filter support must be a positive odd number");
}

void check_sigma(double sigma) {
  if (!(sigma > 0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
}

double gauss(double x, double sigma) {
  return std::exp(-x * x / (2 * sigma * sigma)) / (std::sqrt(2 * std::numbers::pi) * sigma);
}

// Zero mean, unit L1 norm.
void normalize_derivative(Matrix& k) {
  k.array() -= k.mean();
  const double l1 = k.cwiseAbs().sum();
  if (l1 > 0) k /= l1;
}

Matrix oriented_kernel(int support, double sigma, double theta, int order) {
  const int half = support / 2;
  Matrix k(support, support);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double su = kElongation * sigma;
  for (int y = -half; y <= half; ++y) {
    for (int x = -half; x <= half; ++x) {
      const double u = x * c + y * s;
      const double v = -x * s + y * c;
      double across = gauss(v, sigma);
      if (order == 1) {
        across *= -v / (sigma * sigma);
      } else {
        across *= (v * v - sigma * sigma) / (sigma * sigma * sigma * sigma);
      }
      k(y + half, x + half) = gauss(u, su) * across;
    }
  }
  normalize_derivative(k);
  return k;
}

Matrix gaussian_kernel(int support, double sigma) {
  const int half = support / 2;
  Matrix k(support, support);
  for (int y = -half; y <= half; ++y)
    for (int x = -half; x <= half; ++x) k(y + half, x + half) = gauss(x, sigma) * gauss(y, sigma);
  k /= k.sum();
  return k;
}

Matrix log_kernel(int support, double sigma) {
  const int half = support / 2;
  Matrix k(support, support);
  const double s2 = sigma * sigma;
  for (int y = -half; y <= half; ++y) {
    for (int x = -half; x <= half; ++x) {
      const double r2 = x * x + y * y;
      k(y + half, x + half) = (r2 - 2 * s2) / (s2 * s2) * gauss(x, sigma) * gauss(y, sigma);
    }
  }
  normalize_derivative(k);
  return k;
}

void add_oriented(FilterBank& bank, FilterFamily family, const std::vector<double>& scales,
                  int orientations) {
  const int order = family == FilterFamily::Edge ? 1 : 2;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    for (int o = 0; o < orientations; ++o) {
      const double theta = std::numbers::pi * o / orientations;
      bank.kernels.push_back(oriented_kernel(bank.support, scales[s], theta, order));
      bank.info.push_back({family, o, static_cast<int>(s), scales[s]});
    }
  }
}

}  // namespace

const char* to_string(FilterFamily family) {
  switch (family) {
    case FilterFamily::Edge: return "edge";
    case FilterFamily::Bar: return "bar";
    case FilterFamily::LoG: return "log";
    case FilterFamily::Gaussian: return "gaussian";
  }
  return "?";
}

std::size_t FilterBank::count(FilterFamily family) const {
  return static_cast<std::size_t>(std::count_if(
      info.begin(), info.end(), [family](const KernelInfo& k) { return k.family == family; }));
}

FilterBank make_lm(const LmOptions& options) {
  check_support(options.support);
  if (options.scales.size() != 3) throw std::invalid_argument("LM bank needs three base scales");
  if (options.orientations <= 0) throw std::invalid_argument("orientation count must be positive");
  for (double s : options.scales) check_sigma(s);

  FilterBank bank;
  bank.support = options.support;
  add_oriented(bank, FilterFamily::Edge, options.scales, options.orientations);
  add_oriented(bank, FilterFamily::Bar, options.scales, options.orientations);

  // Isotropic filters span the base scales plus one more octave.
  auto iso = options.scales;
  iso.push_back(2.0 * options.scales.back());
  int idx = 0;
  for (double factor : {1.0, 3.0}) {
    for (double s : iso) {
      bank.kernels.push_back(log_kernel(bank.support, factor * s));
      bank.info.push_back({FilterFamily::LoG, 0, idx++, factor * s});
    }
  }
  for (std::size_t i = 0; i < iso.size(); ++i) {
    bank.kernels.push_back(gaussian_kernel(bank.support, iso[i]));
    bank.info.push_back({FilterFamily::Gaussian, 0, static_cast<int>(i), iso[i]});
  }
  return bank;
}

FilterBank make_mr_bank(const MrOptions& options) {
  check_support(options.support);
  if (options.scales.empty()) throw std::invalid_argument("MR bank needs at least one scale");
  if (options.orientations <= 0) throw std::invalid_argument("orientation count must be positive");
  for (double s : options.scales) check_sigma(s);
  check_sigma(options.isotropic_sigma);

  FilterBank bank;
  bank.support = options.support;
  add_oriented(bank, FilterFamily::Edge, options.scales, options.orientations);
  add_oriented(bank, FilterFamily::Bar, options.scales, options.orientations);
  bank.kernels.push_back(gaussian_kernel(bank.support, options.isotropic_sigma));
  bank.info.push_back({FilterFamily::Gaussian, 0, 0, options.isotropic_sigma});
  bank.kernels.push_back(log_kernel(bank.support, options.isotropic_sigma));
  bank.info.push_back({FilterFamily::LoG, 0, 0, options.isotropic_sigma});
  return bank;
}

FilterResponseField apply_bank(const GrayImage& img, const FilterBank& bank) {
  const int k = bank.support;
  check_support(k);
  if (bank.kernels.size() != bank.info.size())
    throw std::invalid_argument("filter bank metadata does not match its kernels");
  if (img.width() < k || img.height() < k)
    throw Error("image is smaller than the filter support");

  FilterResponseField field;
  field.width = img.width() - k + 1;
  field.height = img.height() - k + 1;
  field.support = k;
  field.info = bank.info;
  field.channels.reserve(bank.kernels.size());

  const auto w = static_cast<std::size_t>(field.width);
  for (const Matrix& kernel : bank.kernels) {
    if (kernel.rows() != k || kernel.cols() != k)
      throw std::invalid_argument("kernel size does not match the bank support");
    std::vector<double> out(w * field.height, 0.0);
    for (int y = 0; y < field.height; ++y) {
      double* dst = out.data() + y * w;
      for (int ky = 0; ky < k; ++ky) {
        const double* src_row = img.row(y + ky).data();
        for (int kx = 0; kx < k; ++kx) {
          const double weight = kernel(ky, kx);
          const double* src = src_row + kx;
          for (std::size_t x = 0; x < w; ++x) dst[x] += weight * src[x];
        }
      }
    }
    field.channels.push_back(std::move(out));
  }
  return field;
}

DescriptorField mr8_collapse(const FilterResponseField& field) {
  // (family, scale) -> channels
  std::map<std::pair<FilterFamily, int>, std::vector<std::size_t>> groups;
  int gaussian = -1;
  int log = -1;
  if (field.info.size() != field.channels.size())
    throw std::invalid_argument("response metadata does not match its channels");
  for (std::size_t c = 0; c < field.info.size(); ++c) {
    const auto& info = field.info[c];
    switch (info.family) {
      case FilterFamily::Edge:
      case FilterFamily::Bar:
        groups[{info.family, info.scale}].push_back(c);
        break;
      case FilterFamily::Gaussian:
        if (gaussian >= 0) throw std::invalid_argument("MR layout has one Gaussian channel");
        gaussian = static_cast<int>(c);
        break;
      case FilterFamily::LoG:
        if (log >= 0) throw std::invalid_argument("MR layout has one LoG channel");
        log = static_cast<int>(c);
        break;
    }
  }
  if (gaussian < 0 || log < 0) throw std::invalid_argument("MR layout needs Gaussian and LoG");

  std::vector<std::vector<std::size_t>> oriented;
  std::size_t orientations = 0;
  for (FilterFamily family : {FilterFamily::Edge, FilterFamily::Bar}) {
    for (int s = 0; s < 3; ++s) {
      auto it = groups.find({family, s});
      if (it == groups.end()) throw std::invalid_argument("MR layout needs three scales per family");
      if (orientations == 0) orientations = it->second.size();
      if (it->second.size() != orientations)
        throw std::invalid_argument("MR layout needs equal orientation counts");
      oriented.push_back(it->second);
    }
  }
  if (groups.size() != 6) throw std::invalid_argument("unexpected oriented channels in MR layout");

  DescriptorField out;
  out.grid_w = static_cast<std::uint32_t>(field.width);
  out.grid_h = static_cast<std::uint32_t>(field.height);
  out.dim = 8;
  out.stride = 1;
  out.offset = static_cast<std::uint32_t>(field.support / 2);
  out.receptive_field = static_cast<std::uint32_t>(field.support);
  out.data.resize(out.count() * out.dim);

  const std::size_t n = out.count();
  for (std::size_t p = 0; p < n; ++p) {
    double* d = out.data.data() + p * 8;
    for (std::size_t g = 0; g < 6; ++g) {
      double best = field.channels[oriented[g][0]][p];
      for (std::size_t c : oriented[g]) best = std::max(best, field.channels[c][p]);
      d[g] = best;
    }
    d[6] = field.channels[static_cast<std::size_t>(gaussian)][p];
    d[7] = field.channels[static_cast<std::size_t>(log)][p];
  }
  return out;
}

}  // namespace texbank
