#pragma once

#include "texbank/image.hpp"
#include "texbank/types.hpp"

#include <vector>

namespace texbank {

enum class FilterFamily { Edge, Bar, LoG, Gaussian };

const char* to_string(FilterFamily family);

struct KernelInfo {
  FilterFamily family = FilterFamily::Gaussian;
  int orientation = 0;  // 0 for isotropic kernels
  int scale = 0;
  double sigma = 0.0;   // across-edge sigma for oriented kernels

  friend bool operator==(const KernelInfo&, const KernelInfo&) = default;
};

/// Odd square kernels. Derivative and LoG kernels are zero-mean with unit L1
/// norm; Gaussians sum to one.
struct FilterBank {
  int support = 0;
  std::vector<Matrix> kernels;
  std::vector<KernelInfo> info;

  std::size_t size() const { return kernels.size(); }
  std::size_t count(FilterFamily family) const;
};

struct LmOptions {
  std::vector<double> scales{1.0, 2.0, 4.0};
  int orientations = 6;
  int support = 49;
};

struct MrOptions {
  std::vector<double> scales{1.0, 2.0, 4.0};
  int orientations = 6;
  double isotropic_sigma = 10.0;
  int support = 49;
};

/// Leung-Malik bank: first and second Gaussian derivatives (elongation 3) at
/// every scale and orientation, LoG at sigma and 3 sigma over four octave
/// scales, and four Gaussians.
FilterBank make_lm(const LmOptions& options = {});

/// The 38-filter bank underlying MR8: edge and bar filters at three scales and
/// six orientations plus one Gaussian and one LoG.
FilterBank make_mr_bank(const MrOptions& options = {});

/// Dense responses, one channel per kernel. Channels are width x height,
/// row-major, for the valid region of the correlation.
struct FilterResponseField {
  int width = 0;
  int height = 0;
  int support = 0;
  std::vector<KernelInfo> info;
  std::vector<std::vector<double>> channels;

  double at(std::size_t channel, int x, int y) const {
    return channels[channel][static_cast<std::size_t>(y) * width + x];
  }
};

/// Valid-region 2-D correlation of the image with every kernel.
FilterResponseField apply_bank(const GrayImage& img, const FilterBank& bank);

struct DescriptorField;

/// Max over orientations for each oriented family x scale, followed by the
/// Gaussian and LoG responses: 8-D descriptors ordered
/// [edge s0..s2, bar s0..s2, gaussian, log].
DescriptorField mr8_collapse(const FilterResponseField& field);

}  // namespace texbank
