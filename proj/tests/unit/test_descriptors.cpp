#include "texbank/descriptors.hpp"

#include "generators.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

using namespace texbank;
namespace tt = texbank::testing;

namespace {

std::uint32_t expected_grid(int extent, int rf, int stride) { return static_cast<std::uint32_t>((extent - rf) / stride + 1); }

double bilinear(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto px = [&](int xx, int yy) {
    xx = std::min(xx, img.width() - 1);
    yy = std::min(yy, img.height() - 1);
    return img.at(xx, yy);
  };
  return (1 - fy) * ((1 - fx) * px(x0, y0) + fx * px(x0 + 1, y0)) + fy * ((1 - fx) * px(x0, y0 + 1) + fx * px(x0 + 1, y0 + 1));
}

int transitions(unsigned code) {
  int t = 0;
  for (int b = 0; b < 8; ++b) t += ((code >> b) & 1u) != ((code >> ((b + 1) % 8)) & 1u);
  return t;
}

// Bit string of the centre against its 8 circular neighbours at radius 1.
unsigned lbp_bits_oracle(const GrayImage& img, int cx, int cy) {
  const double s = std::sqrt(0.5);
  const double dx[8] = {1, s, 0, -s, -1, -s, 0, s};
  const double dy[8] = {0, -s, -1, -s, 0, s, 1, s};
  unsigned code = 0;
  for (int j = 0; j < 8; ++j)
    if (img.at(cx, cy) > bilinear(img, cx + dx[j], cy + dy[j])) code |= 1u << j;
  return code;
}

GrayImage transformed(const GrayImage& img, double (*fn)(double)) {
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (auto& v : px) v = fn(v);
  return GrayImage(img.width(), img.height(), px);
}

}  // namespace

TEST(Patches, Dimensions) {
  const GrayImage img = GrayImage::filled(10, 10, 0.25);
  EXPECT_EQ(extract_patches(img, 3).dim, 9u);
  EXPECT_EQ(extract_patches(img, 7).dim, 49u);
  const auto f = extract_patches(img, 3);
  for (double v : f.data) EXPECT_EQ(v, 0.25);
}

TEST(Patches, RampWindowsByHand) {
  std::vector<double> px(25);
  for (int i = 0; i < 25; ++i) px[i] = i / 24.0;
  const GrayImage img(5, 5, px);
  const auto f = extract_patches(img, 3);
  ASSERT_EQ(f.grid_w, 3u);
  ASSERT_EQ(f.grid_h, 3u);
  for (std::uint32_t j = 0; j < 3; ++j)
    for (std::uint32_t i = 0; i < 3; ++i) {
      const double* d = f.descriptor(i, j);
      int k = 0;
      for (std::uint32_t y = j; y < j + 3; ++y)
        for (std::uint32_t x = i; x < i + 3; ++x) EXPECT_EQ(d[k++], (y * 5 + x) / 24.0);
    }
  EXPECT_EQ(f.offset, 1u);
}

TEST(Patches, Errors) {
  EXPECT_THROW(extract_patches(GrayImage::filled(5, 5, 0), 4), std::invalid_argument);
  EXPECT_THROW(extract_patches(GrayImage::filled(5, 5, 0), 7), Error);
}

TEST(Lbp, BinCount) {
  EXPECT_EQ(lbp_bin_count({}), 59);
  LbpOptions o;
  o.keep_catch_all = false;
  EXPECT_EQ(lbp_bin_count(o), 58);
  int uniform = 0;
  for (unsigned c = 0; c < 256; ++c) uniform += lbp_uniform_bin(c) < 58;
  EXPECT_EQ(uniform, 58);
}

TEST(Lbp, ConstantImageIsOneHot) {
  const auto f = extract_lbp(GrayImage::filled(18, 18, 0.4));
  ASSERT_EQ(f.dim, 59u);
  for (std::uint32_t j = 0; j < f.grid_h; ++j)
    for (std::uint32_t i = 0; i < f.grid_w; ++i) {
      const double* h = f.descriptor(i, j);
      EXPECT_EQ(h[lbp_uniform_bin(0)], 1.0);
      double sum = 0;
      for (int b = 0; b < 59; ++b) sum += h[b];
      EXPECT_EQ(sum, 1.0);
    }
}

TEST(Lbp, CheckerboardMatchesBitOracle) {
  std::vector<double> px(16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) px[y * 4 + x] = (x + y) % 2;
  const GrayImage img(4, 4, px);
  const auto codes = lbp_codes(img, {});
  ASSERT_EQ(codes.size(), 4u);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      const unsigned bits = lbp_bits_oracle(img, x + 1, y + 1);
      const int expected = transitions(bits) <= 2 ? lbp_uniform_bin(bits) : 58;
      EXPECT_EQ(codes[y * 2 + x], expected);
    }
}

TEST(Lbp, RandomImagesMatchBitOracle) {
  tt::Rng rng(11);
  const GrayImage img = tt::random_image(rng, 9, 7);
  const auto codes = lbp_codes(img, {});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      const unsigned bits = lbp_bits_oracle(img, x + 1, y + 1);
      EXPECT_EQ(codes[y * 7 + x], transitions(bits) <= 2 ? lbp_uniform_bin(bits) : 58);
    }
}

TEST(Lbp, NearestSamplingInvariantToMonotoneTransforms) {
  LbpOptions nearest;
  nearest.bilinear = false;
  tt::Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const GrayImage img = tt::random_image(rng, 12, 12);
    const auto base = lbp_codes(img, nearest);
    EXPECT_EQ(lbp_codes(transformed(img, [](double v) { return v * v * v; }), nearest), base);
    EXPECT_EQ(lbp_codes(transformed(img, [](double v) { return std::sqrt(v); }), nearest), base);
  }
}

TEST(Lbp, BilinearSamplingInvariantToIncreasingAffineMaps) {
  tt::Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const GrayImage img = tt::random_image(rng, 12, 12);
    const auto base = lbp_codes(img, {});
    EXPECT_EQ(lbp_codes(transformed(img, [](double v) { return 0.5 * v + 0.25; }), {}), base);
  }
}

TEST(Lbp, Errors) {
  LbpOptions big;
  big.radius = 3;
  EXPECT_THROW(lbp_codes(GrayImage::filled(6, 6, 0), big), Error);
  LbpOptions sixteen;
  sixteen.neighbors = 16;
  EXPECT_THROW(lbp_codes(GrayImage::filled(6, 6, 0), sixteen), std::invalid_argument);
}

TEST(Dsift, DimensionAndReceptiveField) {
  tt::Rng rng(14);
  const auto f = extract_dsift(tt::random_image(rng, 48, 44));
  EXPECT_EQ(f.dim, 128u);
  EXPECT_EQ(f.receptive_field, 40u);
  EXPECT_EQ(f.grid_w, expected_grid(48, 40, 2));
  EXPECT_EQ(f.grid_h, expected_grid(44, 40, 2));
}

TEST(Dsift, ConstantImageGivesZeroDescriptors) {
  const auto f = extract_dsift(GrayImage::filled(40, 40, 0.3));
  ASSERT_EQ(f.count(), 1u);
  for (double v : f.data) EXPECT_EQ(v, 0.0);
}

TEST(Dsift, NormsAreZeroOrOne) {
  tt::Rng rng(15);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> px(50 * 46, 0.5);
    // Half random, half flat so both cases occur.
    for (int y = 0; y < 46; ++y)
      for (int x = 0; x < 20; ++x) px[y * 50 + x] = tt::uniform_real(rng, 0, 1);
    const auto f = extract_dsift(GrayImage(50, 46, px), {2, 4, 0.2});
    const auto s = to_sample(f);
    for (Index i = 0; i < s.size(); ++i) {
      const double n = s.descriptors.row(i).norm();
      EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) < 1e-6) << n;
      EXPECT_LE(s.descriptors.row(i).maxCoeff(), 1.0);
    }
  }
}

TEST(Dsift, Errors) {
  EXPECT_THROW(extract_dsift(GrayImage::filled(39, 60, 0)), Error);
  EXPECT_THROW(extract_dsift(GrayImage::filled(60, 60, 0), {2, 7, 0.2}), std::invalid_argument);
}

TEST(Extractors, GridCountsFollowClosedForm) {
  tt::Rng rng(16);
  for (int trial = 0; trial < 15; ++trial) {
    const int w = tt::uniform_int(rng, 41, 70);
    const int h = tt::uniform_int(rng, 41, 70);
    const int stride = tt::uniform_int(rng, 1, 4);
    const GrayImage img = tt::random_image(rng, w, h);
    const auto p = extract_patches(img, 7, stride);
    EXPECT_EQ(p.grid_w, expected_grid(w, 7, stride));
    EXPECT_EQ(p.grid_h, expected_grid(h, 7, stride));
    const auto d = extract_dsift(img, {stride, 8, 0.2});
    EXPECT_EQ(d.grid_w, expected_grid(w, 40, stride));
    EXPECT_EQ(d.grid_h, expected_grid(h, 40, stride));
    LbpOptions lo;
    lo.cell = tt::uniform_int(rng, 2, 9);
    const auto l = extract_lbp(img, lo);
    EXPECT_EQ(l.grid_w, expected_grid(w, static_cast<int>(l.receptive_field), lo.cell));
    EXPECT_EQ(l.grid_h, expected_grid(h, static_cast<int>(l.receptive_field), lo.cell));
    EXPECT_EQ(to_sample(l).size(), static_cast<Index>(l.count()));
  }
}

TEST(Sample, PositionsMapBackThroughScale) {
  DescriptorField f;
  f.grid_w = 12;
  f.grid_h = 12;
  f.dim = 1;
  f.stride = 1;
  f.offset = 0;
  f.receptive_field = 1;
  f.scale_factor = 0.5;
  f.data.assign(144, 0.0);
  const auto s = to_sample(f);
  EXPECT_EQ(s.positions[10 * 12 + 10], (Position{20.0, 20.0, 0.5}));
}

TEST(Multiscale, SingleLevelEqualsSingleScale) {
  tt::Rng rng(17);
  const GrayImage img = tt::random_image(rng, 20, 20);
  const Extractor ex = [](const GrayImage& g) { return extract_patches(g, 3, 2); };
  const auto pyr = build_pyramid(img, {0, 0, 1, 1e9});
  const auto ms = multiscale_collect(pyr, ex);
  const auto ss = to_sample(extract_patches(img, 3, 2));
  EXPECT_EQ(ms.descriptors, ss.descriptors);
  EXPECT_EQ(ms.positions, ss.positions);
}

TEST(Multiscale, CountsAddAndMatchPerLevelUnion) {
  tt::Rng rng(18);
  const GrayImage img = tt::random_image(rng, 24, 24);
  const Extractor ex = [](const GrayImage& g) { return extract_patches(g, 3, 1); };
  const auto pyr = build_pyramid(img, {-1, 0, 1, 1e9});
  ASSERT_EQ(pyr.levels.size(), 2u);
  const auto ms = multiscale_collect(pyr, ex);
  const auto a = to_sample(extract_patches(pyr.levels[0].image, 3, 1));
  const auto b = to_sample(extract_patches(pyr.levels[1].image, 3, 1));
  EXPECT_EQ(ms.size(), a.size() + b.size());
  EXPECT_EQ(ms.image_width, 24);
  EXPECT_EQ(ms.descriptors.topRows(a.size()), a.descriptors);
  EXPECT_EQ(ms.positions[0].x, a.positions[0].x / 0.5);
}

TEST(DescriptorIo, RoundTripIsBitExact) {
  tt::TempDir dir;
  tt::Rng rng(19);
  DescriptorField f;
  f.grid_w = 3;
  f.grid_h = 2;
  f.dim = 512;
  f.stride = 16;
  f.offset = 8;
  f.receptive_field = 196;
  f.scale_factor = 0.5;
  for (std::size_t i = 0; i < f.count() * f.dim; ++i) f.data.push_back(static_cast<float>(tt::uniform_real(rng, -3, 3)));
  save_descriptor_field(f, dir / "f.txdf");
  const auto g = load_descriptor_field(dir / "f.txdf");
  EXPECT_EQ(g.dim, 512u);
  EXPECT_EQ(g.data, f.data);
  EXPECT_EQ(g.scale_factor, 0.5);
  EXPECT_EQ(std::filesystem::file_size(dir / "f.txdf"), 4 + 4 * 7 + 4 + 4 * f.data.size());

  save_descriptor_fields({f, f}, dir / "two.txdf");
  EXPECT_EQ(load_descriptor_fields(dir / "two.txdf").size(), 2u);
}

TEST(DescriptorIo, RejectsCorruptFiles) {
  tt::TempDir dir;
  DescriptorField f;
  f.grid_w = 2;
  f.grid_h = 2;
  f.dim = 3;
  f.data.assign(12, 0.5);
  save_descriptor_field(f, dir / "ok.txdf");
  const auto size = std::filesystem::file_size(dir / "ok.txdf");
  std::filesystem::copy_file(dir / "ok.txdf", dir / "short.txdf");
  std::filesystem::resize_file(dir / "short.txdf", size - 3);
  EXPECT_THROW(load_descriptor_field(dir / "short.txdf"), FormatError);

  std::string bytes;
  {
    std::ifstream in(dir / "ok.txdf", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto mutate = [&](std::size_t at, std::string patch, const char* name) {
    std::string b = bytes;
    b.replace(at, patch.size(), patch);
    tt::write_text(dir / name, b);
    return dir / name;
  };
  EXPECT_THROW(load_descriptor_field(mutate(0, "TXDX", "magic.txdf")), FormatError);
  EXPECT_THROW(load_descriptor_field(mutate(4, std::string("\x02\0\0\0", 4), "ver.txdf")), FormatError);
  EXPECT_THROW(load_descriptor_field(mutate(36, std::string("\x00\x00\xc0\x7f", 4), "nan.txdf")), FormatError);
  tt::write_text(dir / "trailing.txdf", bytes + "x");
  EXPECT_THROW(load_descriptor_field(dir / "trailing.txdf"), FormatError);
  EXPECT_THROW(load_descriptor_field(dir / "missing.txdf"), Error);
}
