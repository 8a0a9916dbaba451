#include "texbank/encoders.hpp"

#include "generators.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace texbank;
namespace tt = texbank::testing;

namespace {

DescriptorSample sample_of(const Matrix& x) {
  DescriptorSample s;
  s.descriptors = x;
  s.positions.assign(static_cast<std::size_t>(x.rows()), Position{});
  s.image_width = 10;
  s.image_height = 10;
  return s;
}

DescriptorSample duplicated(const DescriptorSample& s) { return concatenate({s, s}); }

DescriptorSample permuted(const DescriptorSample& s, tt::Rng& rng) {
  std::vector<Index> rows(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) rows[i] = i;
  std::shuffle(rows.begin(), rows.end(), rng);
  return select(s, rows);
}

void expect_close(const Vector& a, const Vector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (Index i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

}  // namespace

TEST(Bovw, ExactMatchIsOneHot) {
  Codebook cb{Matrix(4, 2)};
  cb.centers << 0, 0, 1, 0, 0, 1, 1, 1;
  Matrix f(1, 2);
  f << 1, 0;
  const auto v = encode_bovw(sample_of(f), cb);
  EXPECT_EQ(v.values, (Vector(4) << 0, 1, 0, 0).finished());
  EXPECT_EQ(v.kind, EncoderKind::Bovw);
}

TEST(Bovw, CopiesDoNotChangeHistogram) {
  tt::Rng rng(1);
  const Codebook cb = tt::random_codebook(rng, 3, 2);
  const Matrix one = tt::random_matrix(rng, 1, 2);
  Matrix many = one.replicate(7, 1);
  EXPECT_EQ(encode_bovw(sample_of(many), cb).values, encode_bovw(sample_of(one), cb).values);
}

TEST(Bovw, MatchesNearestCenterCounting) {
  tt::Rng rng(2);
  const Codebook cb = tt::random_codebook(rng, 3, 2);
  const Matrix x = tt::random_matrix(rng, 20, 2, -2, 2);
  expect_close(encode_bovw(sample_of(x), cb).values, tt::bovw_oracle(x, cb.centers), 1e-15);
}

TEST(Kcb, HardAssignmentLimit) {
  tt::Rng rng(3);
  const Codebook cb = tt::random_codebook(rng, 4, 3);
  const Matrix x = tt::random_matrix(rng, 15, 3, -2, 2);
  expect_close(encode_kcb(sample_of(x), cb, 1e6).values, encode_bovw(sample_of(x), cb).values, 1e-9);
}

TEST(Kcb, EquidistantSplitsEvenly) {
  Codebook cb{Matrix(2, 1)};
  cb.centers << -1, 1;
  const auto v = encode_kcb(sample_of(Matrix::Zero(1, 1)), cb, 0.7);
  EXPECT_DOUBLE_EQ(v.values[0], 0.5);
  EXPECT_DOUBLE_EQ(v.values[1], 0.5);
}

TEST(Kcb, MatchesSoftmaxOracle) {
  tt::Rng rng(4);
  const Codebook cb = tt::random_codebook(rng, 4, 2);
  const Matrix x = tt::random_matrix(rng, 10, 2, -2, 2);
  expect_close(encode_kcb(sample_of(x), cb, 0.5).values, tt::kcb_oracle(x, cb.centers, 0.5), 1e-12);
  EXPECT_THROW(encode_kcb(sample_of(x), cb, 0.0), std::invalid_argument);
}

TEST(Llc, DescriptorOnCenterIsOneHot) {
  tt::Rng rng(5);
  const Codebook cb = tt::random_codebook(rng, 6, 3);
  for (Index r : {1, 3, 5}) {
    const Vector v = encode_llc(sample_of(cb.centers.row(2)), cb, r).values;
    Vector expected = Vector::Zero(6);
    expected[2] = 1.0;
    expect_close(v, expected, 1e-12);
  }
}

TEST(Llc, SingleNeighbourMarksUsedWords) {
  tt::Rng rng(6);
  const Codebook cb = tt::random_codebook(rng, 5, 2);
  const Matrix x = tt::random_matrix(rng, 12, 2, -2, 2);
  const Vector v = encode_llc(sample_of(x), cb, 1).values;
  const Vector h = tt::bovw_oracle(x, cb.centers);
  for (Index k = 0; k < 5; ++k) EXPECT_EQ(v[k], h[k] > 0 ? 1.0 : 0.0);
}

TEST(Llc, MidpointOnLineSplitsEvenly) {
  Codebook cb{Matrix(2, 1)};
  cb.centers << 0, 2;
  const Vector a = simplex_least_squares(cb, {0, 1}, Vector::Constant(1, 1.0));
  EXPECT_NEAR(a[0], 0.5, 1e-12);
  EXPECT_NEAR(a[1], 0.5, 1e-12);
  const Vector beyond = simplex_least_squares(cb, {0, 1}, Vector::Constant(1, 5.0));
  EXPECT_NEAR(beyond[1], 1.0, 1e-12);
}

TEST(Llc, SimplexSolutionIsOptimal) {
  tt::Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Index r = tt::uniform_int(rng, 1, 6);
    const Codebook cb = tt::random_codebook(rng, r, 3);
    std::vector<Index> all(static_cast<std::size_t>(r));
    for (Index i = 0; i < r; ++i) all[i] = i;
    const Vector f = tt::random_matrix(rng, 1, 3, -2, 2).transpose();
    const Vector a = simplex_least_squares(cb, all, f);
    EXPECT_NEAR(a.sum(), 1.0, 1e-12);
    EXPECT_GE(a.minCoeff(), 0.0);
    const double best = (cb.centers.transpose() * a - f).squaredNorm();
    // No random simplex point does better.
    for (int s = 0; s < 200; ++s) {
      Vector b = tt::random_matrix(rng, r, 1, 0, 1);
      b /= b.sum();
      EXPECT_LE(best, (cb.centers.transpose() * b - f).squaredNorm() + 1e-12);
    }
  }
}

TEST(Llc, LargeNeighbourhoodUsesIterativeSolver) {
  tt::Rng rng(8);
  const Codebook cb = tt::random_codebook(rng, 16, 4);
  std::vector<Index> all(16);
  for (Index i = 0; i < 16; ++i) all[i] = i;
  const Vector f = cb.centers.row(5).transpose();
  const Vector a = simplex_least_squares(cb, all, f);
  EXPECT_NEAR((cb.centers.transpose() * a - f).squaredNorm(), 0.0, 1e-10);
  EXPECT_NEAR(a.sum(), 1.0, 1e-9);
}

TEST(Llc, NeighbourhoodBounds) {
  tt::Rng rng(9);
  const Codebook cb = tt::random_codebook(rng, 3, 2);
  EXPECT_THROW(encode_llc(sample_of(Matrix::Zero(1, 2)), cb, 4), std::invalid_argument);
  EXPECT_THROW(encode_llc(sample_of(Matrix::Zero(1, 2)), cb, 0), std::invalid_argument);
  Codebook tie{Matrix(3, 1)};
  tie.centers << 1, -1, 3;
  EXPECT_EQ(nearest_centers(tie, Vector::Zero(1), 2), (std::vector<Index>{0, 1}));
}

TEST(Vlad, ZeroResidualsAndSingleCenter) {
  tt::Rng rng(10);
  const Codebook cb = tt::random_codebook(rng, 3, 2);
  EXPECT_EQ(encode_vlad(sample_of(cb.centers), cb).values, Vector::Zero(6));
  Codebook one{Matrix(1, 2)};
  one.centers << 1, 2;
  Matrix f(1, 2);
  f << 4, -1;
  EXPECT_EQ(encode_vlad(sample_of(f), one).values, (Vector(2) << 3, -3).finished());
}

TEST(Vlad, MatchesAccumulationOracle) {
  tt::Rng rng(11);
  const Codebook cb = tt::random_codebook(rng, 3, 2);
  const Matrix x = tt::random_matrix(rng, 15, 2, -2, 2);
  const auto v = encode_vlad(sample_of(x), cb);
  EXPECT_EQ(v.blocks, 3);
  expect_close(v.values, tt::vlad_oracle(x, cb.centers), 1e-12);
}

TEST(Fv, ClosedFormAtTheMean) {
  GmmModel g{Vector::Ones(1), Matrix(1, 3), Matrix(1, 3)};
  g.means << 0.5, -1, 2;
  g.variances << 1, 4, 0.25;
  const auto v = encode_fv(sample_of(g.means.replicate(5, 1)), g);
  ASSERT_EQ(v.dim(), 6);
  for (Index j = 0; j < 3; ++j) {
    EXPECT_EQ(v.values[j], 0.0);
    EXPECT_EQ(v.values[3 + j], -1.0 / std::sqrt(2.0));
  }
}

TEST(Fv, MatchesPosteriorWeightedOracle) {
  tt::Rng rng(12);
  const GmmModel g = tt::random_gmm(rng, 2, 3);
  const Matrix x = tt::random_matrix(rng, 10, 3, -2, 2);
  const auto v = encode_fv(sample_of(x), g);
  const Vector o = tt::fv_oracle(x, g);
  for (Index i = 0; i < v.dim(); ++i) EXPECT_NEAR(v.values[i], o[i], 1e-10 * std::max(1.0, std::abs(o[i])));
}

TEST(Fv, DimensionForCnnDefaults) {
  tt::Rng rng(13);
  const GmmModel g = tt::random_gmm(rng, 64, 512);
  EXPECT_EQ(encoded_dimension(FvEncoder{g}), 65536);
  EXPECT_EQ(encode_fv(sample_of(tt::random_matrix(rng, 3, 512)), g).dim(), 65536);
}

TEST(Encoders, DimensionLaw) {
  tt::Rng rng(14);
  for (int t = 0; t < 20; ++t) {
    const Index k = tt::uniform_int(rng, 1, 8), d = tt::uniform_int(rng, 1, 6);
    const Codebook cb = tt::random_codebook(rng, k, d);
    const auto s = tt::random_sample(rng, 9, d);
    EXPECT_EQ(encode(s, BovwEncoder{cb}).dim(), k);
    EXPECT_EQ(encode(s, KcbEncoder{cb, 1.0}).dim(), k);
    EXPECT_EQ(encode(s, LlcEncoder{cb, std::min<Index>(k, 5)}).dim(), k);
    EXPECT_EQ(encode(s, VladEncoder{cb}).dim(), k * d);
    EXPECT_EQ(encode(s, FvEncoder{tt::random_gmm(rng, k, d)}).dim(), 2 * k * d);
  }
}

TEST(Encoders, PermutationAndDuplicationInvariance) {
  tt::Rng rng(15);
  const Codebook cb = tt::random_codebook(rng, 5, 3);
  const GmmModel g = tt::random_gmm(rng, 4, 3);
  const std::vector<Encoder> encoders{BovwEncoder{cb}, KcbEncoder{cb, 0.8}, LlcEncoder{cb, 3}, VladEncoder{cb},
                                      FvEncoder{g}};
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = tt::random_sample(rng, 25, 3);
    for (const auto& e : encoders) {
      const Vector base = encode(s, e).values;
      EXPECT_EQ(encode(permuted(s, rng), e).values, base);
      expect_close(encode(duplicated(s), e).values, base, 1e-12);
    }
  }
}

TEST(Encoders, EmptyAndMismatchedInput) {
  tt::Rng rng(16);
  const Codebook cb = tt::random_codebook(rng, 3, 2);
  DescriptorSample empty;
  empty.descriptors.resize(0, 2);
  EXPECT_THROW(encode_bovw(empty, cb), EmptyInputError);
  EXPECT_THROW(encode_fv(empty, tt::random_gmm(rng, 2, 2)), EmptyInputError);
  EXPECT_THROW(encode_vlad(tt::random_sample(rng, 3, 4), cb), std::invalid_argument);
}

TEST(Spp, SingleCellEqualsBase) {
  tt::Rng rng(17);
  const Codebook cb = tt::random_codebook(rng, 4, 2);
  const auto s = tt::random_sample(rng, 30, 2);
  for (const Encoder& e : {Encoder{BovwEncoder{cb}}, Encoder{VladEncoder{cb}}})
    EXPECT_EQ(spp_encode(s, 1, 1, e).values, encode(s, e).values);
}

TEST(Spp, EmptyRightCellIsZero) {
  tt::Rng rng(18);
  const Codebook cb = tt::random_codebook(rng, 4, 2);
  auto s = tt::random_sample(rng, 20, 2, 64, 64);
  for (auto& p : s.positions) p.x = tt::uniform_real(rng, 0, 31.9);
  const auto v = spp_encode(s, 2, 1, VladEncoder{cb});
  ASSERT_EQ(v.dim(), 16);
  EXPECT_EQ(v.values.tail(8), Vector::Zero(8));
  EXPECT_EQ(v.values.head(8), encode_vlad(s, cb).values);
  EXPECT_EQ(v.blocks, 8);
}

TEST(Spp, MatchesManualPartition) {
  tt::Rng rng(19);
  const Codebook cb = tt::random_codebook(rng, 3, 2);
  const auto s = tt::random_sample(rng, 8, 2, 40, 20);
  const auto v = spp_encode(s, 2, 2, BovwEncoder{cb});
  ASSERT_EQ(v.dim(), 12);
  for (int cy = 0; cy < 2; ++cy)
    for (int cx = 0; cx < 2; ++cx) {
      std::vector<Index> rows;
      for (Index i = 0; i < s.size(); ++i)
        if ((s.positions[i].x >= 20) == (cx == 1) && (s.positions[i].y >= 10) == (cy == 1)) rows.push_back(i);
      const Vector part = v.values.segment((cy * 2 + cx) * 3, 3);
      if (rows.empty()) EXPECT_EQ(part, Vector::Zero(3));
      else EXPECT_EQ(part, encode_bovw(select(s, rows), cb).values);
    }
}

TEST(RegionPool, FullMaskEqualsBase) {
  tt::Rng rng(20);
  const GmmModel g = tt::random_gmm(rng, 3, 2);
  const auto s = tt::random_sample(rng, 40, 2, 32, 32);
  EXPECT_EQ(region_pool(s, Mask::filled(32, 32, true), FvEncoder{g}).values, encode_fv(s, g).values);
  EXPECT_THROW(region_pool(s, Mask::filled(32, 32, false), FvEncoder{g}), EmptyRegionError);
}

TEST(RegionPool, HalfMaskMatchesFilteredSubset) {
  tt::Rng rng(21);
  const Codebook cb = tt::random_codebook(rng, 4, 2);
  const auto s = tt::random_sample(rng, 50, 2, 32, 32);
  Mask half = Mask::filled(32, 32, false);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 16; ++x) half.bits[y * 32 + x] = 1;
  std::vector<Index> rows;
  for (Index i = 0; i < s.size(); ++i)
    if (std::floor(s.positions[i].x + 0.5) < 16) rows.push_back(i);
  EXPECT_EQ(descriptors_in_mask(s, half), rows);
  EXPECT_EQ(region_pool(s, half, VladEncoder{cb}).values, encode_vlad(select(s, rows), cb).values);
}

TEST(Postprocess, HandExamples) {
  EncodedVector v;
  v.values = (Vector(3) << 4, -9, 0).finished();
  EXPECT_EQ(postprocess(v, {true, false, false}).values, (Vector(3) << 2, -3, 0).finished());

  v.values = (Vector(2) << 3, 4).finished();
  const auto l2 = postprocess(v, {false, false, true});
  EXPECT_NEAR(l2.values[0], 0.6, 1e-15);
  EXPECT_NEAR(l2.values[1], 0.8, 1e-15);
  EXPECT_TRUE(l2.post_state.global_l2);

  EncodedVector vlad;
  vlad.kind = EncoderKind::Vlad;
  vlad.blocks = 2;
  vlad.values = (Vector(4) << 3, 4, 0, 5).finished();
  const auto intra = postprocess(vlad, {false, true, false});
  expect_close(intra.values, (Vector(4) << 0.6, 0.8, 0, 1).finished(), 1e-15);
  const auto both = postprocess(vlad, default_postprocess(EncoderKind::Vlad));
  EXPECT_NEAR(both.values.head(2).norm(), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(both.values.tail(2).norm(), 1 / std::sqrt(2.0), 1e-12);
}

TEST(Postprocess, ZeroVectorsAndValidity) {
  EncodedVector z;
  z.kind = EncoderKind::Vlad;
  z.blocks = 2;
  z.values = Vector::Zero(4);
  EXPECT_EQ(postprocess(z, {true, true, true}).values, Vector::Zero(4));
  EncodedVector fv;
  fv.kind = EncoderKind::Fv;
  fv.values = Vector::Ones(4);
  EXPECT_THROW(postprocess(fv, {false, true, false}), std::invalid_argument);
}

TEST(Postprocess, UnitNormForRandomEncodings) {
  tt::Rng rng(22);
  const GmmModel g = tt::random_gmm(rng, 3, 4);
  const Codebook cb = tt::random_codebook(rng, 5, 4);
  for (int t = 0; t < 20; ++t) {
    const auto s = tt::random_sample(rng, 12, 4);
    EXPECT_NEAR(postprocess(encode_fv(s, g), default_postprocess(EncoderKind::Fv)).values.norm(), 1.0, 1e-9);
    EXPECT_NEAR(postprocess(encode_vlad(s, cb), default_postprocess(EncoderKind::Vlad)).values.norm(), 1.0, 1e-9);
  }
}

TEST(EncodedIo, RoundTrip) {
  tt::TempDir dir;
  EncodedVector a;
  a.kind = EncoderKind::Fv;
  a.values = (Vector(3) << 0.5, -0.25, 1.0).finished();
  EncodedVector b;
  b.kind = EncoderKind::Bovw;
  b.values = Vector::Constant(2, 0.5);
  save_encoded_vectors({a, b}, dir / "v.txev");
  const auto back = load_encoded_vectors(dir / "v.txev");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].kind, EncoderKind::Fv);
  EXPECT_EQ(back[0].values, a.values);
  EXPECT_EQ(back[1].values, b.values);
  std::filesystem::resize_file(dir / "v.txev", std::filesystem::file_size(dir / "v.txev") - 1);
  EXPECT_THROW(load_encoded_vectors(dir / "v.txev"), FormatError);
}

TEST(EncoderKindNames, RoundTrip) {
  for (auto k : {EncoderKind::Bovw, EncoderKind::Kcb, EncoderKind::Llc, EncoderKind::Vlad, EncoderKind::Fv})
    EXPECT_EQ(parse_encoder_kind(to_string(k)), k);
  EXPECT_THROW(parse_encoder_kind("sift"), std::invalid_argument);
}
