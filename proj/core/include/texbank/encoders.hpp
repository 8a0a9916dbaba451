#pragma once

#include "texbank/descriptors.hpp"
#include "texbank/image.hpp"
#include "texbank/types.hpp"
#include "texbank/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>
#include <vector>

namespace texbank {

enum class EncoderKind : std::uint32_t { Bovw = 1, Kcb = 2, Llc = 3, Vlad = 4, Fv = 5 };

const char* to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& text);

struct PostProcessSpec {
  bool signed_sqrt = false;
  bool intra_norm = false;  // per-subvector L2, VLAD only
  bool global_l2 = false;

  friend bool operator==(const PostProcessSpec&, const PostProcessSpec&) = default;
};

/// Improved FV: signed sqrt + L2. VLAD: intra-norm + L2. Others: none.
PostProcessSpec default_postprocess(EncoderKind kind);

struct EncodedVector {
  Vector values;
  EncoderKind kind = EncoderKind::Bovw;
  Index blocks = 1;  // equal-length subvectors (K for VLAD, cells x K under SPP)
  PostProcessSpec post_state;

  Index dim() const { return values.size(); }
};

struct BovwEncoder {
  Codebook codebook;
};
struct KcbEncoder {
  Codebook codebook;
  double lambda = 1.0;
};
struct LlcEncoder {
  Codebook codebook;
  Index neighbors = 5;
};
struct VladEncoder {
  Codebook codebook;
};
struct FvEncoder {
  GmmModel gmm;
};

/// Any orderless base encoder.
using Encoder = std::variant<BovwEncoder, KcbEncoder, LlcEncoder, VladEncoder, FvEncoder>;

EncoderKind kind_of(const Encoder& encoder);
Index encoded_dimension(const Encoder& encoder);

// Raw pooled vectors, before post-processing. All throw EmptyInputError on an
// empty sample and std::invalid_argument on a dimension mismatch.
EncodedVector encode_bovw(const DescriptorSample& sample, const Codebook& codebook);
EncodedVector encode_kcb(const DescriptorSample& sample, const Codebook& codebook, double lambda);
EncodedVector encode_llc(const DescriptorSample& sample, const Codebook& codebook,
                         Index neighbors = 5);
EncodedVector encode_vlad(const DescriptorSample& sample, const Codebook& codebook);
EncodedVector encode_fv(const DescriptorSample& sample, const GmmModel& gmm);

EncodedVector encode(const DescriptorSample& sample, const Encoder& encoder);

/// Minimiser of ||f - sum_j a_j c_j||^2 over the probability simplex, for the
/// given center indices. Returned coefficients follow `centers` order.
Vector simplex_least_squares(const Codebook& codebook, const std::vector<Index>& centers,
                             const Eigen::Ref<const Vector>& f);

/// The r nearest centers, by distance then index.
std::vector<Index> nearest_centers(const Codebook& codebook, const Eigen::Ref<const Vector>& f,
                                   Index r);

/// Posteriors below this are dropped from the Fisher vector accumulation.
inline constexpr double kFvPosteriorThreshold = 1e-6;

/// Stacks base encodings of a gx x gy grid over the sample's image extent.
/// Empty cells contribute zero subvectors.
EncodedVector spp_encode(const DescriptorSample& sample, int grid_x, int grid_y,
                         const Encoder& base);

/// Descriptors whose centre falls inside the mask, rounding to the nearest
/// pixel.
std::vector<Index> descriptors_in_mask(const DescriptorSample& sample, const Mask& mask);

/// Base encoding of the descriptors inside the mask. Throws EmptyRegionError
/// when a non-empty sample has no descriptor in the mask.
EncodedVector region_pool(const DescriptorSample& sample, const Mask& mask, const Encoder& base);

/// Applies signed sqrt, then intra-normalisation, then global L2. Zero vectors
/// (and zero subvectors) are left unchanged.
EncodedVector postprocess(EncodedVector vec, const PostProcessSpec& spec);

/// "TXEV", u32 version, u32 kind, u32 dim, f32 values; little-endian.
void write_encoded_vector(std::ostream& out, const EncodedVector& vec);
EncodedVector read_encoded_vector(std::istream& in);
void save_encoded_vectors(const std::vector<EncodedVector>& vecs, const std::filesystem::path& path);
std::vector<EncodedVector> load_encoded_vectors(const std::filesystem::path& path);

}  // namespace texbank
