#include "texbank/encoders.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace texbank {
namespace {

void check_sample(const DescriptorSample& sample, Index dim) {
  if (sample.empty()) throw EmptyInputError("no descriptors to pool");
  if (sample.dim() != dim)
    throw std::invalid_argument("descriptor dimension " + std::to_string(sample.dim()) +
                                " does not match model dimension " + std::to_string(dim));
}

// Row indices in lexicographic order of the descriptor values. Accumulating in
// this order makes pooled sums independent of the input order.
std::vector<Index> canonical_order(const Matrix& x) {
  std::vector<Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  const Index d = x.cols();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double* ra = x.row(a).data();
    const double* rb = x.row(b).data();
    return std::lexicographical_compare(ra, ra + d, rb, rb + d);
  });
  return order;
}

double squared_distance(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

Index nearest_row(const Matrix& centers, const double* f) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < centers.rows(); ++k) {
    const double d = squared_distance(f, centers.row(k).data(), centers.cols());
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

EncodedVector make_encoded(Vector values, EncoderKind kind, Index blocks) {
  EncodedVector v;
  v.values = std::move(values);
  v.kind = kind;
  v.blocks = blocks;
  return v;
}

// Minimises a^T Z a on the simplex by enumerating supports and solving the
// equality-constrained KKT system on each. Exact for the small neighbourhoods
// LLC uses.
Vector simplex_qp_exact(const Matrix& z) {
  const Index r = z.rows();
  Vector best = Vector::Zero(r);
  double best_obj = std::numeric_limits<double>::infinity();
  int best_support = std::numeric_limits<int>::max();
  for (unsigned mask = 1; mask < (1u << r); ++mask) {
    std::vector<Index> s;
    for (Index i = 0; i < r; ++i)
      if (mask & (1u << i)) s.push_back(i);
    const Index m = static_cast<Index>(s.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    for (Index a = 0; a < m; ++a) {
      for (Index b = 0; b < m; ++b) kkt(a, b) = 2.0 * z(s[a], s[b]);
      kkt(a, m) = 1.0;
      kkt(m, a) = 1.0;
    }
    rhs[m] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    if ((sol.head(m).array() < -1e-12).any()) continue;
    Vector alpha = Vector::Zero(r);
    for (Index a = 0; a < m; ++a) alpha[s[a]] = std::max(sol[a], 0.0);
    alpha /= alpha.sum();
    const double obj = alpha.dot(z * alpha);
    const double margin = 1e-12 * std::max(1.0, std::abs(best_obj));
    if (obj < best_obj - margin || (obj <= best_obj + margin && static_cast<int>(m) < best_support)) {
      best_obj = obj;
      best = alpha;
      best_support = static_cast<int>(m);
    }
  }
  return best;
}

Vector project_to_simplex(const Vector& v) {
  Vector u = v;
  std::sort(u.data(), u.data() + u.size(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

// Accelerated projected gradient for larger neighbourhoods.
Vector simplex_qp_iterative(const Matrix& z) {
  const Index r = z.rows();
  const double lipschitz = std::max(2.0 * z.diagonal().sum(), 1e-300);
  Vector x = Vector::Constant(r, 1.0 / static_cast<double>(r));
  Vector y = x;
  double t = 1.0;
  for (int it = 0; it < 5000; ++it) {
    const Vector next = project_to_simplex(y - (2.0 / lipschitz) * (z * y));
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / tn) * (next - x);
    const double change = (next - x).lpNorm<Eigen::Infinity>();
    x = next;
    t = tn;
    if (change < 1e-14) break;
  }
  return x;
}

constexpr Index kExactSimplexLimit = 12;

}  // namespace

const char* to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Bovw: return "bovw";
    case EncoderKind::Kcb: return "kcb";
    case EncoderKind::Llc: return "llc";
    case EncoderKind::Vlad: return "vlad";
    case EncoderKind::Fv: return "fv";
  }
  return "unknown";
}

EncoderKind parse_encoder_kind(const std::string& text) {
  for (auto k : {EncoderKind::Bovw, EncoderKind::Kcb, EncoderKind::Llc, EncoderKind::Vlad,
                 EncoderKind::Fv})
    if (text == to_string(k)) return k;
  throw std::invalid_argument("unknown encoder '" + text + "'");
}

PostProcessSpec default_postprocess(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Fv: return {true, false, true};
    case EncoderKind::Vlad: return {false, true, true};
    default: return {};
  }
}

EncoderKind kind_of(const Encoder& encoder) {
  struct {
    EncoderKind operator()(const BovwEncoder&) const { return EncoderKind::Bovw; }
    EncoderKind operator()(const KcbEncoder&) const { return EncoderKind::Kcb; }
    EncoderKind operator()(const LlcEncoder&) const { return EncoderKind::Llc; }
    EncoderKind operator()(const VladEncoder&) const { return EncoderKind::Vlad; }
    EncoderKind operator()(const FvEncoder&) const { return EncoderKind::Fv; }
  } visitor;
  return std::visit(visitor, encoder);
}

Index encoded_dimension(const Encoder& encoder) {
  struct {
    Index operator()(const BovwEncoder& e) const { return e.codebook.size(); }
    Index operator()(const KcbEncoder& e) const { return e.codebook.size(); }
    Index operator()(const LlcEncoder& e) const { return e.codebook.size(); }
    Index operator()(const VladEncoder& e) const { return e.codebook.size() * e.codebook.dim(); }
    Index operator()(const FvEncoder& e) const { return 2 * e.gmm.size() * e.gmm.dim(); }
  } visitor;
  return std::visit(visitor, encoder);
}

EncodedVector encode_bovw(const DescriptorSample& sample, const Codebook& codebook) {
  check_sample(sample, codebook.dim());
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(codebook.size()), 0);
  for (Index i = 0; i < sample.size(); ++i)
    ++counts[nearest_row(codebook.centers, sample.descriptors.row(i).data())];
  Vector h(codebook.size());
  for (Index k = 0; k < codebook.size(); ++k)
    h[k] = static_cast<double>(counts[k]) / static_cast<double>(sample.size());
  return make_encoded(std::move(h), EncoderKind::Bovw, 1);
}

EncodedVector encode_kcb(const DescriptorSample& sample, const Codebook& codebook, double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw std::invalid_argument("KCB lambda must be positive");
  check_sample(sample, codebook.dim());
  const Index k = codebook.size();
  Vector sum = Vector::Zero(k);
  Vector code(k);
  for (Index i : canonical_order(sample.descriptors)) {
    const double* f = sample.descriptors.row(i).data();
    for (Index j = 0; j < k; ++j)
      code[j] = -lambda * squared_distance(f, codebook.centers.row(j).data(), codebook.dim());
    const double m = code.maxCoeff();
    code = (code.array() - m).exp().matrix();
    sum += code / code.sum();
  }
  return make_encoded(sum / static_cast<double>(sample.size()), EncoderKind::Kcb, 1);
}

std::vector<Index> nearest_centers(const Codebook& codebook, const Eigen::Ref<const Vector>& f,
                                   Index r) {
  if (r < 1 || r > codebook.size()) throw std::invalid_argument("neighbourhood size must be in [1, K]");
  if (f.size() != codebook.dim()) throw std::invalid_argument("descriptor and codebook dimensions differ");
  const Vector fv = f;
  std::vector<std::pair<double, Index>> d(static_cast<std::size_t>(codebook.size()));
  for (Index k = 0; k < codebook.size(); ++k)
    d[k] = {squared_distance(fv.data(), codebook.centers.row(k).data(), codebook.dim()), k};
  std::partial_sort(d.begin(), d.begin() + r, d.end());
  std::vector<Index> out(static_cast<std::size_t>(r));
  for (Index i = 0; i < r; ++i) out[i] = d[i].second;
  return out;
}

Vector simplex_least_squares(const Codebook& codebook, const std::vector<Index>& centers,
                             const Eigen::Ref<const Vector>& f) {
  if (centers.empty()) throw std::invalid_argument("no centers given");
  if (f.size() != codebook.dim()) throw std::invalid_argument("descriptor and codebook dimensions differ");
  const Index r = static_cast<Index>(centers.size());
  Matrix shifted(r, codebook.dim());
  for (Index j = 0; j < r; ++j) {
    if (centers[j] < 0 || centers[j] >= codebook.size()) throw std::invalid_argument("center index out of range");
    shifted.row(j) = codebook.centers.row(centers[j]) - f.transpose();
  }
  const Matrix z = shifted * shifted.transpose();
  return r <= kExactSimplexLimit ? simplex_qp_exact(z) : simplex_qp_iterative(z);
}

EncodedVector encode_llc(const DescriptorSample& sample, const Codebook& codebook, Index neighbors) {
  if (neighbors < 1 || neighbors > codebook.size())
    throw std::invalid_argument("LLC neighbourhood size must be in [1, K]");
  check_sample(sample, codebook.dim());
  Vector pooled = Vector::Zero(codebook.size());
  for (Index i = 0; i < sample.size(); ++i) {
    const auto f = sample.descriptors.row(i).transpose();
    const auto nn = nearest_centers(codebook, f, neighbors);
    const Vector alpha = simplex_least_squares(codebook, nn, f);
    for (std::size_t j = 0; j < nn.size(); ++j) pooled[nn[j]] = std::max(pooled[nn[j]], alpha[j]);
  }
  return make_encoded(std::move(pooled), EncoderKind::Llc, 1);
}

EncodedVector encode_vlad(const DescriptorSample& sample, const Codebook& codebook) {
  check_sample(sample, codebook.dim());
  const Index k = codebook.size();
  const Index d = codebook.dim();
  Vector v = Vector::Zero(k * d);
  for (Index i : canonical_order(sample.descriptors)) {
    const double* f = sample.descriptors.row(i).data();
    const Index c = nearest_row(codebook.centers, f);
    const double* mu = codebook.centers.row(c).data();
    for (Index j = 0; j < d; ++j) v[c * d + j] += f[j] - mu[j];
  }
  v /= static_cast<double>(sample.size());
  return make_encoded(std::move(v), EncoderKind::Vlad, k);
}

EncodedVector encode_fv(const DescriptorSample& sample, const GmmModel& gmm) {
  if (gmm.size() == 0) throw std::invalid_argument("empty mixture");
  check_sample(sample, gmm.dim());
  const Index k = gmm.size();
  const Index d = gmm.dim();
  const Matrix inv_sigma = gmm.variances.cwiseSqrt().cwiseInverse();
  Vector log_weight(k);
  for (Index c = 0; c < k; ++c) {
    double s = 0.0;
    for (Index j = 0; j < d; ++j) s += std::log(2 * std::numbers::pi * gmm.variances(c, j));
    log_weight[c] = std::log(gmm.priors[c]) - 0.5 * s;
  }

  Vector v = Vector::Zero(2 * k * d);
  Vector lj(k);
  std::vector<double> z(static_cast<std::size_t>(d));
  for (Index i : canonical_order(sample.descriptors)) {
    const double* f = sample.descriptors.row(i).data();
    for (Index c = 0; c < k; ++c) {
      double q = 0.0;
      for (Index j = 0; j < d; ++j) {
        const double t = (f[j] - gmm.means(c, j)) * inv_sigma(c, j);
        q += t * t;
      }
      lj[c] = log_weight[c] - 0.5 * q;
    }
    const double m = lj.maxCoeff();
    const double lse = m + std::log((lj.array() - m).exp().sum());
    for (Index c = 0; c < k; ++c) {
      const double gamma = std::exp(lj[c] - lse);
      if (gamma < kFvPosteriorThreshold) continue;
      double* first = v.data() + c * d;
      double* second = v.data() + (k + c) * d;
      for (Index j = 0; j < d; ++j) {
        const double t = (f[j] - gmm.means(c, j)) * inv_sigma(c, j);
        first[j] += gamma * t;
        second[j] += gamma * (t * t - 1.0);
      }
    }
  }
  const double n = static_cast<double>(sample.size());
  for (Index c = 0; c < k; ++c) {
    const double a = 1.0 / (n * std::sqrt(gmm.priors[c]));
    const double b = 1.0 / (n * std::sqrt(2.0 * gmm.priors[c]));
    v.segment(c * d, d) *= a;
    v.segment((k + c) * d, d) *= b;
  }
  return make_encoded(std::move(v), EncoderKind::Fv, 2 * k);
}

EncodedVector encode(const DescriptorSample& sample, const Encoder& encoder) {
  struct {
    const DescriptorSample& s;
    EncodedVector operator()(const BovwEncoder& e) const { return encode_bovw(s, e.codebook); }
    EncodedVector operator()(const KcbEncoder& e) const { return encode_kcb(s, e.codebook, e.lambda); }
    EncodedVector operator()(const LlcEncoder& e) const { return encode_llc(s, e.codebook, e.neighbors); }
    EncodedVector operator()(const VladEncoder& e) const { return encode_vlad(s, e.codebook); }
    EncodedVector operator()(const FvEncoder& e) const { return encode_fv(s, e.gmm); }
  } visitor{sample};
  return std::visit(visitor, encoder);
}

EncodedVector spp_encode(const DescriptorSample& sample, int grid_x, int grid_y, const Encoder& base) {
  if (grid_x < 1 || grid_y < 1) throw std::invalid_argument("SPP grid must be at least 1x1");
  if (sample.empty()) throw EmptyInputError("no descriptors to pool");
  const bool single = grid_x == 1 && grid_y == 1;
  if (!single && (sample.image_width <= 0 || sample.image_height <= 0))
    throw std::invalid_argument("SPP needs the sample's image extent");

  const int cells = grid_x * grid_y;
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(cells));
  for (Index i = 0; i < sample.size(); ++i) {
    const auto& p = sample.positions[i];
    int cx = 0;
    int cy = 0;
    if (!single) {
      cx = std::clamp(static_cast<int>(std::floor(p.x * grid_x / sample.image_width)), 0, grid_x - 1);
      cy = std::clamp(static_cast<int>(std::floor(p.y * grid_y / sample.image_height)), 0, grid_y - 1);
    }
    members[cy * grid_x + cx].push_back(i);
  }

  const Index base_dim = encoded_dimension(base);
  EncodedVector out;
  out.kind = kind_of(base);
  out.values = Vector::Zero(base_dim * cells);
  Index base_blocks = 1;
  for (int c = 0; c < cells; ++c) {
    if (members[c].empty()) continue;
    const auto part = single ? encode(sample, base) : encode(select(sample, members[c]), base);
    base_blocks = part.blocks;
    out.values.segment(c * base_dim, base_dim) = part.values;
  }
  if (out.kind == EncoderKind::Vlad) base_blocks = std::get<VladEncoder>(base).codebook.size();
  if (out.kind == EncoderKind::Fv) base_blocks = 2 * std::get<FvEncoder>(base).gmm.size();
  out.blocks = base_blocks * cells;
  return out;
}

std::vector<Index> descriptors_in_mask(const DescriptorSample& sample, const Mask& mask) {
  std::vector<Index> rows;
  for (Index i = 0; i < sample.size(); ++i) {
    const auto& p = sample.positions[i];
    const double px = std::floor(p.x + 0.5);
    const double py = std::floor(p.y + 0.5);
    if (px < 0 || py < 0 || px >= mask.width || py >= mask.height) continue;
    if (mask.contains(static_cast<int>(px), static_cast<int>(py))) rows.push_back(i);
  }
  return rows;
}

EncodedVector region_pool(const DescriptorSample& sample, const Mask& mask, const Encoder& base) {
  if (sample.empty()) throw EmptyInputError("no descriptors to pool");
  const auto rows = descriptors_in_mask(sample, mask);
  if (rows.empty()) throw EmptyRegionError("region contains no descriptor centres");
  if (static_cast<Index>(rows.size()) == sample.size()) return encode(sample, base);
  return encode(select(sample, rows), base);
}

EncodedVector postprocess(EncodedVector vec, const PostProcessSpec& spec) {
  if (spec.intra_norm && vec.kind != EncoderKind::Vlad)
    throw std::invalid_argument("intra-normalisation applies to VLAD encodings only");
  auto& v = vec.values;
  if (spec.signed_sqrt)
    for (Index i = 0; i < v.size(); ++i) v[i] = std::copysign(std::sqrt(std::abs(v[i])), v[i]);
  if (spec.intra_norm) {
    if (vec.blocks < 1 || v.size() % vec.blocks != 0)
      throw std::invalid_argument("encoding is not split into equal subvectors");
    const Index len = v.size() / vec.blocks;
    for (Index b = 0; b < vec.blocks; ++b) {
      auto seg = v.segment(b * len, len);
      const double norm = seg.norm();
      if (norm > 0) seg /= norm;
    }
  }
  if (spec.global_l2) {
    const double norm = v.norm();
    if (norm > 0) v /= norm;
  }
  vec.post_state.signed_sqrt |= spec.signed_sqrt;
  vec.post_state.intra_norm |= spec.intra_norm;
  vec.post_state.global_l2 |= spec.global_l2;
  return vec;
}

}  // namespace texbank
