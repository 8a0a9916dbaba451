#include "texbank/model_io.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace texbank {
namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kMaxSections = 1024;

using detail::BinaryReader;
using detail::BinaryWriter;

void write_strings(BinaryWriter& w, const std::vector<std::string>& items) {
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& s : items) w.string(s);
}

std::vector<std::string> read_strings(BinaryReader& r) {
  const auto n = r.u32();
  if (n > (1u << 20)) throw FormatError("label list too long");
  std::vector<std::string> out(n);
  for (auto& s : out) s = r.string();
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw FormatError(std::string("inconsistent model section: ") + what);
}

void write_whitener(BinaryWriter& w, const PcaWhitener& p) {
  w.vector(p.mean);
  w.matrix(p.basis);
  w.vector(p.eigenvalues);
}

PcaWhitener read_whitener(BinaryReader& r) {
  PcaWhitener p;
  p.mean = r.vector();
  p.basis = r.matrix();
  p.eigenvalues = r.vector();
  require(p.basis.rows() == p.mean.size() && p.basis.cols() == p.eigenvalues.size(), "whitener");
  require((p.eigenvalues.array() > 0).all(), "whitener eigenvalues");
  return p;
}

void write_gmm(BinaryWriter& w, const GmmModel& g) {
  w.vector(g.priors);
  w.matrix(g.means);
  w.matrix(g.variances);
}

GmmModel read_gmm(BinaryReader& r) {
  GmmModel g;
  g.priors = r.vector();
  g.means = r.matrix();
  g.variances = r.matrix();
  require(g.means.rows() == g.priors.size() && g.variances.rows() == g.priors.size() &&
              g.variances.cols() == g.means.cols() && g.priors.size() > 0,
          "gmm shape");
  require((g.variances.array() > 0).all() && (g.priors.array() > 0).all(), "gmm parameters");
  return g;
}

void write_classifier(BinaryWriter& w, const LinearClassifier& c) {
  w.matrix(c.weights);
  w.vector(c.bias);
  write_strings(w, c.labels);
}

LinearClassifier read_classifier(BinaryReader& r) {
  LinearClassifier c;
  c.weights = r.matrix();
  c.bias = r.vector();
  c.labels = read_strings(r);
  require(c.bias.size() == c.weights.rows() && static_cast<Index>(c.labels.size()) == c.weights.rows(),
          "classifier shape");
  return c;
}

void write_filter_bank(BinaryWriter& w, const FilterBank& fb) {
  w.i32(fb.support);
  w.u32(static_cast<std::uint32_t>(fb.size()));
  for (std::size_t i = 0; i < fb.size(); ++i) {
    w.u32(static_cast<std::uint32_t>(fb.info[i].family));
    w.i32(fb.info[i].orientation);
    w.i32(fb.info[i].scale);
    w.f64(fb.info[i].sigma);
    w.matrix(fb.kernels[i]);
  }
}

FilterBank read_filter_bank(BinaryReader& r) {
  FilterBank fb;
  fb.support = r.i32();
  const auto n = r.u32();
  require(n <= 4096 && fb.support > 0, "filter bank header");
  for (std::uint32_t i = 0; i < n; ++i) {
    KernelInfo info;
    const auto family = r.u32();
    require(family <= static_cast<std::uint32_t>(FilterFamily::Gaussian), "filter family");
    info.family = static_cast<FilterFamily>(family);
    info.orientation = r.i32();
    info.scale = r.i32();
    info.sigma = r.f64();
    Matrix k = r.matrix();
    require(k.rows() == fb.support && k.cols() == fb.support, "filter kernel size");
    fb.info.push_back(info);
    fb.kernels.push_back(std::move(k));
  }
  return fb;
}

void write_kernel_model(BinaryWriter& w, const KernelModel& m) {
  w.u32(static_cast<std::uint32_t>(m.spec.kind));
  w.u32(m.spec.lambda ? 1 : 0);
  w.f64(m.spec.lambda.value_or(0.0));
  w.u32(m.spec.normalize ? 1 : 0);
  w.u32(m.degenerate ? 1 : 0);
  w.matrix(m.dual);
  w.vector(m.bias);
  w.matrix(m.training);
  write_strings(w, m.labels);
}

KernelModel read_kernel_model(BinaryReader& r) {
  KernelModel m;
  const auto kind = r.u32();
  require(kind <= static_cast<std::uint32_t>(KernelKind::ExpChi2), "kernel kind");
  m.spec.kind = static_cast<KernelKind>(kind);
  const bool has_lambda = r.u32() != 0;
  const double lambda = r.f64();
  if (has_lambda) m.spec.lambda = lambda;
  m.spec.normalize = r.u32() != 0;
  m.degenerate = r.u32() != 0;
  m.dual = r.matrix();
  m.bias = r.vector();
  m.training = r.matrix();
  m.labels = read_strings(r);
  require(m.bias.size() == m.dual.rows() && static_cast<Index>(m.labels.size()) == m.dual.rows(),
          "kernel model shape");
  require(m.training.rows() == 0 || m.training.rows() == m.dual.cols(), "kernel model training rows");
  try {
    m.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return m;
}

template <class Fn>
void section(BinaryWriter& w, SectionType type, Fn&& body) {
  std::ostringstream payload(std::ios::binary);
  BinaryWriter inner(payload);
  body(inner);
  const std::string bytes = payload.str();
  w.u32(static_cast<std::uint32_t>(type));
  w.u64(bytes.size());
  w.bytes(bytes.data(), bytes.size());
}

}  // namespace

void write_model(std::ostream& out, const ModelBundle& b) {
  BinaryWriter w(out);
  w.magic("TXMD");
  w.u32(kModelVersion);
  std::uint32_t count = 0;
  count += b.whitener.has_value();
  count += b.codebook.has_value();
  count += b.gmm.has_value();
  count += b.classifier.has_value();
  count += b.calibration.has_value();
  count += b.filter_bank.has_value();
  count += b.kernel_model.has_value();
  w.u32(count);
  if (b.whitener) section(w, SectionType::Whitener, [&](BinaryWriter& s) { write_whitener(s, *b.whitener); });
  if (b.codebook) section(w, SectionType::Codebook, [&](BinaryWriter& s) { s.matrix(b.codebook->centers); });
  if (b.gmm) section(w, SectionType::Gmm, [&](BinaryWriter& s) { write_gmm(s, *b.gmm); });
  if (b.classifier)
    section(w, SectionType::LinearClassifier, [&](BinaryWriter& s) { write_classifier(s, *b.classifier); });
  if (b.calibration)
    section(w, SectionType::Calibration, [&](BinaryWriter& s) {
      s.u32(static_cast<std::uint32_t>(b.calibration->size()));
      for (const auto& c : *b.calibration) {
        s.f64(c.A);
        s.f64(c.B);
      }
    });
  if (b.filter_bank)
    section(w, SectionType::FilterBank, [&](BinaryWriter& s) { write_filter_bank(s, *b.filter_bank); });
  if (b.kernel_model)
    section(w, SectionType::KernelModel, [&](BinaryWriter& s) { write_kernel_model(s, *b.kernel_model); });
}

ModelBundle read_model(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic("TXMD");
  if (const auto version = r.u32(); version != kModelVersion)
    throw FormatError("unsupported model version " + std::to_string(version));
  const auto count = r.u32();
  if (count > kMaxSections) throw FormatError("too many model sections");
  ModelBundle b;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto type = r.u32();
    const auto length = r.u64();
    if (length > (1ull << 36)) throw FormatError("model section too large");
    // Grow in chunks so a corrupt length fails at end of data, not in allocation.
    std::string bytes;
    for (std::uint64_t done = 0; done < length;) {
      const auto chunk = static_cast<std::size_t>(std::min<std::uint64_t>(length - done, 1u << 20));
      bytes.resize(bytes.size() + chunk);
      r.bytes(bytes.data() + done, chunk);
      done += chunk;
    }
    std::istringstream payload(bytes, std::ios::binary);
    BinaryReader s(payload);
    switch (static_cast<SectionType>(type)) {
      case SectionType::Whitener: b.whitener = read_whitener(s); break;
      case SectionType::Codebook: {
        Codebook cb{s.matrix()};
        require(cb.size() > 0, "empty codebook");
        b.codebook = std::move(cb);
        break;
      }
      case SectionType::Gmm: b.gmm = read_gmm(s); break;
      case SectionType::LinearClassifier: b.classifier = read_classifier(s); break;
      case SectionType::Calibration: {
        const auto n = s.u32();
        require(n <= (1u << 20), "calibration count");
        std::vector<CalibrationParams> cal(n);
        for (auto& c : cal) {
          c.A = s.f64();
          c.B = s.f64();
          require(std::isfinite(c.A) && std::isfinite(c.B), "calibration values");
        }
        b.calibration = std::move(cal);
        break;
      }
      case SectionType::FilterBank: b.filter_bank = read_filter_bank(s); break;
      case SectionType::KernelModel: b.kernel_model = read_kernel_model(s); break;
      default: continue;  // unknown section, already consumed
    }
    if (!s.at_end()) throw FormatError("model section has trailing bytes");
  }
  return b;
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
  detail::write_atomically(path, [&](std::ostream& out) { write_model(out, bundle); });
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  return read_model(in);
}

}  // namespace texbank
