#include "commands.hpp"

#include "texbank/manifest.hpp"
#include "texbank/model_io.hpp"
#include "texbank/vocab.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <random>

namespace texbank::cli {
namespace {

std::string index_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.txdf", i);
  return buf;
}

// Independent stream per item, so results do not depend on --jobs.
std::uint64_t item_seed(std::uint64_t seed, std::size_t item) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(item), static_cast<std::uint32_t>(item >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<DescriptorField> cached_extract(const Item& item, const GrayImage& img,
                                           const DescriptorSettings& settings) {
  const char* cache_env = std::getenv("TEXBANK_CACHE");
  if (!cache_env || !*cache_env) return extract_fields(img, settings);
  const fs::path cache_dir(cache_env);
  const auto key = sha256_hex(read_file(item.image) + '\0' + settings.to_json().dump());
  const auto cached = cache_dir / (key + ".txdf");
  if (fs::exists(cached)) {
    try {
      return load_descriptor_fields(cached);
    } catch (const Error& e) {
      spdlog::warn("ignoring unreadable cache entry {}: {}", cached.string(), e.what());
    }
  }
  auto fields = extract_fields(img, settings);
  fs::create_directories(cache_dir);
  save_descriptor_fields(fields, cached);
  return fields;
}

struct VocabSettings {
  std::string kind = "gmm";  // kmeans or gmm
  Index k = 64;
  Index pca_dim = 0;
  Index max_descriptors = 100000;
  int iterations = 100;
  std::string splits = "train";

  Json to_json() const {
    return {{"kind", kind}, {"K", k}, {"pca_dim", pca_dim}, {"max_descriptors", max_descriptors},
            {"iterations", iterations}, {"splits", splits}};
  }
  void validate() const {
    if (kind != "kmeans" && kind != "gmm") throw UserError("vocabulary must be kmeans or gmm");
    if (k < 1) throw UserError("K must be positive");
    if (pca_dim < 0 || max_descriptors < 1 || iterations < 1)
      throw UserError("PCA dimension, descriptor budget and iterations must be positive");
  }
};

void add_vocab_options(CLI::App* sub, VocabSettings& v) {
  sub->add_option("--K", v.k, "Vocabulary size")->capture_default_str();
  sub->add_option("--pca-dim", v.pca_dim, "PCA-whiten descriptors to this dimension (0 keeps them)")
      ->capture_default_str();
  sub->add_option("--max-descriptors", v.max_descriptors, "Descriptors sampled for fitting")->capture_default_str();
  sub->add_option("--iterations", v.iterations, "Maximum k-means or EM iterations")->capture_default_str();
  sub->add_option("--splits", v.splits, "Splits used for fitting, comma separated")->capture_default_str();
}

// Spreads the descriptor budget evenly over the chosen items.
Matrix sample_descriptors(const Dataset& data, const std::vector<std::size_t>& items, Index budget,
                          std::uint64_t seed, int jobs) {
  const Index per_item = (budget + static_cast<Index>(items.size()) - 1) / static_cast<Index>(items.size());
  std::vector<Matrix> parts(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t k) {
    const auto sample = load_sample(data.items[items[k]]);
    std::vector<Index> rows(static_cast<std::size_t>(sample.size()));
    for (Index i = 0; i < sample.size(); ++i) rows[i] = i;
    std::mt19937_64 rng(item_seed(seed, items[k]));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(std::min(per_item, sample.size())));
    std::sort(rows.begin(), rows.end());
    parts[k] = select(sample, rows).descriptors;
  });
  Index total = 0, dim = -1;
  for (const auto& p : parts) {
    if (p.rows() == 0) continue;
    if (dim >= 0 && p.cols() != dim) throw UserError("descriptor dimensions differ between items");
    dim = p.cols();
    total += p.rows();
  }
  if (total == 0) throw UserError("no descriptors to fit a vocabulary");
  Matrix out(total, dim);
  Index at = 0;
  for (const auto& p : parts) {
    if (p.rows() == 0) continue;
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

ModelBundle fit_vocabulary(const Dataset& data, const VocabSettings& v, std::uint64_t seed, int jobs) {
  v.validate();
  Matrix x = sample_descriptors(data, select_split(data, v.splits), v.max_descriptors, seed, jobs);
  ModelBundle bundle;
  try {
    if (v.pca_dim > 0) {
      bundle.whitener = fit_pca_whitener(x, v.pca_dim);
      x = bundle.whitener->transform(x);
    }
    if (v.kind == "kmeans") {
      bundle.codebook = kmeans(x, {v.k, v.iterations, seed});
    } else {
      GmmOptions o;
      o.components = v.k;
      o.max_iterations = v.iterations;
      o.seed = seed;
      bundle.gmm = fit_gmm(x, o);
    }
  } catch (const std::invalid_argument& e) {
    throw UserError(std::string("cannot fit vocabulary: ") + e.what());
  }
  spdlog::info("fitted {} with K={} on {} descriptors of dimension {}", v.kind, v.k, x.rows(), x.cols());
  return bundle;
}

void write_vocab(const ModelBundle& bundle, const fs::path& path, Provenance prov) {
  save_model(bundle, path);
  prov.finalize();
  prov.vocab = prov.config_hash;
  write_provenance(path, std::move(prov));
}

Provenance vocab_provenance(const fs::path& index_path, const Provenance& upstream, const VocabSettings& v,
                            std::uint64_t seed) {
  Provenance prov;
  prov.command = "fit-vocab";
  prov.config = v.to_json();
  prov.seed = seed;
  prov.dataset = upstream.dataset;
  prov.pipeline = upstream.pipeline;
  prov.pipeline["vocab"] = v.to_json();
  prov.add_input(index_path, upstream);
  return prov;
}

Encoder make_encoder(const ModelBundle& vocab, const EncoderSettings& s) {
  const auto kind = parse_encoder_kind(s.encoder);
  if (kind == EncoderKind::Fv) {
    if (!vocab.gmm) throw UserError("the fv encoder needs a gmm vocabulary");
    return FvEncoder{*vocab.gmm};
  }
  if (!vocab.codebook) throw UserError("the " + s.encoder + " encoder needs a kmeans vocabulary");
  const Codebook& cb = *vocab.codebook;
  switch (kind) {
    case EncoderKind::Bovw: return BovwEncoder{cb};
    case EncoderKind::Kcb: return KcbEncoder{cb, s.kcb_lambda};
    case EncoderKind::Llc:
      if (s.llc_neighbors > cb.size()) throw UserError("LLC neighbourhood exceeds the vocabulary size");
      return LlcEncoder{cb, s.llc_neighbors};
    default: return VladEncoder{cb};
  }
}

Index vocab_input_dim(const ModelBundle& vocab) {
  if (vocab.whitener) return vocab.whitener->input_dim();
  if (vocab.gmm) return vocab.gmm->dim();
  return vocab.codebook->dim();
}

}  // namespace

EncodedVector encode_item(const DescriptorSample& raw, const ModelBundle& vocab, const Encoder& encoder,
                          const EncoderSettings& s) {
  DescriptorSample sample = raw;
  if (sample.dim() != vocab_input_dim(vocab))
    throw UserError("dimension-law violation: descriptors are " + std::to_string(sample.dim()) +
                    "-D but the vocabulary expects " + std::to_string(vocab_input_dim(vocab)));
  if (vocab.whitener) sample.descriptors = vocab.whitener->transform(sample.descriptors);
  auto code = s.spp_x == 1 && s.spp_y == 1 ? encode(sample, encoder) : spp_encode(sample, s.spp_x, s.spp_y, encoder);
  return postprocess(std::move(code), s.postprocess_spec());
}

Encoder encoder_for(const ModelBundle& vocab, const EncoderSettings& s) { return make_encoder(vocab, s); }

Command add_extract(CLI::App& app, const Globals& g) {
  auto s = std::make_shared<DescriptorSettings>();
  auto manifest = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("extract", "Compute descriptor fields for every image of a manifest");
  sub->add_option("--manifest", *manifest, "Tab-separated dataset manifest")->required()->check(CLI::ExistingFile);
  sub->add_option("--descriptor", s->kind, "mr8, lm, patch, lbp or dsift")->capture_default_str();
  sub->add_option("--patch-size", s->patch_size, "Patch side (odd)")->capture_default_str();
  sub->add_option("--stride", s->stride, "Patch stride")->capture_default_str();
  sub->add_option("--lbp-radius", s->lbp_radius, "LBP sampling radius")->capture_default_str();
  sub->add_option("--lbp-neighbors", s->lbp_neighbors, "LBP sampling points")->capture_default_str();
  sub->add_option("--lbp-cell", s->lbp_cell, "LBP histogram cell size")->capture_default_str();
  sub->add_flag("--lbp-catch-all,!--no-lbp-catch-all", s->lbp_catch_all, "Keep the non-uniform bin");
  sub->add_option("--dsift-step", s->dsift_step, "dSIFT grid step")->capture_default_str();
  sub->add_option("--dsift-bin", s->dsift_bin, "dSIFT spatial bin size")->capture_default_str();
  sub->add_flag("--multiscale", s->multiscale, "Extract on a scale pyramid");
  sub->add_option("--s-min", s->pyramid.s_min, "Smallest log2 scale")->capture_default_str();
  sub->add_option("--s-max", s->pyramid.s_max, "Largest log2 scale")->capture_default_str();
  sub->add_option("--s-step", s->pyramid.step, "Log2 scale step")->capture_default_str();

  auto run = [s, manifest, &g] {
    s->validate();
    const fs::path manifest_path(*manifest);
    DatasetManifest m;
    try {
      m = load_manifest(manifest_path);
    } catch (const Error& e) {
      throw UserError(e.what());
    }
    Dataset data;
    data.classes = m.vocabulary;
    const fs::path fields_dir = g.out / "fields";
    fs::create_directories(fields_dir);
    data.items.resize(m.entries.size());
    std::vector<std::string> image_hashes(m.entries.size());
    parallel_for(m.entries.size(), g.jobs, [&](std::size_t i) {
      const auto& e = m.entries[i];
      Item& it = data.items[i];
      it.image = e.image;
      it.labels = e.labels;
      it.split = to_string(e.split);
      it.mask = e.mask;
      it.fields = fields_dir / index_name(i);
      image_hashes[i] = sha256_hex(read_file(e.image));
      const GrayImage img = load_image(e.image);
      it.width = img.width();
      it.height = img.height();
      save_descriptor_fields(cached_extract(it, img, *s), it.fields);
    });
    const auto index = g.out / "descriptors.json";
    save_dataset(data, index);

    Provenance prov;
    prov.command = "extract";
    prov.config = {{"descriptor", s->to_json()}, {"manifest", manifest_path.filename().string()}};
    prov.seed = g.seed;
    // The dataset identity covers the manifest and every image it lists.
    prov.dataset = sha256_hex(read_file(manifest_path) + join(image_hashes, '\n'));
    prov.pipeline = {{"descriptor", s->to_json()}};
    write_provenance(index, std::move(prov));
    std::printf("extract: %zu images -> %s\n", data.items.size(), index.string().c_str());
  };
  return {sub, run};
}

Command add_fit_vocab(CLI::App& app, const Globals& g) {
  auto v = std::make_shared<VocabSettings>();
  auto input = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("fit-vocab", "Fit a k-means codebook or a GMM on sampled descriptors");
  sub->add_option("--descriptors", *input, "descriptors.json from extract")->required()->check(CLI::ExistingFile);
  sub->add_option("--vocab", v->kind, "kmeans or gmm")->capture_default_str();
  add_vocab_options(sub, *v);

  auto run = [v, input, &g] {
    const fs::path index(*input);
    const auto upstream = read_provenance(index);
    const auto data = load_dataset(index);
    const auto bundle = fit_vocabulary(data, *v, g.seed, g.jobs);
    const auto out = g.out / "vocab.txmd";
    write_vocab(bundle, out, vocab_provenance(index, upstream, *v, g.seed));
    std::printf("fit-vocab: %s K=%lld -> %s\n", v->kind.c_str(), static_cast<long long>(v->k), out.string().c_str());
  };
  return {sub, run};
}

Command add_encode(CLI::App& app, const Globals& g) {
  auto s = std::make_shared<EncoderSettings>();
  auto v = std::make_shared<VocabSettings>();
  auto input = std::make_shared<std::string>();
  auto vocab_path = std::make_shared<std::string>();
  auto spp = std::make_shared<std::string>("1x1");
  auto* sub = app.add_subcommand("encode", "Pool every item's descriptors into one vector");
  sub->add_option("--descriptors", *input, "descriptors.json from extract")->required()->check(CLI::ExistingFile);
  sub->add_option("--vocab", *vocab_path, "Vocabulary from fit-vocab; fitted here when omitted")
      ->check(CLI::ExistingFile);
  sub->add_option("--encoder", s->encoder, "bovw, kcb, llc, vlad or fv")->capture_default_str();
  sub->add_option("--kcb-lambda", s->kcb_lambda, "Kernel codebook sharpness")->capture_default_str();
  sub->add_option("--llc-neighbors", s->llc_neighbors, "LLC neighbourhood size")->capture_default_str();
  sub->add_option("--spp", *spp, "Spatial grid, e.g. 2x2")->capture_default_str();
  sub->add_option("--postprocess", s->postprocess, "default, none, or a list of sqrt,intra,l2")
      ->capture_default_str();
  add_vocab_options(sub, *v);

  auto run = [s, v, input, vocab_path, spp, &g] {
    if (std::sscanf(spp->c_str(), "%dx%d", &s->spp_x, &s->spp_y) != 2)
      throw UserError("--spp expects GXxGY, e.g. 2x2");
    s->validate();
    const fs::path index(*input);
    const auto upstream = read_provenance(index);
    Dataset data = load_dataset(index);

    fs::path vocab_file;
    ModelBundle vocab;
    Provenance vocab_prov;
    if (vocab_path->empty()) {
      v->kind = parse_encoder_kind(s->encoder) == EncoderKind::Fv ? "gmm" : "kmeans";
      vocab = fit_vocabulary(data, *v, g.seed, g.jobs);
      vocab_file = g.out / "vocab.txmd";
      write_vocab(vocab, vocab_file, vocab_provenance(index, upstream, *v, g.seed));
    } else {
      vocab_file = *vocab_path;
      vocab = load_model(vocab_file);
    }
    vocab_prov = read_provenance(vocab_file);
    check_lineage("vocabulary/descriptor", upstream.dataset, vocab_prov.dataset, g.allow_lineage_mismatch);
    const Encoder encoder = make_encoder(vocab, *s);

    std::vector<EncodedVector> codes(data.items.size());
    parallel_for(data.items.size(), g.jobs, [&](std::size_t i) {
      try {
        codes[i] = encode_item(load_sample(data.items[i]), vocab, encoder, *s);
      } catch (const EmptyInputError&) {
        throw UserError("item " + data.items[i].image.string() + " has no descriptors");
      }
    });
    const auto vectors = g.out / "encodings.txev";
    save_encoded_vectors(codes, vectors);
    data.encodings = vectors;
    data.vocab = vocab_file;
    const auto out_index = g.out / "encodings.json";
    save_dataset(data, out_index);

    Provenance prov;
    prov.command = "encode";
    prov.config = {{"encoder", s->to_json()}, {"vocab_file", vocab_file.filename().string()}};
    prov.seed = g.seed;
    prov.dataset = upstream.dataset;
    prov.vocab = vocab_prov.vocab;
    prov.pipeline = vocab_prov.pipeline;
    prov.pipeline["encoder"] = s->to_json();
    prov.pipeline["dimension"] = codes.empty() ? 0 : codes.front().dim();
    prov.add_input(index, upstream);
    prov.add_input(vocab_file, vocab_prov);
    write_provenance(out_index, std::move(prov));
    std::printf("encode: %zu vectors of dimension %lld -> %s\n", codes.size(),
                static_cast<long long>(codes.empty() ? 0 : codes.front().dim()), out_index.string().c_str());
  };
  return {sub, run};
}

}  // namespace texbank::cli
