#include "commands.hpp"

#include "texbank/annosim.hpp"
#include "texbank/learn.hpp"
#include "texbank/segment.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <memory>
#include <sstream>

namespace texbank::cli {

Command add_segment(CLI::App& app, const Globals& g) {
  auto model_path = std::make_shared<std::string>();
  auto image_path = std::make_shared<std::string>();
  auto proposals_path = std::make_shared<std::string>();
  auto crisp = std::make_shared<bool>(false);
  auto* sub = app.add_subcommand("segment", "Label an image by greedily pasting scored region proposals");
  sub->add_option("--model", *model_path, "model.txmd from train (linear kernel)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--image", *image_path, "Image to segment")->required()->check(CLI::ExistingFile);
  sub->add_option("--proposals", *proposals_path, "Run-length encoded proposals: id row col_start col_end")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_flag("--crisp", *crisp, "Proposals form a partition; score without dividing by area");

  auto run = [=, &g] {
    const fs::path model_file(*model_path);
    const auto model_prov = read_provenance(model_file);
    const auto& pipe = model_prov.pipeline;
    if (!pipe.contains("descriptor") || !pipe.contains("encoder") || !pipe.contains("learn"))
      throw UserError("model provenance lacks the descriptor, encoder or learn settings");
    if (pipe.at("learn").at("kernel") != "linear") throw UserError("segment needs a model trained with --kernel linear");
    const auto desc = DescriptorSettings::from_json(pipe.at("descriptor"));
    const auto enc = EncoderSettings::from_json(pipe.at("encoder"));
    if (enc.spp_x != 1 || enc.spp_y != 1) throw UserError("segment needs a model trained without spatial pooling");
    const ModelBundle bundle = load_model(model_file);
    if (!bundle.classifier) throw UserError("model file holds no linear classifier");
    const auto classes = pipe.at("classes").get<std::vector<std::string>>();

    const GrayImage img = load_image(*image_path);
    DescriptorSample sample = fields_to_sample(extract_fields(img, desc));
    sample.image_width = img.width();
    sample.image_height = img.height();
    if (bundle.whitener) sample.descriptors = bundle.whitener->transform(sample.descriptors);

    const auto regions = load_rle_proposals(*proposals_path, img.width(), img.height());
    std::vector<Mask> masks;
    std::vector<int> ids;
    for (const auto& [id, m] : regions) {
      ids.push_back(id);
      masks.push_back(m);
    }
    ScoringOptions opt;
    opt.postprocess = enc.postprocess_spec();
    opt.divide_by_area = !*crisp;
    const Encoder encoder = encoder_for(bundle, enc);
    const auto scored = score_proposals(masks, *bundle.classifier, sample, encoder, opt);
    const auto result = greedy_paste(scored, img.width(), img.height());

    const auto labels_out = g.out / "labels.pgm";
    const auto tmp = fs::path(labels_out.string() + ".tmp.pgm");
    save_label_map(result.labels, tmp);
    fs::rename(tmp, labels_out);

    std::vector<std::size_t> painted(scored.size(), 0);
    std::vector<int> slot(masks.size(), -1);
    for (std::size_t i = 0; i < scored.size(); ++i) slot[scored[i].source] = static_cast<int>(i);
    for (int owner : result.owner)
      if (owner >= 0) ++painted[static_cast<std::size_t>(owner)];
    std::ostringstream csv;
    csv.precision(17);
    csv << "region,label,area,score,painted\n";
    for (std::size_t i = 0; i < scored.size(); ++i) {
      const auto& r = scored[i];
      csv << ids[r.source] << ',' << classes[static_cast<std::size_t>(r.label - 1)] << ',' << r.area << ','
          << r.score << ',' << painted[i] << '\n';
    }
    const auto regions_out = g.out / "regions.csv";
    write_file_atomically(regions_out, csv.str());

    Provenance prov;
    prov.command = "segment";
    prov.config = {{"crisp", *crisp}};
    prov.seed = g.seed;
    prov.dataset = sha256_hex(read_file(*image_path));
    prov.vocab = model_prov.vocab;
    prov.pipeline = pipe;
    prov.add_input(model_file, model_prov);
    Provenance image_prov;
    image_prov.config_hash = prov.dataset;
    prov.add_input(*image_path, image_prov);
    write_provenance(labels_out, prov);
    write_provenance(regions_out, std::move(prov));
    std::printf("segment: %zu of %zu proposals scored -> %s\n", scored.size(), masks.size(),
                labels_out.string().c_str());
  };
  return {sub, run};
}

namespace {

Matrix read_score_csv(const fs::path& path, Index rows, Index cols) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);  // header
  Matrix m(rows, cols);
  Index r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (r >= rows || static_cast<Index>(cells.size()) != cols)
      throw UserError("score matrix in " + path.string() + " does not match the ground truth shape");
    for (Index c = 0; c < cols; ++c) {
      try {
        m(r, c) = std::stod(cells[static_cast<std::size_t>(c)]);
      } catch (const std::exception&) {
        throw UserError("bad score '" + cells[static_cast<std::size_t>(c)] + "' in " + path.string());
      }
    }
    ++r;
  }
  if (r != rows) throw UserError("score matrix in " + path.string() + " does not match the ground truth shape");
  return m;
}

}  // namespace

Command add_annosim(CLI::App& app, const Globals& g) {
  struct Settings {
    std::string truth, seed_set, scores;
    std::string strategy = "prior";
    double alpha = 1.0;
    double votes = 5.0;
    double rate = 0.01;
  };
  auto s = std::make_shared<Settings>();
  auto* sub = app.add_subcommand("annosim", "Simulate attribute annotation with a co-occurrence query model");
  sub->add_option("--truth", s->truth, "Ground-truth CSV (key,attr...) of the images to annotate")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--seed-set", s->seed_set, "Ground-truth CSV the co-occurrence model is estimated on")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--strategy", s->strategy, "prior or posterior")->capture_default_str();
  sub->add_option("--scores", s->scores, "Attribute scores, one row per image (posterior strategy)")
      ->check(CLI::ExistingFile);
  sub->add_option("--alpha", s->alpha, "Laplace smoothing")->capture_default_str();
  sub->add_option("--votes", s->votes, "Votes per question")->capture_default_str();
  sub->add_option("--rate", s->rate, "Price per vote")->capture_default_str();

  auto run = [s, &g] {
    QueryStrategy strategy;
    if (s->strategy == "prior") strategy = QueryStrategy::Prior;
    else if (s->strategy == "posterior") strategy = QueryStrategy::Posterior;
    else throw UserError("unknown strategy '" + s->strategy + "' (prior, posterior)");
    if (strategy == QueryStrategy::Posterior && s->scores.empty()) throw UserError("--strategy posterior needs --scores");

    const auto truth = load_ground_truth_csv(s->truth);
    const auto seed_set = load_ground_truth_csv(s->seed_set);
    if (truth.present.cols() != seed_set.present.cols())
      throw UserError("truth and seed set differ in attribute count");
    CooccurrenceModel model;
    try {
      model = estimate_cooccurrence(seed_set, s->alpha);
    } catch (const std::invalid_argument& e) {
      throw UserError(e.what());
    }
    Matrix scores;
    if (!s->scores.empty()) scores = read_score_csv(s->scores, truth.present.rows(), truth.present.cols());
    const auto curve = simulate_budget_curve(truth, model, strategy, s->scores.empty() ? nullptr : &scores);

    std::ostringstream csv;
    write_budget_report_csv(csv, curve);
    const auto out = g.out / "budget.csv";
    write_file_atomically(out, csv.str());

    const double cost = annotation_cost(static_cast<double>(truth.present.rows()),
                                        static_cast<double>(truth.present.cols()), s->votes, s->rate);
    Provenance prov;
    prov.command = "annosim";
    prov.config = {{"strategy", s->strategy}, {"alpha", s->alpha}, {"votes", s->votes}, {"rate", s->rate}};
    prov.seed = g.seed;
    prov.dataset = sha256_hex(read_file(s->truth));
    prov.pipeline = {{"exhaustive_cost", cost}};
    for (const auto& p : {s->truth, s->seed_set, s->scores}) {
      if (p.empty()) continue;
      Provenance file;
      file.config_hash = sha256_hex(read_file(p));
      prov.add_input(p, file);
    }
    write_provenance(out, std::move(prov));
    std::printf("annosim: %lld images, %lld attributes, exhaustive cost %.2f -> %s\n",
                static_cast<long long>(truth.present.rows()), static_cast<long long>(truth.present.cols()), cost,
                out.string().c_str());
  };
  return {sub, run};
}

}  // namespace texbank::cli
