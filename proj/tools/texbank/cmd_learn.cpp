#include "commands.hpp"

#include "texbank/learn.hpp"
#include "texbank/metrics.hpp"
#include "texbank/segment.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

namespace texbank::cli {
namespace {

struct LearnSettings {
  std::string kernel = "linear";
  std::optional<double> lambda;
  bool normalize = false;
  double c = 1.0;
  bool recalibrate = false;
  bool platt = false;
  std::string splits = "train";

  Json to_json() const {
    Json j = {{"kernel", kernel}, {"C", c}, {"normalize", normalize}, {"recalibrate", recalibrate},
              {"platt", platt}, {"splits", splits}};
    if (lambda) j["lambda"] = *lambda;
    return j;
  }
};

Matrix stack(const std::vector<EncodedVector>& codes, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return {};
  Matrix x(static_cast<Index>(rows.size()), codes[rows.front()].dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (codes[rows[r]].dim() != x.cols()) throw UserError("encoded vectors differ in dimension");
    x.row(static_cast<Index>(r)) = codes[rows[r]].values.transpose();
  }
  return x;
}

// Feature map applied before the classifier, shared by train and predict.
Matrix apply_feature_map(Matrix x, KernelKind kind) {
  if (kind == KernelKind::Hellinger) return x.unaryExpr([](double v) { return std::copysign(std::sqrt(std::abs(v)), v); });
  if (kind == KernelKind::AdditiveChi2 || kind == KernelKind::ExpChi2) {
    if ((x.array() < 0).any()) throw UserError("chi2 kernels need nonnegative encodings (use bovw, kcb or llc)");
    for (Index i = 0; i < x.rows(); ++i) {
      const double s = x.row(i).sum();
      if (s > 0) x.row(i) /= s;
    }
  }
  return x;
}

std::vector<EncodedVector> load_codes(const Dataset& data) {
  if (data.encodings.empty()) throw UserError("dataset index has no encodings; run encode first");
  auto codes = load_encoded_vectors(data.encodings);
  if (codes.size() != data.items.size()) throw UserError("encoding count does not match the dataset index");
  return codes;
}

bool single_label(const Dataset& data, const std::vector<std::size_t>& rows) {
  for (auto r : rows)
    if (data.items[r].labels.size() != 1) return false;
  return true;
}

KernelKind parse_kernel(const std::string& name) {
  try {
    return parse_kernel_kind(name);
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
}

}  // namespace

Command add_train(CLI::App& app, const Globals& g) {
  auto s = std::make_shared<LearnSettings>();
  auto input = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("train", "Train one-vs-all SVMs on encoded vectors");
  sub->add_option("--encodings", *input, "encodings.json from encode")->required()->check(CLI::ExistingFile);
  sub->add_option("--kernel", s->kernel, "linear, hellinger, additive_chi2 or exp_chi2")->capture_default_str();
  sub->add_option("--lambda", s->lambda, "exp-chi2 bandwidth (estimated when omitted)");
  sub->add_flag("--kernel-normalize", s->normalize, "Normalise the Gram matrix to a unit diagonal");
  sub->add_option("--C", s->c, "SVM regularisation constant")->capture_default_str();
  sub->add_flag("--recalibrate", s->recalibrate, "Map median training scores to +1/-1");
  sub->add_flag("--platt", s->platt, "Fit per-class Platt sigmoids on training scores");
  sub->add_option("--splits", s->splits, "Training splits, comma separated")->capture_default_str();

  auto run = [s, input, &g] {
    const fs::path index(*input);
    const auto upstream = read_provenance(index);
    const Dataset data = load_dataset(index);
    const auto codes = load_codes(data);
    const auto rows = select_split(data, s->splits);
    const auto kind = parse_kernel(s->kernel);
    const Matrix x = apply_feature_map(stack(codes, rows), kind);
    const bool single = single_label(data, rows);
    std::vector<int> labels;
    Eigen::MatrixXi membership = Eigen::MatrixXi::Zero(x.rows(), static_cast<Index>(data.classes.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& it = data.items[rows[r]];
      if (single) labels.push_back(it.labels.front());
      for (int l : it.labels) membership(static_cast<Index>(r), l) = 1;
    }

    SvmOptions opt;
    opt.C = s->c;
    opt.seed = g.seed;
    ModelBundle bundle = load_model(data.vocab);
    Matrix train_scores;
    try {
      if (kind == KernelKind::Linear || kind == KernelKind::Hellinger) {
        if (s->normalize || s->lambda) throw UserError("--kernel-normalize and --lambda apply to chi2 kernels");
        auto clf = single ? train_linear_svm_ova(x, labels, opt, data.classes)
                          : train_linear_svm_multilabel(x, membership, opt, data.classes);
        if (s->recalibrate) {
          if (!single) throw UserError("recalibration needs single-label training data");
          clf = recalibrate(clf, x, labels);
        }
        train_scores = clf.decision_values(x);
        bundle.classifier = std::move(clf);
      } else {
        if (!single) throw UserError("kernel SVMs need single-label training data");
        if (s->recalibrate) throw UserError("recalibration applies to linear models");
        KernelSpec spec{kind, s->lambda, s->normalize};
        if (kind == KernelKind::ExpChi2 && !spec.lambda) spec.lambda = estimate_chi2_lambda(x);
        spec.validate();
        const Matrix k = compute_kernel(x, x, spec);
        auto model = train_kernel_svm_ova(k, labels, opt, spec, data.classes);
        model.training = x;
        train_scores = model.decision_values_from_kernel(k);
        bundle.kernel_model = std::move(model);
      }
    } catch (const std::invalid_argument& e) {
      throw UserError(e.what());
    }
    if (s->platt) {
      std::vector<CalibrationParams> cal;
      for (Index c = 0; c < train_scores.cols(); ++c) {
        std::vector<double> sc(static_cast<std::size_t>(x.rows()));
        std::vector<int> y(sc.size());
        for (Index i = 0; i < x.rows(); ++i) {
          sc[i] = train_scores(i, c);
          y[i] = membership(i, c) ? 1 : -1;
        }
        cal.push_back(platt_calibrate(sc, y));
      }
      bundle.calibration = std::move(cal);
    }
    const auto out = g.out / "model.txmd";
    save_model(bundle, out);

    Provenance prov;
    prov.command = "train";
    prov.config = s->to_json();
    prov.seed = g.seed;
    prov.dataset = upstream.dataset;
    prov.vocab = upstream.vocab;
    prov.pipeline = upstream.pipeline;
    Json learn = s->to_json();
    if (bundle.kernel_model && bundle.kernel_model->spec.lambda) learn["lambda"] = *bundle.kernel_model->spec.lambda;
    prov.pipeline["learn"] = learn;
    prov.pipeline["classes"] = data.classes;
    prov.add_input(index, upstream);
    write_provenance(out, std::move(prov));
    std::printf("train: %zu examples, %zu classes, %s kernel -> %s\n", rows.size(), data.classes.size(),
                s->kernel.c_str(), out.string().c_str());
  };
  return {sub, run};
}

Command add_predict(CLI::App& app, const Globals& g) {
  auto input = std::make_shared<std::string>();
  auto model_path = std::make_shared<std::string>();
  auto splits = std::make_shared<std::string>("test");
  auto* sub = app.add_subcommand("predict", "Score encoded vectors with a trained model");
  sub->add_option("--encodings", *input, "encodings.json from encode")->required()->check(CLI::ExistingFile);
  sub->add_option("--model", *model_path, "model.txmd from train")->required()->check(CLI::ExistingFile);
  sub->add_option("--splits", *splits, "Splits to score, comma separated, or all")->capture_default_str();

  auto run = [input, model_path, splits, &g] {
    const fs::path index(*input), model_file(*model_path);
    const auto upstream = read_provenance(index);
    const auto model_prov = read_provenance(model_file);
    check_lineage("vocabulary", model_prov.vocab, upstream.vocab, g.allow_lineage_mismatch);
    check_lineage("encoder settings", sha256_hex(model_prov.pipeline.value("encoder", Json()).dump()),
                  sha256_hex(upstream.pipeline.value("encoder", Json()).dump()), g.allow_lineage_mismatch);
    const Dataset data = load_dataset(index);
    const auto codes = load_codes(data);
    const auto rows = select_split(data, *splits);
    const ModelBundle bundle = load_model(model_file);
    const auto classes = model_prov.pipeline.at("classes").get<std::vector<std::string>>();
    const auto kind = parse_kernel(model_prov.pipeline.at("learn").at("kernel").get<std::string>());
    const Matrix x = apply_feature_map(stack(codes, rows), kind);

    Matrix scores;
    try {
      if (bundle.classifier) {
        if (bundle.classifier->dim() != x.cols())
          throw UserError("model expects " + std::to_string(bundle.classifier->dim()) + "-D vectors, got " +
                          std::to_string(x.cols()));
        scores = bundle.classifier->decision_values(x);
      } else if (bundle.kernel_model) {
        if (bundle.kernel_model->training.cols() != x.cols()) throw UserError("model and encodings differ in dimension");
        scores = bundle.kernel_model->decision_values(x);
      } else {
        throw UserError("model file holds no classifier");
      }
    } catch (const std::invalid_argument& e) {
      throw UserError(e.what());
    }

    std::ostringstream csv;
    csv.precision(17);
    csv << "item,image,split,truth,predicted";
    for (const auto& c : classes) csv << ",score:" << c;
    if (bundle.calibration)
      for (const auto& c : classes) csv << ",prob:" << c;
    csv << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& it = data.items[rows[r]];
      std::vector<std::string> truth;
      for (int l : it.labels) truth.push_back(data.classes[l]);
      Index best = 0;
      scores.row(static_cast<Index>(r)).maxCoeff(&best);
      csv << rows[r] << ',' << it.image.filename().string() << ',' << it.split << ',' << join(truth, ';') << ','
          << classes[best];
      for (Index c = 0; c < scores.cols(); ++c) csv << ',' << scores(static_cast<Index>(r), c);
      if (bundle.calibration)
        for (Index c = 0; c < scores.cols(); ++c)
          csv << ',' << (*bundle.calibration)[c].probability(scores(static_cast<Index>(r), c));
      csv << '\n';
    }
    const auto out = g.out / "predictions.csv";
    write_file_atomically(out, csv.str());

    Provenance prov;
    prov.command = "predict";
    prov.config = {{"splits", *splits}};
    prov.seed = g.seed;
    prov.dataset = upstream.dataset;
    prov.vocab = upstream.vocab;
    prov.pipeline = model_prov.pipeline;
    prov.add_input(index, upstream);
    prov.add_input(model_file, model_prov);
    write_provenance(out, std::move(prov));
    std::printf("predict: %zu items -> %s\n", rows.size(), out.string().c_str());
  };
  return {sub, run};
}

namespace {

struct Predictions {
  std::vector<std::string> classes;
  std::vector<std::size_t> items;
  std::vector<std::vector<int>> truth;
  std::vector<int> predicted;
  Matrix scores;
};

Predictions read_predictions(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw UserError("empty predictions file " + path.string());
  const auto header = split(line, ',');
  if (header.size() < 6 || header[0] != "item" || header[3] != "truth" || header[4] != "predicted")
    throw UserError("unexpected predictions header in " + path.string());
  Predictions p;
  for (std::size_t i = 5; i < header.size() && header[i].rfind("score:", 0) == 0; ++i)
    p.classes.push_back(header[i].substr(6));
  std::map<std::string, int> index;
  for (std::size_t c = 0; c < p.classes.size(); ++c) index[p.classes[c]] = static_cast<int>(c);
  auto class_of = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw UserError("unknown class '" + name + "' in " + path.string());
    return it->second;
  };
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw UserError("malformed predictions row in " + path.string());
    p.items.push_back(std::stoul(cells[0]));
    std::vector<int> t;
    for (const auto& name : split(cells[3], ';')) t.push_back(class_of(name));
    p.truth.push_back(std::move(t));
    p.predicted.push_back(class_of(cells[4]));
    std::vector<double> s;
    for (std::size_t c = 0; c < p.classes.size(); ++c) s.push_back(std::stod(cells[5 + c]));
    rows.push_back(std::move(s));
  }
  if (rows.empty()) throw UserError("no predictions in " + path.string());
  p.scores.resize(static_cast<Index>(rows.size()), static_cast<Index>(p.classes.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < p.classes.size(); ++c) p.scores(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
  return p;
}

std::vector<ReportRow> classification_report(const Predictions& p, ApVariant variant) {
  std::vector<ReportRow> report;
  const int classes = static_cast<int>(p.classes.size());
  bool single = true;
  for (const auto& t : p.truth) single = single && t.size() == 1;
  if (single) {
    std::vector<int> truth;
    for (const auto& t : p.truth) truth.push_back(t.front());
    std::vector<int> present(static_cast<std::size_t>(classes), 0);
    for (int t : truth) present[t] = 1;
    // Classes absent from the evaluated items carry no recall.
    std::vector<int> remap(static_cast<std::size_t>(classes), -1);
    int used = 0;
    for (int c = 0; c < classes; ++c)
      if (present[c]) remap[c] = used++;
    std::vector<int> t2, p2;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      t2.push_back(remap[truth[i]]);
      p2.push_back(remap[p.predicted[i]] >= 0 ? remap[p.predicted[i]] : used);
    }
    const auto acc = per_class_accuracy(t2, p2, used);
    ReportRow row{"accuracy", {}, acc.mean};
    for (int c = 0; c < classes; ++c)
      row.per_class.push_back(present[c] ? acc.per_class[remap[c]] : std::numeric_limits<double>::quiet_NaN());
    report.push_back(std::move(row));
  }
  ReportRow ap{std::string("map_") + to_string(variant), {}, 0.0};
  int counted = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> s;
    std::vector<std::uint8_t> pos;
    for (std::size_t i = 0; i < p.truth.size(); ++i) {
      s.push_back(p.scores(static_cast<Index>(i), c));
      pos.push_back(std::find(p.truth[i].begin(), p.truth[i].end(), c) != p.truth[i].end());
    }
    if (std::find(pos.begin(), pos.end(), 1) == pos.end()) {
      ap.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    ap.per_class.push_back(average_precision(s, pos, variant));
    ap.aggregate += ap.per_class.back();
    ++counted;
  }
  if (counted == 0) throw UserError("no class has a positive item; cannot compute AP");
  ap.aggregate /= counted;
  report.push_back(std::move(ap));
  return report;
}

}  // namespace

Command add_evaluate(CLI::App& app, const Globals& g) {
  auto predictions = std::make_shared<std::string>();
  auto truth = std::make_shared<std::string>();
  auto label_map = std::make_shared<std::string>();
  auto truth_map = std::make_shared<std::string>();
  auto ap_variant = std::make_shared<std::string>("pascal08");
  auto* sub = app.add_subcommand("evaluate", "Accuracy and AP of predictions, or pixel accuracy of label maps");
  auto* pred_opt = sub->add_option("--predictions", *predictions, "predictions.csv from predict")
                       ->check(CLI::ExistingFile);
  sub->add_option("--truth", *truth, "Dataset index whose labels replace those in the predictions")
      ->check(CLI::ExistingFile)
      ->needs(pred_opt);
  auto* map_opt = sub->add_option("--label-map", *label_map, "Predicted label map from segment")
                      ->check(CLI::ExistingFile);
  sub->add_option("--truth-map", *truth_map, "Ground-truth label map (0 = unlabelled)")
      ->check(CLI::ExistingFile)
      ->needs(map_opt);
  map_opt->excludes(pred_opt);
  sub->add_option("--ap", *ap_variant, "pascal08 or eleven_point")->capture_default_str();

  auto run = [=, &g] {
    std::vector<ReportRow> report;
    Provenance prov;
    prov.command = "evaluate";
    prov.seed = g.seed;
    if (!predictions->empty()) {
      ApVariant variant;
      if (*ap_variant == "pascal08") variant = ApVariant::Pascal08;
      else if (*ap_variant == "eleven_point") variant = ApVariant::ElevenPoint;
      else throw UserError("unknown AP variant '" + *ap_variant + "'");
      const fs::path pred_file(*predictions);
      const auto pred_prov = read_provenance(pred_file);
      Predictions p = read_predictions(pred_file);
      if (!truth->empty()) {
        const fs::path truth_file(*truth);
        const auto truth_prov = read_provenance(truth_file);
        check_lineage("dataset", pred_prov.dataset, truth_prov.dataset, g.allow_lineage_mismatch);
        const Dataset data = load_dataset(truth_file);
        if (data.classes != p.classes) throw UserError("class lists differ between predictions and truth");
        for (std::size_t i = 0; i < p.items.size(); ++i) {
          if (p.items[i] >= data.items.size()) throw UserError("prediction refers to a missing item");
          p.truth[i] = data.items[p.items[i]].labels;
        }
        prov.add_input(truth_file, truth_prov);
      }
      report = classification_report(p, variant);
      prov.config = {{"mode", "classification"}, {"ap", *ap_variant}, {"truth", !truth->empty()}};
      prov.dataset = pred_prov.dataset;
      prov.vocab = pred_prov.vocab;
      prov.add_input(pred_file, pred_prov);
    } else if (!label_map->empty()) {
      if (truth_map->empty()) throw UserError("--label-map needs --truth-map");
      const auto pred = load_label_map(*label_map);
      const auto gt = load_label_map(*truth_map);
      ReportRow plain{"pixel_accuracy", {}, pixel_accuracy(pred, gt, false)};
      auto recall = pixel_class_recall(pred, gt);
      ReportRow norm{"pp_accuracy", {recall.begin() + 1, recall.end()}, pixel_accuracy(pred, gt, true)};
      report = {plain, norm};
      prov.config = {{"mode", "segmentation"}};
      prov.dataset = sha256_hex(read_file(*truth_map));
    } else {
      throw UserError("evaluate needs --predictions or --label-map");
    }
    std::ostringstream csv;
    write_report_csv(csv, report);
    const auto out = g.out / "report.csv";
    write_file_atomically(out, csv.str());
    write_provenance(out, std::move(prov));
    for (const auto& row : report) std::printf("%s %.6f\n", row.metric.c_str(), row.aggregate);
  };
  return {sub, run};
}

}  // namespace texbank::cli
