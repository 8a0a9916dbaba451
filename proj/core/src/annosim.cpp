#include "texbank/annosim.hpp"

#include "texbank/learn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace texbank {
namespace {

void check_attribute(int q, const CooccurrenceModel& model) {
  if (q < 0 || q >= model.attributes()) throw std::invalid_argument("attribute index out of range");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void GroundTruthMatrix::validate() const {
  if (static_cast<Index>(key.size()) != images()) throw std::invalid_argument("one key attribute per image required");
  for (Index i = 0; i < images(); ++i) {
    if (key[i] < 0 || key[i] >= attributes()) throw std::invalid_argument("key attribute out of range");
    if (present(i, key[i]) == 0) throw std::invalid_argument("key attribute must be present in its row");
    for (Index q = 0; q < attributes(); ++q)
      if (present(i, q) > 1) throw std::invalid_argument("ground truth entries must be 0 or 1");
  }
}

CooccurrenceModel estimate_cooccurrence(const GroundTruthMatrix& seed, double alpha) {
  seed.validate();
  if (!(alpha >= 0)) throw std::invalid_argument("smoothing must be nonnegative");
  const Index q_count = seed.attributes();
  if (q_count < 2) throw std::invalid_argument("need at least two attributes");
  CooccurrenceModel model;
  model.p0 = 1.0 / static_cast<double>(q_count);
  model.p_cond = Matrix::Zero(q_count, q_count);
  std::vector<double> rows(static_cast<std::size_t>(q_count), 0.0);
  for (Index i = 0; i < seed.images(); ++i) {
    const int q = seed.key[i];
    rows[q] += 1;
    for (Index other = 0; other < q_count; ++other) model.p_cond(q, other) += seed.present(i, other);
  }
  for (Index q = 0; q < q_count; ++q) {
    if (rows[q] == 0) throw Error("attribute " + std::to_string(q) + " has no seed images");
    for (Index other = 0; other < q_count; ++other)
      model.p_cond(q, other) = (model.p_cond(q, other) + alpha) / (rows[q] + 2 * alpha);
    model.p_cond(q, q) = 1.0;
  }
  return model;
}

std::vector<RankedQuery> rank_queries_prior(int q, const CooccurrenceModel& model) {
  check_attribute(q, model);
  std::vector<RankedQuery> out;
  for (Index other = 0; other < model.attributes(); ++other)
    if (other != q) out.push_back({static_cast<int>(other), model.p_cond(q, other)});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
  return out;
}

std::vector<RankedQuery> rank_queries_posterior(int q, std::span<const double> scores,
                                                const CooccurrenceModel& model) {
  check_attribute(q, model);
  if (static_cast<Index>(scores.size()) != model.attributes())
    throw std::invalid_argument("one classifier score per attribute required");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("classifier scores must be finite");
  struct Item {
    int attribute;
    double value;
    double prior;
    double score;
  };
  const double base = (1.0 - model.p0) / model.p0;
  std::vector<Item> items;
  for (Index other = 0; other < model.attributes(); ++other) {
    if (other == q) continue;
    const double p = std::clamp(model.p_cond(q, other), 1e-12, 1.0 - 1e-12);
    const double value = sigmoid(scores[other]) * (p / (1.0 - p)) * base;
    items.push_back({static_cast<int>(other), value, p, scores[other]});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.prior != b.prior) return a.prior > b.prior;
    return a.score > b.score;
  });
  std::vector<RankedQuery> out;
  for (const auto& it : items) out.push_back({it.attribute, it.value});
  return out;
}

BudgetStats simulate_budget(const GroundTruthMatrix& truth, const CooccurrenceModel& model, int budget,
                            QueryStrategy strategy, const Matrix* scores) {
  truth.validate();
  if (budget < 0) throw std::invalid_argument("budget must be nonnegative");
  if (truth.attributes() != model.attributes())
    throw std::invalid_argument("ground truth and model attribute counts differ");
  if (truth.images() == 0) throw std::invalid_argument("no images to simulate");
  if (strategy == QueryStrategy::Posterior) {
    if (!scores) throw std::invalid_argument("posterior strategy needs classifier scores");
    if (scores->rows() != truth.images() || scores->cols() != truth.attributes())
      throw std::invalid_argument("score matrix must be images x attributes");
  }

  BudgetStats stats;
  stats.budget = budget;
  double recall_sum = 0.0;
  double full = 0.0;
  for (Index i = 0; i < truth.images(); ++i) {
    const int q = truth.key[i];
    std::vector<RankedQuery> ranking;
    if (strategy == QueryStrategy::Prior) {
      ranking = rank_queries_prior(q, model);
    } else {
      const Vector row = scores->row(i).transpose();
      ranking = rank_queries_posterior(q, std::span<const double>(row.data(), row.size()), model);
    }
    double positives = 0;
    for (Index a = 0; a < truth.attributes(); ++a) positives += truth.present(i, a);
    double recovered = 1;  // the key attribute
    const std::size_t asked = std::min<std::size_t>(static_cast<std::size_t>(budget), ranking.size());
    for (std::size_t k = 0; k < asked; ++k) recovered += truth.present(i, ranking[k].attribute);
    const double recall = recovered / positives;
    recall_sum += recall;
    if (recovered == positives) full += 1;
  }
  stats.mean_recall = recall_sum / static_cast<double>(truth.images());
  stats.fully_recovered = full / static_cast<double>(truth.images());
  return stats;
}

std::vector<BudgetStats> simulate_budget_curve(const GroundTruthMatrix& truth, const CooccurrenceModel& model,
                                               QueryStrategy strategy, const Matrix* scores) {
  std::vector<BudgetStats> curve;
  for (int b = 0; b < model.attributes(); ++b) curve.push_back(simulate_budget(truth, model, b, strategy, scores));
  return curve;
}

double annotation_cost(double images, double attributes, double votes, double rate) {
  if (images < 0 || attributes < 0 || votes < 0 || rate < 0)
    throw std::invalid_argument("annotation cost inputs must be nonnegative");
  return images * attributes * votes * rate;
}

GroundTruthMatrix read_ground_truth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("ground truth CSV is empty");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "key")
    throw FormatError("ground truth CSV header must be 'key,<attr>,<attr>,...'");
  const Index q_count = static_cast<Index>(header.size()) - 1;
  std::vector<std::vector<std::uint8_t>> rows;
  std::vector<int> keys;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (static_cast<Index>(cells.size()) != q_count + 1)
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(q_count + 1) + " fields");
    std::size_t used = 0;
    int key = -1;
    try {
      key = std::stoi(cells[0], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cells[0].size() || cells[0].empty())
      throw FormatError("line " + std::to_string(line_no) + ": key must be an attribute index");
    std::vector<std::uint8_t> row;
    for (Index q = 0; q < q_count; ++q) {
      const auto& c = cells[q + 1];
      if (c != "0" && c != "1") throw FormatError("line " + std::to_string(line_no) + ": flags must be 0 or 1");
      row.push_back(c == "1");
    }
    rows.push_back(std::move(row));
    keys.push_back(key);
  }
  GroundTruthMatrix gt;
  gt.present.resize(static_cast<Index>(rows.size()), q_count);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index q = 0; q < q_count; ++q) gt.present(static_cast<Index>(i), q) = rows[i][q];
  gt.key = std::move(keys);
  try {
    gt.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return gt;
}

GroundTruthMatrix load_ground_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ground truth " + path.string());
  return read_ground_truth_csv(in);
}

void write_ground_truth_csv(std::ostream& out, const GroundTruthMatrix& truth) {
  truth.validate();
  out << "key";
  for (Index q = 0; q < truth.attributes(); ++q) out << ",a" << q;
  out << '\n';
  for (Index i = 0; i < truth.images(); ++i) {
    out << truth.key[i];
    for (Index q = 0; q < truth.attributes(); ++q) out << ',' << static_cast<int>(truth.present(i, q));
    out << '\n';
  }
}

void write_budget_report_csv(std::ostream& out, const std::vector<BudgetStats>& curve) {
  const auto old_precision = out.precision();
  out << std::setprecision(12) << "budget,mean_recall,fully_recovered\n";
  for (const auto& s : curve) out << s.budget << ',' << s.mean_recall << ',' << s.fully_recovered << '\n';
  out.precision(old_precision);
}

}  // namespace texbank
