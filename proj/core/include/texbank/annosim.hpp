#pragma once

#include "texbank/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace texbank {

/// Binary image x attribute labels; each row's key attribute is set.
struct GroundTruthMatrix {
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> present;
  std::vector<int> key;

  Index images() const { return present.rows(); }
  Index attributes() const { return present.cols(); }
  void validate() const;
};

/// Q x Q conditional co-occurrence p(q' | q) (row q), unit diagonal.
struct CooccurrenceModel {
  Matrix p_cond;
  double p0 = 0.0;

  Index attributes() const { return p_cond.rows(); }
};

/// Laplace-smoothed (alpha = 1) fraction of key-q images showing q'.
CooccurrenceModel estimate_cooccurrence(const GroundTruthMatrix& seed, double alpha = 1.0);

struct RankedQuery {
  int attribute = 0;
  double value = 0.0;  // prior probability or adjusted posterior
};

/// Attributes other than q by decreasing p(q'|q), index order on ties.
std::vector<RankedQuery> rank_queries_prior(int q, const CooccurrenceModel& model);

/// sigmoid(c_q') * odds(p(q'|q)) * (1 - p0) / p0, decreasing. Ties fall back
/// to the prior, then the score, then the index.
std::vector<RankedQuery> rank_queries_posterior(int q, std::span<const double> scores,
                                                const CooccurrenceModel& model);

enum class QueryStrategy { Prior, Posterior };

struct BudgetStats {
  int budget = 0;
  double mean_recall = 0.0;
  double fully_recovered = 0.0;  // fraction of images with recall 1
};

/// Queries the top `budget` attributes of each image. The key attribute is
/// always known. `scores` (images x attributes) is required for Posterior.
BudgetStats simulate_budget(const GroundTruthMatrix& truth, const CooccurrenceModel& model,
                            int budget, QueryStrategy strategy,
                            const Matrix* scores = nullptr);

/// Budgets 0..Q-1.
std::vector<BudgetStats> simulate_budget_curve(const GroundTruthMatrix& truth,
                                               const CooccurrenceModel& model,
                                               QueryStrategy strategy,
                                               const Matrix* scores = nullptr);

double annotation_cost(double images, double attributes, double votes, double rate);

/// CSV with a header row: key,<attr0>,<attr1>,... ; each row the key index
/// followed by 0/1 flags.
GroundTruthMatrix read_ground_truth_csv(std::istream& in);
GroundTruthMatrix load_ground_truth_csv(const std::filesystem::path& path);
void write_ground_truth_csv(std::ostream& out, const GroundTruthMatrix& truth);
void write_budget_report_csv(std::ostream& out, const std::vector<BudgetStats>& curve);

}  // namespace texbank
