#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prisomap/linalg.hpp"
#include "prisomap/neighbor_graph.hpp"

namespace prisomap {

inline constexpr const char* kEvalReportSchema = "evalreport/1";

struct StressResult {
  double value = 0.0;
  std::size_t pairs = 0;           // finite pairs i < j used
  std::size_t excluded_pairs = 0;  // pairs with an unreachable reference distance
};

// Kruskal stress-1 over finite reference pairs i < j:
// sqrt( sum (d_ref - d_emb)^2 / sum d_ref^2 ). NaN reference entries are
// excluded and counted. Throws NoFinitePairs.
StressResult stress(const Matrix& reference, const Matrix& embedded);

// 1 - r^2 between finite reference distances and embedded distances (i < j).
double residual_variance(const Matrix& reference, const Matrix& embedded);

// Pearson correlation over the same pairs as residual_variance.
double distance_correlation(const Matrix& reference, const Matrix& embedded);

struct NeighborhoodScores {
  double trustworthiness = 0.0;
  double continuity = 0.0;
  Index m = 0;
};

// Rank-based trustworthiness and continuity at neighbourhood size m, from the
// two distance matrices. Rank ties break by lower index; NaN reference entries
// rank last. Requires 1 <= m < n/2.
NeighborhoodScores trustworthiness_continuity(const Matrix& reference, const Matrix& embedded, Index m);

struct FoldAssignment {
  Index folds = 0;
  std::vector<int> fold;  // fold id per observation
};

// Each class is shuffled with the seed and dealt round-robin, continuing the
// deal where the previous class stopped. Throws ClassTooSmall if a class has
// fewer members than folds.
FoldAssignment make_stratified_folds(const std::vector<int>& labels, Index folds, std::uint64_t seed);

struct CvResult {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation over folds
  std::vector<double> fold_accuracy;
  Index k = 0;
  Index folds = 0;
};

// Majority-vote k-NN in the embedding; vote ties go to the tied class with
// the nearest member.
CvResult knn_classify_cv(const Matrix& coordinates, const std::vector<int>& labels, Index k_clf,
                         const FoldAssignment& assignment);
CvResult knn_classify_cv(const Matrix& coordinates, const std::vector<int>& labels, Index k_clf, Index folds,
                         std::uint64_t seed);

// Coefficient of variation sd/mean of the density values (population sd).
double uniformity_cv(const DensityEstimate& density);

struct EvalReport {
  nlohmann::json run = nlohmann::json::object();  // method descriptor and run config
  Index n_points = 0;
  std::optional<StressResult> stress;
  std::optional<double> residual_variance;
  std::optional<NeighborhoodScores> neighborhood;
  std::optional<CvResult> knn;
  std::optional<double> density_cv;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage

  nlohmann::json to_json(bool include_timings = true) const;
  static std::string csv_header();
  std::string to_csv_line() const;
};

struct EvalRequest {
  const Matrix* reference = nullptr;       // distances scored by stress / residual variance
  const Matrix* rank_reference = nullptr;  // distances ranked for T and C
  const Matrix* coordinates = nullptr;     // embedding rows aligned with the references
  Index neighborhood = 10;
  const std::vector<int>* labels = nullptr;
  const FoldAssignment* folds = nullptr;
  Index k_clf = 5;
  const DensityEstimate* density = nullptr;
};

EvalReport evaluate(const EvalRequest& request);

}  // namespace prisomap
