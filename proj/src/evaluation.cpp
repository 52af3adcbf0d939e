#include "prisomap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "prisomap/datasets.hpp"
#include "prisomap/error.hpp"
#include "prisomap/parallel.hpp"
#include "prisomap/random.hpp"

namespace prisomap {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw Error(ErrorCode::CountMismatch, "distance matrices must be square with matching index sets");
  }
}

struct PairMoments {
  std::size_t count = 0;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
};

double pearson(const Matrix& reference, const Matrix& embedded) {
  require_same_shape(reference, embedded);
  const Index n = reference.rows();
  // Two passes around the means for accuracy.
  double mx = 0, my = 0;
  std::size_t count = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (std::isnan(reference(i, j))) continue;
      mx += reference(i, j);
      my += embedded(i, j);
      ++count;
    }
  }
  if (count < 2) throw Error(ErrorCode::NoFinitePairs, "fewer than two finite distance pairs");
  mx /= static_cast<double>(count);
  my /= static_cast<double>(count);
  double sxx = 0, syy = 0, sxy = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (std::isnan(reference(i, j))) continue;
      const double dx = reference(i, j) - mx;
      const double dy = embedded(i, j) - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::InvalidArgument, "constant distances have no correlation");
  return sxy / std::sqrt(sxx * syy);
}

// rank[j] = 1-based position of j among the others, ascending by (distance, index).
void ranks_from_row(const Matrix& d, Index i, std::vector<Index>& order, std::vector<Index>& rank) {
  const Index n = d.rows();
  order.clear();
  for (Index j = 0; j < n; ++j) {
    if (j != i) order.push_back(j);
  }
  auto key = [&](Index j) {
    const double v = d(i, j);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double ka = key(a), kb = key(b);
    return ka < kb || (ka == kb && a < b);
  });
  rank.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<Index>(r + 1);
}

nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::string csv_number(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

}  // namespace

StressResult stress(const Matrix& reference, const Matrix& embedded) {
  require_same_shape(reference, embedded);
  const Index n = reference.rows();
  StressResult out;
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double r = reference(i, j);
      if (std::isnan(r)) {
        ++out.excluded_pairs;
        continue;
      }
      const double diff = r - embedded(i, j);
      num += diff * diff;
      den += r * r;
      ++out.pairs;
    }
  }
  if (out.pairs == 0) throw Error(ErrorCode::NoFinitePairs, "no finite reference pairs");
  if (den == 0.0) {
    out.value = num == 0.0 ? 0.0 : 1.0;
    return out;
  }
  out.value = std::sqrt(num / den);
  return out;
}

double residual_variance(const Matrix& reference, const Matrix& embedded) {
  const double r = pearson(reference, embedded);
  return 1.0 - r * r;
}

double distance_correlation(const Matrix& reference, const Matrix& embedded) { return pearson(reference, embedded); }

NeighborhoodScores trustworthiness_continuity(const Matrix& reference, const Matrix& embedded, Index m) {
  require_same_shape(reference, embedded);
  const Index n = reference.rows();
  if (m < 1 || 2 * m >= n) throw Error(ErrorCode::InvalidArgument, "neighbourhood size must satisfy 1 <= m < n/2");

  std::vector<double> t_sum(static_cast<std::size_t>(n), 0.0), c_sum(static_cast<std::size_t>(n), 0.0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const Index i = static_cast<Index>(row);
    std::vector<Index> order_ref, rank_ref, order_emb, rank_emb;
    ranks_from_row(reference, i, order_ref, rank_ref);
    ranks_from_row(embedded, i, order_emb, rank_emb);
    double t = 0.0, c = 0.0;
    for (Index r = 0; r < m; ++r) {
      const Index j_emb = order_emb[static_cast<std::size_t>(r)];
      const Index in_ref = rank_ref[static_cast<std::size_t>(j_emb)];
      if (in_ref > m) t += static_cast<double>(in_ref - m);
      const Index j_ref = order_ref[static_cast<std::size_t>(r)];
      const Index in_emb = rank_emb[static_cast<std::size_t>(j_ref)];
      if (in_emb > m) c += static_cast<double>(in_emb - m);
    }
    t_sum[row] = t;
    c_sum[row] = c;
  });
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  const double norm = 2.0 / (nn * mm * (2.0 * nn - 3.0 * mm - 1.0));
  NeighborhoodScores out;
  out.m = m;
  out.trustworthiness = 1.0 - norm * std::accumulate(t_sum.begin(), t_sum.end(), 0.0);
  out.continuity = 1.0 - norm * std::accumulate(c_sum.begin(), c_sum.end(), 0.0);
  return out;
}

FoldAssignment make_stratified_folds(const std::vector<int>& labels, Index folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "cross-validation needs at least two folds");
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<Index>(i));
  if (by_class.size() < 2) throw Error(ErrorCode::InvalidArgument, "labels must cover at least two classes");
  for (const auto& [label, members] : by_class) {
    if (static_cast<Index>(members.size()) < folds) {
      throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(label) + " has " +
                                                std::to_string(members.size()) + " members for " +
                                                std::to_string(folds) + " folds");
    }
  }
  FoldAssignment out;
  out.folds = folds;
  out.fold.assign(labels.size(), 0);
  Rng rng(seed);
  Index next = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    for (Index idx : members) {
      out.fold[static_cast<std::size_t>(idx)] = static_cast<int>(next % folds);
      ++next;
    }
  }
  return out;
}

CvResult knn_classify_cv(const Matrix& coordinates, const std::vector<int>& labels, Index k_clf,
                         const FoldAssignment& assignment) {
  const Index n = coordinates.rows();
  if (static_cast<Index>(labels.size()) != n || assignment.fold.size() != labels.size()) {
    throw Error(ErrorCode::CountMismatch, "labels, folds and embedding rows differ in count");
  }
  if (k_clf < 1) throw Error(ErrorCode::InvalidArgument, "classifier k must be at least 1");
  const Index folds = assignment.folds;
  std::vector<double> accuracy(static_cast<std::size_t>(folds), 0.0);

  parallel_for(static_cast<std::size_t>(folds), [&](std::size_t f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) {
      (assignment.fold[static_cast<std::size_t>(i)] == static_cast<int>(f) ? test : train).push_back(i);
    }
    if (test.empty() || train.empty()) throw Error(ErrorCode::InvalidArgument, "empty fold");
    const Index kk = std::min<Index>(k_clf, static_cast<Index>(train.size()));
    std::size_t correct = 0;
    std::vector<std::pair<double, Index>> dist(train.size());
    for (Index q : test) {
      for (std::size_t t = 0; t < train.size(); ++t) {
        const Index j = train[t];
        double s = 0.0;
        for (Index c = 0; c < coordinates.cols(); ++c) {
          const double diff = coordinates(q, c) - coordinates(j, c);
          s += diff * diff;
        }
        dist[t] = {s, j};
      }
      std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
      std::map<int, Index> votes;
      for (Index r = 0; r < kk; ++r) ++votes[labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(r)].second)]];
      Index top_votes = 0;
      for (const auto& [label, count] : votes) top_votes = std::max(top_votes, count);
      int predicted = 0;
      for (Index r = 0; r < kk; ++r) {
        const int label = labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(r)].second)];
        if (votes[label] == top_votes) {
          predicted = label;
          break;
        }
      }
      if (predicted == labels[static_cast<std::size_t>(q)]) ++correct;
    }
    accuracy[f] = static_cast<double>(correct) / static_cast<double>(test.size());
  });

  CvResult out;
  out.k = k_clf;
  out.folds = folds;
  out.fold_accuracy = accuracy;
  out.mean = std::accumulate(accuracy.begin(), accuracy.end(), 0.0) / static_cast<double>(folds);
  double ss = 0.0;
  for (double a : accuracy) ss += (a - out.mean) * (a - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(folds - 1));
  return out;
}

CvResult knn_classify_cv(const Matrix& coordinates, const std::vector<int>& labels, Index k_clf, Index folds,
                         std::uint64_t seed) {
  if (static_cast<Index>(labels.size()) != coordinates.rows()) {
    throw Error(ErrorCode::CountMismatch, "label count differs from embedding rows");
  }
  return knn_classify_cv(coordinates, labels, k_clf, make_stratified_folds(labels, folds, seed));
}

double uniformity_cv(const DensityEstimate& density) {
  const auto& v = density.values;
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "empty density estimate");
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "density values must be finite");
  }
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (mean == 0.0) throw Error(ErrorCode::ZeroMeanDensity, "density has zero mean");
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size())) / mean;
}

nlohmann::json EvalReport::to_json(bool include_timings) const {
  nlohmann::json out = {{"schema", kEvalReportSchema}, {"run", run}, {"n_points", n_points}};
  if (stress) {
    const std::size_t total = stress->pairs + stress->excluded_pairs;
    out["stress"] = stress->value;
    out["stress_pairs"] = stress->pairs;
    out["excluded_pairs"] = stress->excluded_pairs;
    out["excluded_fraction"] = total == 0 ? 0.0 : static_cast<double>(stress->excluded_pairs) / static_cast<double>(total);
  } else {
    out["stress"] = nullptr;
  }
  out["residual_variance"] = optional_number(residual_variance);
  if (neighborhood) {
    out["trustworthiness"] = neighborhood->trustworthiness;
    out["continuity"] = neighborhood->continuity;
    out["neighborhood_m"] = neighborhood->m;
  } else {
    out["trustworthiness"] = nullptr;
    out["continuity"] = nullptr;
  }
  if (knn) {
    out["knn_accuracy"] = {{"mean", knn->mean}, {"sd", knn->sd}, {"k", knn->k},
                           {"folds", knn->folds}, {"fold_accuracy", knn->fold_accuracy}};
  } else {
    out["knn_accuracy"] = nullptr;
  }
  out["density_cv"] = optional_number(density_cv);
  if (include_timings) {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [stage, seconds] : timings) t[stage] = seconds;
    out["timings"] = t;
  }
  return out;
}

std::string EvalReport::csv_header() {
  return "method,n_points,stress,excluded_pairs,residual_variance,trustworthiness,continuity,neighborhood_m,"
         "knn_mean,knn_sd,density_cv";
}

std::string EvalReport::to_csv_line() const {
  std::ostringstream out;
  const std::string method = run.contains("method") && run["method"].is_object() && run["method"].contains("name")
                                 ? run["method"]["name"].get<std::string>()
                                 : std::string();
  out << method << ',' << n_points << ',';
  out << (stress ? format_real(stress->value) : "") << ',' << (stress ? std::to_string(stress->excluded_pairs) : "")
      << ',';
  out << csv_number(residual_variance) << ',';
  if (neighborhood) {
    out << format_real(neighborhood->trustworthiness) << ',' << format_real(neighborhood->continuity) << ','
        << neighborhood->m << ',';
  } else {
    out << ",,,";
  }
  if (knn) {
    out << format_real(knn->mean) << ',' << format_real(knn->sd) << ',';
  } else {
    out << ",,";
  }
  out << csv_number(density_cv);
  return out.str();
}

EvalReport evaluate(const EvalRequest& request) {
  if (request.coordinates == nullptr) throw Error(ErrorCode::InvalidArgument, "evaluation needs coordinates");
  const Matrix embedded = euclidean_distances(*request.coordinates);
  EvalReport out;
  out.n_points = request.coordinates->rows();
  if (request.reference != nullptr) {
    out.stress = stress(*request.reference, embedded);
    out.residual_variance = residual_variance(*request.reference, embedded);
  }
  if (request.rank_reference != nullptr && 2 * request.neighborhood < out.n_points) {
    out.neighborhood = trustworthiness_continuity(*request.rank_reference, embedded, request.neighborhood);
  }
  if (request.labels != nullptr) {
    if (request.folds == nullptr) throw Error(ErrorCode::InvalidArgument, "classification needs a fold assignment");
    out.knn = knn_classify_cv(*request.coordinates, *request.labels, request.k_clf, *request.folds);
  }
  if (request.density != nullptr) out.density_cv = uniformity_cv(*request.density);
  return out;
}

}  // namespace prisomap
