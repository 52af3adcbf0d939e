#include "prisomap/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "prisomap/datasets.hpp"
#include "prisomap/error.hpp"

namespace prisomap {

namespace {

nlohmann::json real_or_inf(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

nlohmann::json vector_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Embedding from_kernel(const Matrix& kernel, const MethodDescriptor& method, std::vector<Index> kept) {
  MdsCoordinates mds = mds_coordinates(kernel, method.p);
  Embedding out;
  out.coordinates = std::move(mds.coordinates);
  out.eigenvalues = std::move(mds.eigenvalues);
  out.clamped_count = mds.clamped_count;
  out.rank_deficient = mds.rank_deficient;
  out.method = method;
  out.kept = std::move(kept);
  return out;
}

std::vector<Index> iota(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

}  // namespace

std::string to_string(ComponentPolicy policy) {
  return policy == ComponentPolicy::Error ? "error" : "largest_component";
}

ComponentPolicy parse_component_policy(const std::string& text) {
  if (text == "error") return ComponentPolicy::Error;
  if (text == "largest_component" || text == "largest-component" || text == "largest") {
    return ComponentPolicy::LargestComponent;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown component policy '" + text + "'");
}

nlohmann::json MethodDescriptor::to_json() const {
  return {{"name", name},
          {"k", k},
          {"h", real_or_inf(h)},
          {"p", p},
          {"component_policy", to_string(policy)},
          {"min_component_fraction", min_component_fraction}};
}

nlohmann::json Embedding::to_json() const {
  return {{"method", method.to_json()},
          {"n_kept", kept.size()},
          {"eigenvalues", vector_json(eigenvalues)},
          {"clamped_count", clamped_count},
          {"rank_deficient", rank_deficient},
          {"component_policy_applied", component_policy_applied},
          {"kept", kept}};
}

RestrictedGeodesics component_policy(const GeodesicMatrix& geo, ComponentPolicy policy) {
  const Index n = geo.size();
  RestrictedGeodesics out;
  if (geo.finite_fraction() == 1.0) {
    out.distances = geo.matrix();
    out.kept = iota(n);
    return out;
  }
  if (policy == ComponentPolicy::Error) {
    throw Error(ErrorCode::DisconnectedGraph, "geodesic matrix has unreachable pairs");
  }
  // Reachability classes: label by the first vertex that reaches each one.
  std::vector<Index> label(static_cast<std::size_t>(n), -1);
  std::vector<Index> size;
  for (Index i = 0; i < n; ++i) {
    if (label[static_cast<std::size_t>(i)] >= 0) continue;
    const Index id = static_cast<Index>(size.size());
    size.push_back(0);
    for (Index j = i; j < n; ++j) {
      if (geo.reachable(i, j)) {
        label[static_cast<std::size_t>(j)] = id;
        ++size.back();
      }
    }
  }
  const Index best = static_cast<Index>(std::max_element(size.begin(), size.end()) - size.begin());
  for (Index i = 0; i < n; ++i) {
    (label[static_cast<std::size_t>(i)] == best ? out.kept : out.dropped).push_back(i);
  }
  const Index m = static_cast<Index>(out.kept.size());
  out.distances.resize(m, m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) out.distances(a, b) = geo.matrix()(out.kept[static_cast<std::size_t>(a)], out.kept[static_cast<std::size_t>(b)]);
  }
  return out;
}

Embedding embed_geodesics(const GeodesicMatrix& geo, const IsomapOptions& options, const std::string& name) {
  const Index n = geo.size();
  RestrictedGeodesics restricted = component_policy(geo, options.policy);
  const Index kept = static_cast<Index>(restricted.kept.size());
  if (static_cast<double>(kept) < options.min_component_fraction * static_cast<double>(n)) {
    throw Error(ErrorCode::GraphTooFragmented, "largest component holds " + std::to_string(kept) + " of " +
                                                   std::to_string(n) + " points");
  }
  if (options.p < 1 || options.p >= kept) {
    throw Error(ErrorCode::InvalidArgument, "target dimension must satisfy 1 <= p < kept points");
  }
  MethodDescriptor method{name, options.k, options.h, options.p, options.policy, options.min_component_fraction};
  const Matrix squared = restricted.distances.array().square().matrix();
  Embedding out = from_kernel(double_center(squared), method, std::move(restricted.kept));
  out.component_policy_applied = !restricted.dropped.empty();
  return out;
}

Embedding pr_isomap(const Matrix& data, const IsomapOptions& options) {
  const Index n = data.rows();
  if (options.k < 1 || options.k >= n) throw Error(ErrorCode::InvalidArgument, "k must satisfy 1 <= k < n");
  if (options.p < 1 || options.p >= n) throw Error(ErrorCode::InvalidArgument, "p must satisfy 1 <= p < n");
  const NeighborGraph graph = knn_graph(data, options.k, options.h);
  const GeodesicMatrix geo = all_pairs(graph, GraphFingerprint{hash_data(data), options.k, options.h});
  return embed_geodesics(geo, options, "pr-isomap");
}

Embedding isomap(const Matrix& data, Index k, Index p, ComponentPolicy policy) {
  IsomapOptions options;
  options.k = k;
  options.p = p;
  options.h = kUnboundedWindow;
  options.policy = policy;
  Embedding out = pr_isomap(data, options);
  out.method.name = "isomap";
  return out;
}

Embedding classical_mds(const Matrix& data, Index p) {
  const Index n = data.rows();
  if (p < 1 || p >= n) throw Error(ErrorCode::InvalidArgument, "p must satisfy 1 <= p < n");
  MethodDescriptor method{"mds", 0, kUnboundedWindow, p, ComponentPolicy::Error, 0.0};
  return from_kernel(double_center(squared_euclidean_distances(data)), method, iota(n));
}

Embedding pca(const Matrix& data, Index p) {
  const Index n = data.rows();
  const Index d = data.cols();
  if (p < 1 || p > std::min(n - 1, d)) throw Error(ErrorCode::InvalidArgument, "p must satisfy 1 <= p <= min(n-1, d)");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Matrix centered = data.rowwise() - mean;
  const Matrix covariance = (centered.transpose() * centered) / static_cast<double>(n);
  // The product above is symmetric only up to rounding; mirror it exactly.
  Matrix sym = covariance;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) sym(j, i) = sym(i, j);
  }
  EigenResult eig = symmetric_eig(sym, p);
  Embedding out;
  out.coordinates = centered * eig.vectors;
  out.eigenvalues = eig.values;
  out.method = MethodDescriptor{"pca", 0, kUnboundedWindow, p, ComponentPolicy::Error, 0.0};
  out.kept = iota(n);
  for (Index i = 0; i < p; ++i) {
    if (eig.values(i) <= 1e-12 * std::max(eig.values(0), 0.0)) out.rank_deficient = true;
  }
  return out;
}

Index eigenvalue_elbow(const Vector& eigenvalues) {
  if (eigenvalues.size() < 3) throw Error(ErrorCode::InvalidArgument, "elbow needs at least three eigenvalues");
  Index best = 1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (Index i = 1; i + 1 < eigenvalues.size(); ++i) {
    const double second = eigenvalues(i - 1) - 2.0 * eigenvalues(i) + eigenvalues(i + 1);
    if (second > best_value) {
      best_value = second;
      best = i;
    }
  }
  return best;
}

void write_embedding_csv(const std::filesystem::path& path, const Embedding& embedding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "index";
  for (Index c = 0; c < embedding.coordinates.cols(); ++c) out << ",y" << (c + 1);
  out << '\n';
  for (Index r = 0; r < embedding.coordinates.rows(); ++r) {
    out << embedding.kept[static_cast<std::size_t>(r)];
    for (Index c = 0; c < embedding.coordinates.cols(); ++c) out << ',' << format_real(embedding.coordinates(r, c));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

EmbeddingTable read_embedding_csv(const std::filesystem::path& path) {
  LabeledDataset raw = load_csv(path, LabelColumn{std::string("index")});
  if (raw.dropped_rows > 0) throw Error(ErrorCode::ParseError, path.string() + ": embedding has empty or NaN cells");
  EmbeddingTable out;
  for (int i : *raw.labels) out.index.push_back(i);
  out.coordinates = std::move(raw.data);
  return out;
}

}  // namespace prisomap
