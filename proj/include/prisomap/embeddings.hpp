#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prisomap/geodesics.hpp"
#include "prisomap/linalg.hpp"
#include "prisomap/neighbor_graph.hpp"

namespace prisomap {

enum class ComponentPolicy { Error, LargestComponent };

std::string to_string(ComponentPolicy policy);
ComponentPolicy parse_component_policy(const std::string& text);

struct MethodDescriptor {
  std::string name;  // "pr-isomap", "isomap", "mds", "pca"
  Index k = 0;       // 0 for methods without a neighbour graph
  double h = kUnboundedWindow;
  Index p = 0;
  ComponentPolicy policy = ComponentPolicy::Error;
  double min_component_fraction = 0.5;

  nlohmann::json to_json() const;
};

struct Embedding {
  Matrix coordinates;  // one row per kept vertex, columns by descending eigenvalue
  Vector eigenvalues;  // top p; covariance eigenvalues for PCA
  Index clamped_count = 0;
  bool rank_deficient = false;
  MethodDescriptor method;
  bool component_policy_applied = false;
  std::vector<Index> kept;  // original indices of the rows of `coordinates`

  nlohmann::json to_json() const;
};

struct IsomapOptions {
  Index k = 10;
  double h = kUnboundedWindow;
  Index p = 2;
  ComponentPolicy policy = ComponentPolicy::Error;
  // GraphTooFragmented when the largest component holds less than this share.
  double min_component_fraction = 0.5;
};

struct RestrictedGeodesics {
  Matrix distances;  // finite submatrix
  std::vector<Index> kept;
  std::vector<Index> dropped;
};

// Error: DisconnectedGraph if any pair is unreachable. LargestComponent: keep
// the largest reachability class (ties to the one holding the smallest vertex).
RestrictedGeodesics component_policy(const GeodesicMatrix& geo, ComponentPolicy policy);

// MDS stage shared by the geodesic methods: component policy, squaring,
// double centering and coordinates.
Embedding embed_geodesics(const GeodesicMatrix& geo, const IsomapOptions& options, const std::string& name);

// k-NN graph capped at h, all-pairs shortest paths, then the MDS stage.
Embedding pr_isomap(const Matrix& data, const IsomapOptions& options);
Embedding isomap(const Matrix& data, Index k, Index p, ComponentPolicy policy = ComponentPolicy::Error);
Embedding classical_mds(const Matrix& data, Index p);
// Covariance uses the population (1/n) convention.
Embedding pca(const Matrix& data, Index p);

// Index i maximizing the second difference l[i-1] - 2 l[i] + l[i+1] of a
// non-increasing eigenvalue curve; the suggested dimension is i. Needs >= 3 values.
Index eigenvalue_elbow(const Vector& eigenvalues);

// "index,y1..yp" rows at 17 significant digits.
void write_embedding_csv(const std::filesystem::path& path, const Embedding& embedding);

struct EmbeddingTable {
  std::vector<Index> index;
  Matrix coordinates;
};
EmbeddingTable read_embedding_csv(const std::filesystem::path& path);

}  // namespace prisomap
