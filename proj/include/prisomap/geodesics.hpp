#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "prisomap/linalg.hpp"
#include "prisomap/neighbor_graph.hpp"

namespace prisomap {

// Identifies the graph a geodesic matrix was computed from.
struct GraphFingerprint {
  std::uint64_t data_hash = 0;
  Index k = 0;
  double h = kUnboundedWindow;

  bool operator==(const GraphFingerprint&) const = default;
};

// FNV-1a over the shape and raw bytes of a data matrix.
std::uint64_t hash_data(const Matrix& data);

inline constexpr Index kNoParent = -1;

// Unreachable entries are stored as quiet NaN and reported through
// reachable()/at(), never as a large finite value.
class GeodesicMatrix {
 public:
  GeodesicMatrix() = default;
  GeodesicMatrix(Matrix distances, GraphFingerprint fingerprint);

  Index size() const { return distances_.rows(); }
  bool reachable(Index i, Index j) const { return !std::isnan(distances_(i, j)); }
  std::optional<double> at(Index i, Index j) const;
  // Raw matrix, NaN at unreachable pairs.
  const Matrix& matrix() const { return distances_; }
  double finite_fraction() const { return finite_fraction_; }
  const GraphFingerprint& fingerprint() const { return fingerprint_; }

 private:
  Matrix distances_;
  GraphFingerprint fingerprint_;
  double finite_fraction_ = 1.0;
};

inline constexpr double kUnreachable = std::numeric_limits<double>::quiet_NaN();

struct ShortestPaths {
  std::vector<double> distance;  // NaN for unreached vertices
  std::vector<Index> parent;     // kNoParent for the source and unreached vertices
};

// Single-source Dijkstra with a lazily pruned binary heap. Among equal-length
// paths the parent with the smaller index wins.
ShortestPaths dijkstra_from(const NeighborGraph& graph, Index source);

// Every source in turn (in parallel), then symmetrized from the upper
// triangle after checking the two triangles agree to 1e-12 relative. Throws
// InvalidGraph if any edge exceeds the graph's window h.
GeodesicMatrix all_pairs(const NeighborGraph& graph, const GraphFingerprint& fingerprint = {});

// O(n^3) reference; TooLarge above n = 500.
GeodesicMatrix floyd_warshall_oracle(const NeighborGraph& graph);
inline constexpr Index kFloydWarshallLimit = 500;

// Binary block: "PRGEO001", n, finite fraction, fingerprint, then n*n
// little-endian doubles with NaN for unreachable pairs.
void write_geodesic_block(const std::filesystem::path& path, const GeodesicMatrix& geo);
GeodesicMatrix read_geodesic_block(const std::filesystem::path& path);

}  // namespace prisomap
