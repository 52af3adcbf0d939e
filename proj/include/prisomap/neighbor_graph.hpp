#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "prisomap/linalg.hpp"

namespace prisomap {

inline constexpr double kUnboundedWindow = std::numeric_limits<double>::infinity();

struct Neighbor {
  Index index;
  double distance;
};

// Exact k nearest neighbours of every row, ascending by (distance, index),
// self excluded. Distances are summed coordinate-wise so d(i,j) == d(j,i) bitwise.
struct KnnCandidates {
  Index k = 0;
  std::vector<std::vector<Neighbor>> lists;
  std::size_t zero_distance_pairs = 0;  // unordered pairs at distance 0 over all pairs
};

KnnCandidates knn_candidates(const Matrix& data, Index k);

struct Edge {
  Index target;
  double weight;
};

// Symmetrized k-NN graph whose edges all satisfy 0 < w <= h.
struct NeighborGraph {
  Index n = 0;
  Index k = 0;
  double h = kUnboundedWindow;
  std::vector<std::vector<Edge>> adjacency;  // sorted by target
  std::vector<Index> component_id;           // numbered in order of smallest member
  std::size_t zero_distance_pairs = 0;
  bool degenerate_duplicates = false;  // more than n/2 zero-distance pairs were dropped

  std::size_t edge_count() const;
  // Neighbours of i inside the window, i.e. the uniform neighbour set of i.
  std::span<const Edge> uniform_neighbors(Index i) const { return adjacency[static_cast<std::size_t>(i)]; }
};

// Candidates farther than h, and zero-length candidates, are discarded before
// the union symmetrization. Requires 1 <= k < n and h > 0 (h may be +inf).
NeighborGraph knn_graph(const Matrix& data, Index k, double h);
NeighborGraph knn_graph(const KnnCandidates& candidates, double h);

struct WeightedEdge {
  Index from;
  Index to;
  double weight;
};

// Builds a graph from an explicit undirected edge list (each edge once or
// twice). Throws InvalidGraph for self-loops, non-positive or non-finite
// weights, or conflicting duplicate weights.
NeighborGraph graph_from_edges(Index n, const std::vector<WeightedEdge>& edges, Index k = 0,
                               double h = kUnboundedWindow);

// Candidate edge lengths (n*k values, sorted ascending) and their percentile
// with linear interpolation between order statistics.
std::vector<double> knn_edge_lengths(const KnnCandidates& candidates);
double percentile(std::vector<double> values, double q);

enum class Window { Rectangular };

// Dimensional: 1/h^d so the estimate is a density in R^d. Literal: the fixed
// 1/h^2 factor regardless of d.
enum class DensityNormalization { Dimensional, Literal };

struct DensityEstimate {
  std::vector<double> values;
  double h = 0.0;
  Index k = 0;
  Index dimension = 0;
  Window window = Window::Rectangular;
  DensityNormalization normalization = DensityNormalization::Dimensional;
};

// p_h(x) = (1/k) sum_{i in C(x)} h^-d Phi((x_i - x)/h) where C(x) is x itself
// plus its k-1 nearest neighbours and Phi is the indicator of |u| <= 1/2.
// k is clamped to n. Throws InfiniteWindow for h = +inf.
DensityEstimate pr_density(const Matrix& data, Index k, double h, Window window = Window::Rectangular,
                           DensityNormalization normalization = DensityNormalization::Dimensional);
DensityEstimate pr_density(const Matrix& data, const NeighborGraph& graph, Window window = Window::Rectangular,
                           DensityNormalization normalization = DensityNormalization::Dimensional);

struct ComponentSummary {
  Index count = 0;
  std::vector<Index> sizes;            // descending
  std::vector<Index> largest_members;  // ascending; ties go to the component with the smaller first vertex
};

ComponentSummary components(const NeighborGraph& graph);

// "i j w" lines, i < j, sorted, preceded by a "# n k h" header.
std::string to_edge_list(const NeighborGraph& graph);
NeighborGraph parse_edge_list(const std::string& text);

}  // namespace prisomap
