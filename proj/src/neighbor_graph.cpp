#include "prisomap/neighbor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>

#include "prisomap/datasets.hpp"
#include "prisomap/error.hpp"
#include "prisomap/parallel.hpp"

namespace prisomap {

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

// Sorted neighbour lists of size min(k, n-1) plus the global zero-pair count.
KnnCandidates nearest(const Matrix& data, Index k) {
  const Index n = data.rows();
  const Index d = data.cols();
  const Index kk = std::min(k, n - 1);
  KnnCandidates out;
  out.k = kk;
  out.lists.resize(static_cast<std::size_t>(n));
  std::vector<std::size_t> zeros(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const Index i = static_cast<Index>(row);
    std::vector<Neighbor> all;
    all.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (Index c = 0; c < d; ++c) {
        const double diff = data(i, c) - data(j, c);
        s += diff * diff;
      }
      const double dist = std::sqrt(s);
      if (dist == 0.0 && j > i) ++zeros[row];
      all.push_back({j, dist});
    }
    std::partial_sort(all.begin(), all.begin() + kk, all.end(), closer);
    all.resize(static_cast<std::size_t>(kk));
    out.lists[row] = std::move(all);
  });
  for (auto z : zeros) out.zero_distance_pairs += z;
  return out;
}

std::vector<Index> label_components(const std::vector<std::vector<Edge>>& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<Index> id(n, -1);
  Index next = 0;
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < n; ++start) {
    if (id[start] >= 0) continue;
    id[start] = next;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      for (const auto& e : adjacency[v]) {
        const auto t = static_cast<std::size_t>(e.target);
        if (id[t] < 0) {
          id[t] = next;
          queue.push_back(t);
        }
      }
    }
    ++next;
  }
  return id;
}

void check_window(double h) {
  if (std::isnan(h) || h <= 0.0) throw Error(ErrorCode::InvalidArgument, "window diameter h must be positive");
}

}  // namespace

std::size_t NeighborGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& list : adjacency) twice += list.size();
  return twice / 2;
}

KnnCandidates knn_candidates(const Matrix& data, Index k) {
  const Index n = data.rows();
  if (k < 1 || k >= n) throw Error(ErrorCode::InvalidArgument, "k must satisfy 1 <= k < n");
  return nearest(data, k);
}

NeighborGraph knn_graph(const Matrix& data, Index k, double h) {
  check_window(h);
  return knn_graph(knn_candidates(data, k), h);
}

NeighborGraph knn_graph(const KnnCandidates& candidates, double h) {
  check_window(h);
  const Index n = static_cast<Index>(candidates.lists.size());
  NeighborGraph g;
  g.n = n;
  g.k = candidates.k;
  g.h = h;
  g.zero_distance_pairs = candidates.zero_distance_pairs;
  g.degenerate_duplicates = 2 * candidates.zero_distance_pairs > static_cast<std::size_t>(n);

  std::vector<std::vector<Edge>> directed(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (const auto& c : candidates.lists[static_cast<std::size_t>(i)]) {
      if (c.distance > 0.0 && c.distance <= h) {
        directed[static_cast<std::size_t>(i)].push_back({c.index, c.distance});
        directed[static_cast<std::size_t>(c.index)].push_back({i, c.distance});
      }
    }
  }
  g.adjacency.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < directed.size(); ++i) {
    auto& list = directed[i];
    std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) { return a.target < b.target; });
    list.erase(std::unique(list.begin(), list.end(), [](const Edge& a, const Edge& b) { return a.target == b.target; }),
               list.end());
    g.adjacency[i] = std::move(list);
  }
  g.component_id = label_components(g.adjacency);
  return g;
}

NeighborGraph graph_from_edges(Index n, const std::vector<WeightedEdge>& edges, Index k, double h) {
  std::vector<std::map<Index, double>> adj(static_cast<std::size_t>(n));
  for (const auto& e : edges) {
    if (e.from < 0 || e.to < 0 || e.from >= n || e.to >= n) throw Error(ErrorCode::InvalidGraph, "edge endpoint out of range");
    if (e.from == e.to) throw Error(ErrorCode::InvalidGraph, "self-loop");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw Error(ErrorCode::InvalidGraph, "edge weight must be positive and finite");
    for (auto [a, b] : {std::pair{e.from, e.to}, std::pair{e.to, e.from}}) {
      auto [it, inserted] = adj[static_cast<std::size_t>(a)].emplace(b, e.weight);
      if (!inserted && it->second != e.weight) throw Error(ErrorCode::InvalidGraph, "conflicting weights for one edge");
    }
  }
  NeighborGraph g;
  g.n = n;
  g.k = k;
  g.h = h;
  g.adjacency.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < adj.size(); ++i) {
    for (auto [t, w] : adj[i]) g.adjacency[i].push_back({t, w});
  }
  g.component_id = label_components(g.adjacency);
  return g;
}

std::vector<double> knn_edge_lengths(const KnnCandidates& candidates) {
  std::vector<double> out;
  for (const auto& list : candidates.lists) {
    for (const auto& c : list) out.push_back(c.distance);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty set");
  if (!(q >= 0.0 && q <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

DensityEstimate pr_density(const Matrix& data, Index k, double h, Window window, DensityNormalization normalization) {
  if (std::isinf(h)) throw Error(ErrorCode::InfiniteWindow, "density needs a finite window diameter");
  check_window(h);
  const Index n = data.rows();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "density of an empty dataset");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const Index set_size = std::min(k, n);

  DensityEstimate out;
  out.h = h;
  out.k = set_size;
  out.dimension = data.cols();
  out.window = window;
  out.normalization = normalization;
  const double exponent = normalization == DensityNormalization::Literal ? 2.0 : static_cast<double>(data.cols());
  const double scale = 1.0 / (static_cast<double>(set_size) * std::pow(h, exponent));

  std::vector<std::size_t> inside(static_cast<std::size_t>(n), 1);  // every point sees itself
  if (set_size > 1) {
    const KnnCandidates cand = nearest(data, set_size - 1);
    for (std::size_t i = 0; i < cand.lists.size(); ++i) {
      for (const auto& c : cand.lists[i]) {
        if (c.distance / h <= 0.5) ++inside[i];
      }
    }
  }
  out.values.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < inside.size(); ++i) out.values[i] = scale * static_cast<double>(inside[i]);
  return out;
}

DensityEstimate pr_density(const Matrix& data, const NeighborGraph& graph, Window window,
                           DensityNormalization normalization) {
  if (data.rows() != graph.n) throw Error(ErrorCode::CountMismatch, "graph and data sizes differ");
  return pr_density(data, graph.k, graph.h, window, normalization);
}

ComponentSummary components(const NeighborGraph& graph) {
  const std::vector<Index> id =
      graph.component_id.size() == graph.adjacency.size() ? graph.component_id : label_components(graph.adjacency);
  ComponentSummary out;
  Index count = 0;
  for (Index c : id) count = std::max(count, c + 1);
  out.count = count;
  std::vector<Index> size(static_cast<std::size_t>(count), 0);
  for (Index c : id) ++size[static_cast<std::size_t>(c)];
  Index best = 0;
  for (Index c = 1; c < count; ++c) {
    if (size[static_cast<std::size_t>(c)] > size[static_cast<std::size_t>(best)]) best = c;
  }
  out.sizes = size;
  std::sort(out.sizes.begin(), out.sizes.end(), std::greater<>());
  for (std::size_t v = 0; v < id.size(); ++v) {
    if (id[v] == best && count > 0) out.largest_members.push_back(static_cast<Index>(v));
  }
  return out;
}

std::string to_edge_list(const NeighborGraph& graph) {
  std::ostringstream out;
  out << "# " << graph.n << ' ' << graph.k << ' ' << (std::isinf(graph.h) ? std::string("inf") : format_real(graph.h))
      << '\n';
  for (Index i = 0; i < graph.n; ++i) {
    for (const auto& e : graph.adjacency[static_cast<std::size_t>(i)]) {
      if (e.target > i) out << i << ' ' << e.target << ' ' << format_real(e.weight) << '\n';
    }
  }
  return out.str();
}

NeighborGraph parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Index n = -1, k = 0;
  double h = kUnboundedWindow;
  std::vector<WeightedEdge> edges;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    if (line[0] == '#') {
      std::string hash, htext;
      fields >> hash >> n >> k >> htext;
      if (!fields) throw Error(ErrorCode::ParseError, "edge list header must be '# n k h'");
      h = htext == "inf" ? kUnboundedWindow : std::stod(htext);
      continue;
    }
    WeightedEdge e{};
    fields >> e.from >> e.to >> e.weight;
    if (!fields) throw Error(ErrorCode::ParseError, "edge list line " + std::to_string(lineno) + " is not 'i j w'");
    edges.push_back(e);
  }
  if (n < 0) throw Error(ErrorCode::ParseError, "edge list is missing its header");
  return graph_from_edges(n, edges, k, h);
}

}  // namespace prisomap
