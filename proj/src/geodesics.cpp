#include "prisomap/geodesics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <queue>

#include "prisomap/error.hpp"
#include "prisomap/parallel.hpp"

namespace prisomap {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'G', 'E', 'O', '0', '0', '1'};

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <typename T>
void put(std::ostream& out, T value) {
  value = to_little(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const std::string& name) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw Error(ErrorCode::TruncatedFile, name + ": geodesic block truncated");
  return to_little(value);
}

double count_finite_fraction(const Matrix& m) {
  if (m.size() == 0) return 1.0;
  std::size_t finite = 0;
  for (Index i = 0; i < m.size(); ++i) finite += std::isnan(m.data()[i]) ? 0 : 1;
  return static_cast<double>(finite) / static_cast<double>(m.size());
}

}  // namespace

std::uint64_t hash_data(const Matrix& data) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t bytes) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t rows = to_little(static_cast<std::uint64_t>(data.rows()));
  const std::uint64_t cols = to_little(static_cast<std::uint64_t>(data.cols()));
  mix(&rows, sizeof rows);
  mix(&cols, sizeof cols);
  for (Index i = 0; i < data.size(); ++i) {
    const double v = to_little(data.data()[i]);
    mix(&v, sizeof v);
  }
  return h;
}

GeodesicMatrix::GeodesicMatrix(Matrix distances, GraphFingerprint fingerprint)
    : distances_(std::move(distances)), fingerprint_(fingerprint), finite_fraction_(count_finite_fraction(distances_)) {}

std::optional<double> GeodesicMatrix::at(Index i, Index j) const {
  if (!reachable(i, j)) return std::nullopt;
  return distances_(i, j);
}

ShortestPaths dijkstra_from(const NeighborGraph& graph, Index source) {
  const Index n = graph.n;
  if (source < 0 || source >= n) throw Error(ErrorCode::InvalidArgument, "source vertex out of range");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(n), inf);
  std::vector<Index> parent(static_cast<std::size_t>(n), kNoParent);
  std::vector<char> settled(static_cast<std::size_t>(n), 0);

  using Entry = std::pair<double, Index>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    const auto ui = static_cast<std::size_t>(u);
    if (settled[ui] || d > dist[ui]) continue;
    settled[ui] = 1;
    for (const auto& e : graph.adjacency[ui]) {
      const auto vi = static_cast<std::size_t>(e.target);
      if (settled[vi]) continue;
      const double alt = d + e.weight;
      if (alt < dist[vi]) {
        dist[vi] = alt;
        parent[vi] = u;
        heap.push({alt, e.target});
      } else if (alt == dist[vi] && u < parent[vi]) {
        parent[vi] = u;
      }
    }
  }
  ShortestPaths out;
  out.distance.resize(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) out.distance[i] = std::isinf(dist[i]) ? kUnreachable : dist[i];
  out.parent = std::move(parent);
  return out;
}

GeodesicMatrix all_pairs(const NeighborGraph& graph, const GraphFingerprint& fingerprint) {
  const Index n = graph.n;
  for (const auto& list : graph.adjacency) {
    for (const auto& e : list) {
      if (!(e.weight > 0.0) || e.weight > graph.h) {
        throw Error(ErrorCode::InvalidGraph, "edge weight outside (0, h]");
      }
    }
  }
  Matrix d(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t s) {
    const ShortestPaths sp = dijkstra_from(graph, static_cast<Index>(s));
    for (Index j = 0; j < n; ++j) d(static_cast<Index>(s), j) = sp.distance[static_cast<std::size_t>(j)];
  });

  double worst = 0.0;
  bool reach_mismatch = false;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double a = d(i, j);
      const double b = d(j, i);
      if (std::isnan(a) != std::isnan(b)) {
        reach_mismatch = true;
      } else if (!std::isnan(a)) {
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
      }
      d(j, i) = a;
    }
  }
  if (reach_mismatch || worst > 1e-12) {
    throw Error(ErrorCode::InvalidGraph, "shortest-path matrix is not symmetric; adjacency is not undirected");
  }
  return GeodesicMatrix(std::move(d), fingerprint);
}

GeodesicMatrix floyd_warshall_oracle(const NeighborGraph& graph) {
  const Index n = graph.n;
  if (n > kFloydWarshallLimit) throw Error(ErrorCode::TooLarge, "Floyd-Warshall oracle is limited to n <= 500");
  constexpr double inf = std::numeric_limits<double>::infinity();
  Matrix d = Matrix::Constant(n, n, inf);
  for (Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (const auto& e : graph.adjacency[static_cast<std::size_t>(i)]) d(i, e.target) = std::min(d(i, e.target), e.weight);
  }
  for (Index m = 0; m < n; ++m) {
    for (Index i = 0; i < n; ++i) {
      const double dim = d(i, m);
      if (std::isinf(dim)) continue;
      for (Index j = 0; j < n; ++j) {
        const double alt = dim + d(m, j);
        if (alt < d(i, j)) d(i, j) = alt;
      }
    }
  }
  for (Index i = 0; i < d.size(); ++i) {
    if (std::isinf(d.data()[i])) d.data()[i] = kUnreachable;
  }
  return GeodesicMatrix(std::move(d), GraphFingerprint{0, graph.k, graph.h});
}

void write_geodesic_block(const std::filesystem::path& path, const GeodesicMatrix& geo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(geo.size()));
  put<double>(out, geo.finite_fraction());
  put<std::uint64_t>(out, geo.fingerprint().data_hash);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(geo.fingerprint().k));
  put<double>(out, geo.fingerprint().h);
  const Matrix& m = geo.matrix();
  for (Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    put<double>(out, std::isnan(v) ? kUnreachable : v);
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

GeodesicMatrix read_geodesic_block(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + name);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(ErrorCode::BadMagic, name + ": not a geodesic block");
  const auto n = static_cast<Index>(get<std::uint64_t>(in, name));
  const double fraction = get<double>(in, name);
  GraphFingerprint fp;
  fp.data_hash = get<std::uint64_t>(in, name);
  fp.k = static_cast<Index>(get<std::uint64_t>(in, name));
  fp.h = get<double>(in, name);
  Matrix m(n, n);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(in, name);
  GeodesicMatrix geo(std::move(m), fp);
  if (geo.finite_fraction() != fraction) throw Error(ErrorCode::ParseError, name + ": finite fraction does not match body");
  return geo;
}

}  // namespace prisomap
