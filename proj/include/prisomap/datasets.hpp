#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "prisomap/linalg.hpp"

namespace prisomap {

struct LabeledDataset {
  Matrix data;  // n x d
  std::optional<std::vector<int>> labels;
  std::vector<std::string> names;  // feature names, empty when the source has none
  std::size_t dropped_rows = 0;    // rows rejected for NaN entries

  Index size() const { return data.rows(); }
};

// Column selected by header name or zero-based position.
using LabelColumn = std::variant<std::string, std::size_t>;

// RFC-4180 CSV with a header row. Rows holding a NaN or empty cell are dropped
// and counted. Throws ParseError (with row/column) or EmptyDataset.
LabeledDataset load_csv(const std::filesystem::path& path,
                        const std::optional<LabelColumn>& label_column = std::nullopt);

// Writes values at 17 significant digits so load_csv reads back the same bits.
void save_csv(const std::filesystem::path& path, const Matrix& data,
              const std::vector<std::string>& names = {},
              const std::optional<std::vector<int>>& labels = std::nullopt,
              const std::string& label_name = "label");

// Shortest decimal text that round-trips (%.17g).
std::string format_real(double value);

// IDX images (magic 0x00000803) and optional labels (0x00000801), big-endian,
// gzip-compressed or raw. Each image becomes one row of rows*cols pixels.
LabeledDataset load_idx(const std::filesystem::path& images,
                        const std::optional<std::filesystem::path>& labels = std::nullopt);

// Writers for the same format; a ".gz" suffix selects gzip compression.
void write_idx_images(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

// Parameter rectangle of the built-in Swiss roll.
inline constexpr double kRollAngleMin = 1.5 * 3.14159265358979323846;
inline constexpr double kRollAngleMax = 4.5 * 3.14159265358979323846;
inline constexpr double kRollHeight = 21.0;

// Arc length of the spiral (t cos t, t sin t) from angle 0 to t.
double swiss_roll_arc_length(double t);

struct SwissRollSpec {
  Index n = 2000;
  double noise_sd = 0.0;
  double density_exponent = 0.0;  // angle density proportional to t^exponent
  std::uint64_t seed = 0;
  // Fraction of n, as a count of bridge pairs, placed radially between
  // adjacent layers at 1/3 and 2/3 of the gap (two points per pair).
  double short_circuit_fraction = 0.0;

  nlohmann::json to_json() const;
};

struct ManifoldSample {
  Matrix ambient;    // n x 3
  Matrix intrinsic;  // n x 2 isometric chart (arc length, height)
  std::vector<double> angle;          // roll angle t per point
  std::vector<bool> short_circuit;    // true for bridge points
  SwissRollSpec spec;
};

ManifoldSample gen_swiss_roll(const SwissRollSpec& spec);

struct Standardized {
  Matrix data;
  Vector mean;
  Vector sd;  // population convention; 0 for constant features
};

Standardized standardize(const Matrix& data);
Matrix unstandardize(const Matrix& data, const Vector& mean, const Vector& sd);

// `count` row indices drawn as evenly as possible from every class, sorted.
std::vector<Index> stratified_subset(const std::vector<int>& labels, Index count, std::uint64_t seed);

LabeledDataset select_rows(const LabeledDataset& dataset, const std::vector<Index>& rows);

}  // namespace prisomap
