#include "prisomap/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "prisomap/error.hpp"
#include "prisomap/random.hpp"

namespace prisomap {

namespace {

// Splits CSV text into records of fields following RFC-4180 quoting.
std::vector<std::vector<std::string>> parse_records(const std::string& text, const std::string& source) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          throw Error(ErrorCode::ParseError, source + ": stray quote at line " + std::to_string(line));
        }
        quoted = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !record.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        field.clear();
        record.clear();
        field_started = false;
        ++line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::ParseError, source + ": unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Returns NaN for empty or NaN cells; throws on anything non-numeric.
double parse_real(const std::string& raw, std::size_t row, std::size_t col, const std::string& source) {
  const std::string s = trim(raw);
  auto fail = [&] {
    return Error(ErrorCode::ParseError, source + ": row " + std::to_string(row) + ", column " +
                                            std::to_string(col) + ": not a number: '" + raw + "'");
  };
  if (s.empty()) return std::nan("");
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw fail();
  if (std::isinf(value)) throw fail();
  return value;
}

struct ByteSource {
  gzFile file;
  explicit ByteSource(const std::filesystem::path& path) : file(gzopen(path.string().c_str(), "rb")) {
    if (file == nullptr) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  ~ByteSource() { gzclose(file); }
  ByteSource(const ByteSource&) = delete;
  ByteSource& operator=(const ByteSource&) = delete;

  std::size_t read(void* dst, std::size_t bytes) {
    std::size_t total = 0;
    auto* out = static_cast<unsigned char*>(dst);
    while (total < bytes) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes - total, 1u << 30));
      const int got = gzread(file, out + total, chunk);
      if (got <= 0) break;
      total += static_cast<std::size_t>(got);
    }
    return total;
  }
};

std::uint32_t read_be32(ByteSource& src, const std::string& what) {
  unsigned char b[4];
  if (src.read(b, 4) != 4) throw Error(ErrorCode::TruncatedFile, what + ": header truncated");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.string().c_str(), "wb9");
    if (f == nullptr) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    const int wrote = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (wrote != static_cast<int>(bytes.size())) throw Error(ErrorCode::IoError, "short write to " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

LabeledDataset load_csv(const std::filesystem::path& path, const std::optional<LabelColumn>& label_column) {
  const std::string source = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + source);
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto records = parse_records(buffer.str(), source);
  if (records.empty()) throw Error(ErrorCode::ParseError, source + ": missing header row");

  std::vector<std::string> header;
  for (const auto& h : records.front()) header.push_back(trim(h));
  const std::size_t width = header.size();

  std::optional<std::size_t> label_index;
  if (label_column) {
    if (const auto* name = std::get_if<std::string>(&*label_column)) {
      auto it = std::find(header.begin(), header.end(), *name);
      if (it == header.end()) throw Error(ErrorCode::ParseError, source + ": no column named '" + *name + "'");
      label_index = static_cast<std::size_t>(it - header.begin());
    } else {
      label_index = std::get<std::size_t>(*label_column);
      if (*label_index >= width) throw Error(ErrorCode::ParseError, source + ": label column index out of range");
    }
  }

  LabeledDataset out;
  for (std::size_t c = 0; c < width; ++c) {
    if (!label_index || c != *label_index) out.names.push_back(header[c]);
  }
  const std::size_t features = out.names.size();

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t kept = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != width) {
      throw Error(ErrorCode::ParseError, source + ": row " + std::to_string(r) + " has " +
                                             std::to_string(rec.size()) + " fields, expected " +
                                             std::to_string(width));
    }
    std::vector<double> row;
    row.reserve(features);
    bool has_nan = false;
    int label = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = parse_real(rec[c], r, c, source);
      if (std::isnan(v)) {
        has_nan = true;
        continue;
      }
      if (label_index && c == *label_index) {
        if (v != std::floor(v) || std::abs(v) > 2147483647.0) {
          throw Error(ErrorCode::ParseError, source + ": row " + std::to_string(r) + ", column " +
                                                 std::to_string(c) + ": label is not an integer");
        }
        label = static_cast<int>(v);
      } else {
        row.push_back(v);
      }
    }
    if (has_nan) {
      ++out.dropped_rows;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    if (label_index) labels.push_back(label);
    ++kept;
  }
  if (kept == 0) throw Error(ErrorCode::EmptyDataset, source + ": no usable rows");

  out.data = Eigen::Map<const Matrix>(values.data(), static_cast<Index>(kept), static_cast<Index>(features));
  if (label_index) out.labels = std::move(labels);
  return out;
}

void save_csv(const std::filesystem::path& path, const Matrix& data, const std::vector<std::string>& names,
              const std::optional<std::vector<int>>& labels, const std::string& label_name) {
  if (labels && static_cast<Index>(labels->size()) != data.rows()) {
    throw Error(ErrorCode::CountMismatch, "label count differs from row count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (Index c = 0; c < data.cols(); ++c) {
    if (c > 0) out << ',';
    out << (static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)]
                                                        : "x" + std::to_string(c));
  }
  if (labels) out << (data.cols() > 0 ? "," : "") << label_name;
  out << '\n';
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_real(data(r, c));
    }
    if (labels) out << (data.cols() > 0 ? "," : "") << (*labels)[static_cast<std::size_t>(r)];
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

LabeledDataset load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels) {
  const std::string name = images.string();
  ByteSource src(images);
  const std::uint32_t magic = read_be32(src, name);
  if (magic != 0x00000803u) throw Error(ErrorCode::BadMagic, name + ": not an IDX image file");
  const std::uint32_t count = read_be32(src, name);
  const std::uint32_t rows = read_be32(src, name);
  const std::uint32_t cols = read_be32(src, name);
  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<std::uint8_t> raw(std::size_t{count} * pixels);
  if (src.read(raw.data(), raw.size()) != raw.size()) {
    throw Error(ErrorCode::TruncatedFile, name + ": fewer pixels than the header declares");
  }

  LabeledDataset out;
  out.data.resize(count, static_cast<Index>(pixels));
  for (std::size_t i = 0; i < raw.size(); ++i) out.data.data()[i] = raw[i];

  if (labels) {
    const std::string lname = labels->string();
    ByteSource lsrc(*labels);
    if (read_be32(lsrc, lname) != 0x00000801u) throw Error(ErrorCode::BadMagic, lname + ": not an IDX label file");
    const std::uint32_t lcount = read_be32(lsrc, lname);
    if (lcount != count) {
      throw Error(ErrorCode::CountMismatch, lname + ": " + std::to_string(lcount) + " labels for " +
                                                std::to_string(count) + " images");
    }
    std::vector<std::uint8_t> lraw(lcount);
    if (lsrc.read(lraw.data(), lraw.size()) != lraw.size()) {
      throw Error(ErrorCode::TruncatedFile, lname + ": fewer labels than the header declares");
    }
    out.labels = std::vector<int>(lraw.begin(), lraw.end());
  }
  return out;
}

void write_idx_images(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != std::size_t{count} * rows * cols) {
    throw Error(ErrorCode::CountMismatch, "pixel buffer does not match the image dimensions");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + pixels.size());
  put_be32(bytes, 0x00000803u);
  put_be32(bytes, count);
  put_be32(bytes, rows);
  put_be32(bytes, cols);
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  write_bytes(path, bytes);
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> bytes;
  put_be32(bytes, 0x00000801u);
  put_be32(bytes, static_cast<std::uint32_t>(labels.size()));
  bytes.insert(bytes.end(), labels.begin(), labels.end());
  write_bytes(path, bytes);
}

double swiss_roll_arc_length(double t) {
  return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t));
}

nlohmann::json SwissRollSpec::to_json() const {
  return {
      {"generator", "swiss-roll"},
      {"n", n},
      {"noise_sd", noise_sd},
      {"density_exponent", density_exponent},
      {"seed", seed},
      {"short_circuit_fraction", short_circuit_fraction},
      {"density_profile", {{"law", "angle density proportional to t^exponent"}, {"exponent", density_exponent}}},
      {"parameter_rectangle",
       {{"angle", {kRollAngleMin, kRollAngleMax}},
        {"arc_length", {swiss_roll_arc_length(kRollAngleMin), swiss_roll_arc_length(kRollAngleMax)}},
        {"height", {0.0, kRollHeight}}}},
      {"intrinsic_columns", {"arc_length", "height"}},
  };
}

ManifoldSample gen_swiss_roll(const SwissRollSpec& spec) {
  if (spec.n < 10) throw Error(ErrorCode::InvalidArgument, "swiss roll needs n >= 10");
  if (!(spec.noise_sd >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sd must be non-negative");
  if (!(spec.short_circuit_fraction >= 0.0) || spec.short_circuit_fraction > 0.25) {
    throw Error(ErrorCode::InvalidArgument, "short_circuit_fraction must lie in [0, 0.25]");
  }
  const Index pairs = static_cast<Index>(std::llround(spec.short_circuit_fraction * static_cast<double>(spec.n)));
  const Index base = spec.n - 2 * pairs;

  Rng rng(spec.seed);
  const double e = spec.density_exponent;
  const double a = kRollAngleMin;
  const double b = kRollAngleMax;
  // Inverse CDF of the density proportional to t^e on [a, b].
  auto draw_angle = [&](double v) {
    if (std::abs(e + 1.0) < 1e-12) return a * std::pow(b / a, v);
    const double lo = std::pow(a, e + 1.0);
    const double hi = std::pow(b, e + 1.0);
    return std::pow(lo + v * (hi - lo), 1.0 / (e + 1.0));
  };

  ManifoldSample out;
  out.spec = spec;
  out.ambient.resize(spec.n, 3);
  out.intrinsic.resize(spec.n, 2);
  out.angle.resize(static_cast<std::size_t>(spec.n));
  out.short_circuit.assign(static_cast<std::size_t>(spec.n), false);

  auto place = [&](Index row, double angle, double radius, double height) {
    out.ambient(row, 0) = radius * std::cos(angle);
    out.ambient(row, 1) = height;
    out.ambient(row, 2) = radius * std::sin(angle);
    if (spec.noise_sd > 0.0) {
      for (Index c = 0; c < 3; ++c) out.ambient(row, c) += spec.noise_sd * rng.normal();
    }
  };

  for (Index i = 0; i < base; ++i) {
    const double t = draw_angle(rng.uniform());
    const double u = rng.uniform(0.0, kRollHeight);
    place(i, t, t, u);
    out.intrinsic(i, 0) = swiss_roll_arc_length(t);
    out.intrinsic(i, 1) = u;
    out.angle[static_cast<std::size_t>(i)] = t;
  }

  if (pairs > 0) {
    // Anchors need an outer layer one full turn further out.
    std::vector<Index> candidates;
    for (Index i = 0; i < base; ++i) {
      if (out.angle[static_cast<std::size_t>(i)] + 2.0 * std::numbers::pi <= b) candidates.push_back(i);
    }
    if (static_cast<Index>(candidates.size()) < pairs) {
      throw Error(ErrorCode::InvalidArgument, "too few inner-layer points to anchor the short-circuit pairs");
    }
    for (Index p = 0; p < pairs; ++p) {
      const std::size_t pick = p + static_cast<std::size_t>(rng.below(candidates.size() - p));
      std::swap(candidates[static_cast<std::size_t>(p)], candidates[pick]);
      const Index anchor = candidates[static_cast<std::size_t>(p)];
      const double t = out.angle[static_cast<std::size_t>(anchor)];
      const double u = out.intrinsic(anchor, 1);
      for (int step = 1; step <= 2; ++step) {
        const Index row = base + 2 * p + (step - 1);
        place(row, t, t + step * (2.0 * std::numbers::pi / 3.0), u);
        out.intrinsic.row(row) = out.intrinsic.row(anchor);
        out.angle[static_cast<std::size_t>(row)] = t;
        out.short_circuit[static_cast<std::size_t>(row)] = true;
      }
    }
  }
  return out;
}

Standardized standardize(const Matrix& data) {
  const Index n = data.rows();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "standardize needs at least two rows");
  Standardized out;
  out.data.resize(n, data.cols());
  out.mean.resize(data.cols());
  out.sd.resize(data.cols());
  for (Index c = 0; c < data.cols(); ++c) {
    const auto col = data.col(c);
    const double mean = col.mean();
    const bool constant = (col.array() == col(0)).all();
    double sd = 0.0;
    if (!constant) sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n));
    out.mean(c) = mean;
    out.sd(c) = sd;
    if (constant || sd == 0.0) {
      out.sd(c) = 0.0;
      out.data.col(c).setZero();
    } else {
      out.data.col(c) = (col.array() - mean) / sd;
    }
  }
  return out;
}

Matrix unstandardize(const Matrix& data, const Vector& mean, const Vector& sd) {
  Matrix out(data.rows(), data.cols());
  for (Index c = 0; c < data.cols(); ++c) {
    out.col(c) = (data.col(c).array() * sd(c) + mean(c)).matrix();
  }
  return out;
}

std::vector<Index> stratified_subset(const std::vector<int>& labels, Index count, std::uint64_t seed) {
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<Index>(i));
  if (count < 0 || count > static_cast<Index>(labels.size())) {
    throw Error(ErrorCode::InvalidArgument, "subset size exceeds the dataset");
  }
  const Index classes = static_cast<Index>(by_class.size());
  if (classes == 0) return {};

  // Quotas: equal shares, remainder to the lowest labels, then capped by class
  // size with the shortfall redistributed in label order.
  std::vector<Index> quota;
  for (Index c = 0; c < classes; ++c) quota.push_back(count / classes + (c < count % classes ? 1 : 0));
  Index shortfall = 0;
  Index c = 0;
  for (auto& [label, members] : by_class) {
    const Index available = static_cast<Index>(members.size());
    if (quota[static_cast<std::size_t>(c)] > available) {
      shortfall += quota[static_cast<std::size_t>(c)] - available;
      quota[static_cast<std::size_t>(c)] = available;
    }
    ++c;
  }
  while (shortfall > 0) {
    c = 0;
    for (auto& [label, members] : by_class) {
      if (shortfall > 0 && quota[static_cast<std::size_t>(c)] < static_cast<Index>(members.size())) {
        ++quota[static_cast<std::size_t>(c)];
        --shortfall;
      }
      ++c;
    }
  }

  Rng rng(seed);
  std::vector<Index> out;
  c = 0;
  for (auto& [label, members] : by_class) {
    std::vector<Index> pool = members;
    rng.shuffle(pool);
    out.insert(out.end(), pool.begin(), pool.begin() + quota[static_cast<std::size_t>(c)]);
    ++c;
  }
  std::sort(out.begin(), out.end());
  return out;
}

LabeledDataset select_rows(const LabeledDataset& dataset, const std::vector<Index>& rows) {
  LabeledDataset out;
  out.names = dataset.names;
  out.data.resize(static_cast<Index>(rows.size()), dataset.data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.data.row(static_cast<Index>(i)) = dataset.data.row(rows[i]);
  if (dataset.labels) {
    std::vector<int> labels;
    for (Index r : rows) labels.push_back((*dataset.labels)[static_cast<std::size_t>(r)]);
    out.labels = std::move(labels);
  }
  return out;
}

}  // namespace prisomap
