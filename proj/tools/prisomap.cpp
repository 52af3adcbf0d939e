#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prisomap/prisomap.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prisomap;

namespace {

const std::vector<std::string> kGenerators{"swiss-roll", "mnist-subset"};
const std::vector<std::string> kMethods{"pr-isomap", "isomap", "mds", "pca"};
// Shared flags that never change results and so stay out of run_config.
const std::set<std::string> kNonResultOptions{"help", "config", "threads", "cache-dir"};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct SharedFlags {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string cache_dir;
  std::string config;
};

void add_shared_flags(CLI::App* sub, SharedFlags& flags) {
  sub->set_help_flag("--help", "Print this help message and exit");
  sub->add_option("--seed", flags.seed, "Random seed")->envname("PRISOMAP_SEED")->capture_default_str();
  sub->add_option("--threads", flags.threads, "Worker thread cap (0 = all cores)")->envname("PRISOMAP_THREADS");
  sub->add_option("--cache-dir", flags.cache_dir, "Directory for cached geodesic matrices")
      ->envname("PRISOMAP_CACHE_DIR");
  sub->add_option("--config", flags.config, "JSON config file (flags > environment > config > defaults)")
      ->envname("PRISOMAP_CONFIG");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

json typed_value(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(text, &pos);
    if (pos == text.size()) return i;
  } catch (...) {
  }
  try {
    std::size_t pos = 0;
    const double d = std::stod(text, &pos);
    if (pos == text.size() && std::isfinite(d)) return d;
  } catch (...) {
  }
  return text;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& name) {
  const std::string flag = "--" + name;
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  if (const char* env = std::getenv("PRISOMAP_CONFIG")) return env;
  return {};
}

// Appends config entries as flags for options the user did not set through
// the command line or the environment. A file holding a "run_config" object
// (any output descriptor) is read through that object.
void inject_config(CLI::App* sub, std::vector<std::string>& args) {
  const std::string path = find_config_path(args);
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "config '" + path + "': " + e.what());
  }
  if (cfg.contains("run_config")) cfg = cfg["run_config"];
  if (!cfg.is_object()) throw Error(ErrorCode::ParseError, "config '" + path + "' is not a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    if (key == "command") continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      if (sub->get_option_no_throw(key) != nullptr) continue;  // positional
      throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' is not an option of '" + sub->get_name() + "'");
    }
    if (given_on_command_line(args, key)) continue;
    if ((key == "h" && given_on_command_line(args, "h-pct")) || (key == "h-pct" && given_on_command_line(args, "h"))) continue;
    if (!opt->get_envname().empty() && std::getenv(opt->get_envname().c_str()) != nullptr) continue;
    if (opt->get_expected_max() == 0) {
      if (value.is_boolean() ? value.get<bool>() : scalar_text(value) == "true") args.push_back("--" + key);
      continue;
    }
    args.push_back("--" + key);
    if (value.is_array()) {
      for (const auto& v : value) args.push_back(scalar_text(v));
    } else {
      args.push_back(scalar_text(value));
    }
  }
}

// Result-affecting settings of an invoked subcommand, keyed by long option name.
json run_config(const CLI::App* sub) {
  json out = {{"command", sub->get_name()}};
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (kNonResultOptions.count(name) != 0) continue;
    if (opt->get_expected_max() == 0) {
      out[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty()) {
      const std::string def = opt->get_default_str();
      if (def.empty()) continue;
      values = {def};
    }
    if (opt->get_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(typed_value(v));
      out[name] = arr;
    } else {
      out[name] = typed_value(values.back());
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path sidecar(const fs::path& out, const std::string& suffix) { return fs::path(out.string() + suffix); }

json compact_timings(const std::vector<std::pair<std::string, double>>& stages) {
  json out = json::object();
  for (const auto& [name, s] : stages) out[name] = s;
  return out;
}

// Labels aligned with the data rows: from a column of the data file, or a
// separate CSV whose "label" column (or only column) holds one row per point.
std::optional<std::vector<int>> load_labels(const std::string& labels_path, const LabeledDataset& data) {
  if (!labels_path.empty()) {
    const LabeledDataset file = load_csv(labels_path);
    std::optional<LabelColumn> column;
    if (file.names.size() == 1) {
      column = std::size_t{0};
    } else {
      column = std::string("label");
    }
    const LabeledDataset labeled = load_csv(labels_path, column);
    if (labeled.dropped_rows != 0) throw Error(ErrorCode::ParseError, "label file has empty rows");
    return labeled.labels;
  }
  return data.labels;
}

LabeledDataset load_data(const std::string& path, const std::string& label_column) {
  std::optional<LabelColumn> column;
  if (!label_column.empty()) column = label_column;
  return load_csv(path, column);
}

double parse_h(const std::string& text) {
  if (text == "inf" || text == "+inf" || text == "Inf" || text == "infinity") return kUnboundedWindow;
  try {
    std::size_t pos = 0;
    const double h = std::stod(text, &pos);
    if (pos != text.size() || !(h > 0.0)) throw std::invalid_argument("h");
    return h;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "--h must be a positive number or 'inf', got '" + text + "'");
  }
}

struct WindowChoice {
  std::string h_text;
  double h_pct = -1.0;

  bool percentile() const { return h_pct >= 0.0; }
  void validate(bool required) const {
    if (!h_text.empty() && percentile()) throw Error(ErrorCode::InvalidArgument, "--h and --h-pct are mutually exclusive");
    if (percentile() && !(h_pct > 0.0 && h_pct <= 100.0)) throw Error(ErrorCode::InvalidArgument, "--h-pct must lie in (0, 100]");
    if (required && h_text.empty() && !percentile()) throw Error(ErrorCode::InvalidArgument, "pr-isomap needs --h or --h-pct");
  }
  double resolve(const KnnCandidates& candidates) const {
    if (percentile()) return percentile_h(candidates);
    if (h_text.empty()) return kUnboundedWindow;
    return parse_h(h_text);
  }
  double percentile_h(const KnnCandidates& candidates) const { return prisomap::percentile(knn_edge_lengths(candidates), h_pct); }
};

void add_window_options(CLI::App* sub, WindowChoice& w) {
  auto* h = sub->add_option("--h", w.h_text, "Absolute window / edge cap (number or 'inf')");
  auto* pct = sub->add_option("--h-pct", w.h_pct, "Window as a percentile of k-NN candidate edge lengths");
  h->excludes(pct);
}

fs::path cache_file(const fs::path& dir, const GraphFingerprint& fp) {
  std::uint64_t hbits = 0;
  std::memcpy(&hbits, &fp.h, sizeof hbits);
  return dir / (hex64(fp.data_hash) + "-k" + std::to_string(fp.k) + "-h" + hex64(hbits) + ".geo");
}

// All-pairs geodesics, read from or stored in the cache when one is set.
GeodesicMatrix cached_geodesics(const NeighborGraph& graph, const GraphFingerprint& fp, const std::string& cache_dir,
                                std::string& cache_state) {
  cache_state = "disabled";
  if (!cache_dir.empty()) {
    const fs::path file = cache_file(cache_dir, fp);
    if (fs::exists(file)) {
      try {
        GeodesicMatrix cached = read_geodesic_block(file);
        if (cached.fingerprint() == fp && cached.size() == graph.n) {
          cache_state = "hit";
          return cached;
        }
      } catch (const Error&) {
        // Unreadable entries are recomputed and overwritten.
      }
    }
    cache_state = "miss";
  }
  GeodesicMatrix geo = all_pairs(graph, fp);
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    const fs::path file = cache_file(cache_dir, fp);
    const fs::path tmp = sidecar(file, ".tmp");
    write_geodesic_block(tmp, geo);
    fs::rename(tmp, file);
  }
  return geo;
}

std::string component_report(const GeodesicMatrix& geo) {
  const Index n = geo.size();
  std::vector<Index> cls(static_cast<std::size_t>(n), -1);
  std::vector<Index> sizes;
  for (Index i = 0; i < n; ++i) {
    if (cls[static_cast<std::size_t>(i)] >= 0) continue;
    Index size = 0;
    for (Index j = 0; j < n; ++j) {
      if (geo.reachable(i, j)) {
        cls[static_cast<std::size_t>(j)] = static_cast<Index>(sizes.size());
        ++size;
      }
    }
    sizes.push_back(size);
  }
  std::sort(sizes.rbegin(), sizes.rend());
  std::ostringstream out;
  out << "graph has " << sizes.size() << " connected components; sizes:";
  for (std::size_t i = 0; i < sizes.size() && i < 20; ++i) out << ' ' << sizes[i];
  if (sizes.size() > 20) out << " ...";
  out << "\nrerun with --policy largest_component, a larger --k or a larger --h";
  return out.str();
}

struct MethodOptions {
  std::string method = "pr-isomap";
  Index k = 10;
  WindowChoice window;
  Index p = 2;
  std::string policy = "error";
  double min_fraction = 0.5;
};

void add_method_options(CLI::App* sub, MethodOptions& m) {
  sub->add_option("--k", m.k, "Neighbours per point")->capture_default_str()->check(CLI::PositiveNumber);
  add_window_options(sub, m.window);
  sub->add_option("--p", m.p, "Target dimension")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--policy", m.policy, "Disconnected graph policy")
      ->capture_default_str()
      ->check(CLI::IsMember({"error", "largest_component"}));
  sub->add_option("--min-component-fraction", m.min_fraction, "Smallest share kept by largest_component")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
}

struct MethodRun {
  Embedding embedding;
  json graph = nullptr;
  std::string cache_state = "n/a";
  std::vector<std::pair<std::string, double>> timings;
};

// One embedding method on prepared data. Candidates are shared between the
// graph methods of one invocation.
MethodRun run_method(const std::string& method, const Matrix& data, const KnnCandidates* candidates, Index k, double h,
                     Index p, ComponentPolicy policy, double min_fraction, const std::string& cache_dir) {
  MethodRun run;
  Stopwatch clock;
  if (method == "mds") {
    run.embedding = classical_mds(data, p);
    run.timings.emplace_back("embed", clock.lap());
    return run;
  }
  if (method == "pca") {
    run.embedding = pca(data, p);
    run.timings.emplace_back("embed", clock.lap());
    return run;
  }
  const double window = method == "isomap" ? kUnboundedWindow : h;
  const NeighborGraph graph = knn_graph(*candidates, window);
  run.timings.emplace_back("graph", clock.lap());
  const GraphFingerprint fp{hash_data(data), k, window};
  const GeodesicMatrix geo = cached_geodesics(graph, fp, cache_dir, run.cache_state);
  run.timings.emplace_back("geodesics", clock.lap());
  const ComponentSummary comps = components(graph);
  run.graph = {{"k", k},
               {"h", std::isinf(window) ? json("inf") : json(window)},
               {"edges", graph.edge_count()},
               {"components", comps.count},
               {"largest_component", comps.sizes.empty() ? 0 : comps.sizes.front()},
               {"finite_fraction", geo.finite_fraction()},
               {"zero_distance_pairs", graph.zero_distance_pairs},
               {"degenerate_duplicates", graph.degenerate_duplicates}};
  IsomapOptions opts;
  opts.k = k;
  opts.h = window;
  opts.p = p;
  opts.policy = policy;
  opts.min_component_fraction = min_fraction;
  try {
    run.embedding = embed_geodesics(geo, opts, method);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DisconnectedGraph || e.code() == ErrorCode::GraphTooFragmented) {
      std::cerr << component_report(geo) << "\n";
    }
    throw;
  }
  run.timings.emplace_back("mds", clock.lap());
  return run;
}

json input_summary(const std::string& path, const LabeledDataset& ds) {
  return {{"path", path},
          {"rows", ds.data.rows()},
          {"cols", ds.data.cols()},
          {"dropped_rows", ds.dropped_rows},
          {"data_hash", hex64(hash_data(ds.data))}};
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string generator;
  Index n = 2000;
  double noise = 0.0;
  double exponent = 0.0;
  double short_circuit = 0.0;
  std::string images;
  std::string labels;
  std::string out;
};

fs::path default_data_dir() {
  if (const char* env = std::getenv("PRISOMAP_DATA_DIR")) return env;
  return PRISOMAP_DEFAULT_DATA_DIR;
}

int cmd_gen(const GenArgs& a, const SharedFlags& shared, const json& config) {
  const fs::path out = a.out;
  fs::create_directories(out);
  json meta = {{"schema", "generator/1"}, {"generator", a.generator}, {"run_config", config}};
  if (a.generator == "swiss-roll") {
    SwissRollSpec spec;
    spec.n = a.n;
    spec.noise_sd = a.noise;
    spec.density_exponent = a.exponent;
    spec.short_circuit_fraction = a.short_circuit;
    spec.seed = shared.seed;
    const ManifoldSample s = gen_swiss_roll(spec);
    save_csv(out / "ambient.csv", s.ambient, {"x", "y", "z"});
    save_csv(out / "intrinsic.csv", s.intrinsic, {"arc_length", "height"});
    std::vector<Index> bridges;
    for (std::size_t i = 0; i < s.short_circuit.size(); ++i)
      if (s.short_circuit[i]) bridges.push_back(static_cast<Index>(i));
    meta["spec"] = spec.to_json();
    meta["short_circuit_indices"] = bridges;
    meta["files"] = {{"ambient", "ambient.csv"}, {"intrinsic", "intrinsic.csv"}};
  } else {
    const fs::path dir = default_data_dir() / "mnist5k";
    const fs::path images = a.images.empty() ? dir / "mnist5k-images-idx3-ubyte.gz" : fs::path(a.images);
    const fs::path labels = a.labels.empty() ? dir / "mnist5k-labels-idx1-ubyte.gz" : fs::path(a.labels);
    const LabeledDataset full = load_idx(images, labels);
    const std::vector<Index> rows = stratified_subset(*full.labels, a.n, shared.seed);
    const LabeledDataset subset = select_rows(full, rows);
    std::vector<std::string> names;
    for (Index c = 0; c < subset.data.cols(); ++c) names.push_back("px" + std::to_string(c));
    save_csv(out / "ambient.csv", subset.data, names);
    Matrix label_matrix(subset.size(), 1);
    for (Index i = 0; i < subset.size(); ++i) label_matrix(i, 0) = (*subset.labels)[static_cast<std::size_t>(i)];
    save_csv(out / "labels.csv", label_matrix, {"label"});
    meta["spec"] = {{"n", a.n}, {"seed", shared.seed}, {"source_rows", full.size()}};
    meta["source_indices"] = rows;
    meta["files"] = {{"ambient", "ambient.csv"}, {"labels", "labels.csv"}};
  }
  write_json(out / "generator.json", meta);
  std::cerr << "wrote " << a.generator << " sample to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- embed

struct EmbedArgs {
  std::string in;
  std::string label_column;
  bool standardize_features = false;
  std::string out;
  std::string descriptor;
};

int cmd_embed(const EmbedArgs& a, MethodOptions m, const SharedFlags& shared, const json& config) {
  m.window.validate(m.method == "pr-isomap");
  Stopwatch clock;
  std::vector<std::pair<std::string, double>> timings;
  const LabeledDataset ds = load_data(a.in, a.label_column);
  Matrix data = a.standardize_features ? standardize(ds.data).data : ds.data;
  timings.emplace_back("load", clock.lap());

  std::optional<KnnCandidates> candidates;
  double h = kUnboundedWindow;
  if (m.method == "pr-isomap" || m.method == "isomap") {
    candidates = knn_candidates(data, m.k);
    if (m.method == "pr-isomap") h = m.window.resolve(*candidates);
    timings.emplace_back("candidates", clock.lap());
  }
  MethodRun run = run_method(m.method, data, candidates ? &*candidates : nullptr, m.k, h, m.p,
                             parse_component_policy(m.policy), m.min_fraction, shared.cache_dir);
  timings.insert(timings.end(), run.timings.begin(), run.timings.end());

  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_embedding_csv(out, run.embedding);
  json desc = {{"schema", "embedding/1"}, {"run_config", config}, {"input", input_summary(a.in, ds)},
               {"embedding", run.embedding.to_json()}, {"graph", run.graph}};
  if (m.window.percentile() && m.method == "pr-isomap") desc["h_resolved"] = h;
  if (run.embedding.eigenvalues.size() >= 3) desc["elbow_suggested_p"] = eigenvalue_elbow(run.embedding.eigenvalues);
  const fs::path descriptor = a.descriptor.empty() ? sidecar(out, ".json") : fs::path(a.descriptor);
  write_json(descriptor, desc);
  timings.emplace_back("write", clock.lap());
  write_json(sidecar(out, ".timing.json"), {{"stages", compact_timings(timings)}, {"cache", run.cache_state}});
  std::cerr << m.method << ": " << run.embedding.coordinates.rows() << " x " << run.embedding.coordinates.cols()
            << " embedding written to " << out.string() << " (geodesic cache: " << run.cache_state << ")\n";
  return 0;
}

// ---------------------------------------------------------------- scoring shared by eval and bench

struct ScoreOptions {
  Index m = 10;
  Index k_clf = 5;
  Index folds = 10;
  double density_pct = 60.0;
};

void add_score_options(CLI::App* sub, ScoreOptions& s) {
  sub->add_option("--m", s.m, "Neighbourhood size for trustworthiness/continuity")->capture_default_str();
  sub->add_option("--k-clf", s.k_clf, "k of the k-NN classifier")->capture_default_str();
  sub->add_option("--folds", s.folds, "Cross-validation folds")->capture_default_str();
  sub->add_option("--density-pct", s.density_pct,
                  "Density window as a percentile of embedding k-NN lengths")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 100.0));
}

// Reference distances among the given original rows.
Matrix reference_distances(const std::string& kind, const Matrix& data, const std::string& chart_path, Index k,
                           const WindowChoice& window, const std::vector<Index>& rows, const std::string& cache_dir) {
  auto restrict = [&](const Matrix& full) {
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = full(rows[i], rows[j]);
    return out;
  };
  auto pick = [&](const Matrix& x) {
    Matrix out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
    return out;
  };
  if (kind == "euclidean") return euclidean_distances(pick(data));
  if (kind == "chart") {
    if (chart_path.empty()) throw Error(ErrorCode::InvalidArgument, "--reference chart needs --chart");
    const LabeledDataset chart = load_csv(chart_path);
    if (chart.size() != data.rows()) throw Error(ErrorCode::CountMismatch, "chart rows do not match the data");
    return euclidean_distances(pick(chart.data));
  }
  const KnnCandidates cand = knn_candidates(data, k);
  const double h = window.resolve(cand);
  std::string state;
  const GeodesicMatrix geo = cached_geodesics(knn_graph(cand, h), GraphFingerprint{hash_data(data), k, h}, cache_dir, state);
  return restrict(geo.matrix());
}

EvalReport score(const Matrix& coords, const Matrix* reference, const std::vector<int>* labels,
                 const FoldAssignment* folds, const ScoreOptions& s) {
  EvalRequest req;
  req.reference = reference;
  req.rank_reference = reference;
  req.coordinates = &coords;
  req.neighborhood = s.m;
  req.labels = labels;
  req.folds = folds;
  req.k_clf = s.k_clf;
  std::optional<DensityEstimate> density;
  if (s.density_pct > 0.0 && coords.rows() > s.k_clf) {
    const Index kd = std::min<Index>(10, coords.rows() - 1);
    const double h = prisomap::percentile(knn_edge_lengths(knn_candidates(coords, kd)), s.density_pct);
    if (h > 0.0) density = pr_density(coords, kd, h);
  }
  if (density) req.density = &*density;
  return evaluate(req);
}

std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<Index>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string embedding;
  std::string in;
  std::string label_column;
  std::string labels;
  std::string reference = "geodesic";
  std::string chart;
  Index k = 10;
  WindowChoice window;
  std::string out;
  std::string csv;
};

int cmd_eval(const EvalArgs& a, const ScoreOptions& s, const SharedFlags& shared, const json& config) {
  a.window.validate(false);
  Stopwatch clock;
  const EmbeddingTable table = read_embedding_csv(a.embedding);
  const LabeledDataset ds = load_data(a.in, a.label_column);
  for (Index r : table.index)
    if (r < 0 || r >= ds.size()) throw Error(ErrorCode::CountMismatch, "embedding index exceeds the data rows");
  const auto labels_full = load_labels(a.labels, ds);
  if (labels_full && static_cast<Index>(labels_full->size()) != ds.size()) {
    throw Error(ErrorCode::CountMismatch, "label count does not match the data rows");
  }
  const double t_load = clock.lap();
  const Matrix reference = reference_distances(a.reference, ds.data, a.chart, a.k, a.window, table.index, shared.cache_dir);
  const double t_reference = clock.lap();
  std::optional<std::vector<int>> labels;
  std::optional<FoldAssignment> folds;
  if (labels_full) {
    labels = select_labels(*labels_full, table.index);
    folds = make_stratified_folds(*labels, s.folds, shared.seed);
  }
  EvalReport report = score(table.coordinates, &reference, labels ? &*labels : nullptr, folds ? &*folds : nullptr, s);
  json method = {{"name", "unknown"}};
  const fs::path descriptor = sidecar(a.embedding, ".json");
  if (fs::exists(descriptor)) {
    std::ifstream in(descriptor);
    const json d = json::parse(in, nullptr, false);
    if (d.is_object() && d.contains("embedding")) method = d["embedding"]["method"];
  }
  report.run = {{"method", method}, {"reference", a.reference}, {"run_config", config}};
  report.timings = {{"load", t_load}, {"reference", t_reference}, {"metrics", clock.lap()}};
  const json j = report.to_json(false);
  if (!a.out.empty()) {
    write_json(a.out, j);
    write_json(sidecar(a.out, ".timing.json"), {{"stages", compact_timings(report.timings)}});
  } else {
    std::cout << j.dump(2) << "\n";
  }
  const std::string csv = EvalReport::csv_header() + "\n" + report.to_csv_line() + "\n";
  if (!a.csv.empty()) {
    write_text(a.csv, csv);
  } else if (!a.out.empty()) {
    std::cout << csv;
  }
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string in;
  std::string label_column;
  std::string labels;
  std::string chart;
  std::string reference;
  std::vector<std::string> methods{"pr-isomap", "isomap"};
  std::string baseline;
  bool standardize_features = false;
  std::string out;
  std::string csv;
};

json optional_delta(const std::optional<double>& a, const std::optional<double>& b) {
  if (a && b) return *a - *b;
  return nullptr;
}

std::optional<double> metric(const EvalReport& r, const std::string& name) {
  if (name == "stress" && r.stress) return r.stress->value;
  if (name == "residual_variance") return r.residual_variance;
  if (name == "trustworthiness" && r.neighborhood) return r.neighborhood->trustworthiness;
  if (name == "continuity" && r.neighborhood) return r.neighborhood->continuity;
  if (name == "knn_accuracy" && r.knn) return r.knn->mean;
  if (name == "density_cv") return r.density_cv;
  return std::nullopt;
}

int cmd_bench(const BenchArgs& a, MethodOptions m, const ScoreOptions& s, const SharedFlags& shared,
              const json& config) {
  for (const auto& name : a.methods)
    if (std::find(kMethods.begin(), kMethods.end(), name) == kMethods.end())
      throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "'");
  if (a.methods.empty()) throw Error(ErrorCode::InvalidArgument, "bench needs at least one method");
  const bool needs_window = std::find(a.methods.begin(), a.methods.end(), "pr-isomap") != a.methods.end();
  m.window.validate(needs_window);
  const std::string baseline = a.baseline.empty() ? a.methods.front() : a.baseline;
  if (std::find(a.methods.begin(), a.methods.end(), baseline) == a.methods.end()) {
    throw Error(ErrorCode::InvalidArgument, "baseline '" + baseline + "' is not among the methods");
  }

  Stopwatch clock;
  const LabeledDataset ds = load_data(a.in, a.label_column);
  const Matrix data = a.standardize_features ? standardize(ds.data).data : ds.data;
  const auto labels_full = load_labels(a.labels, ds);
  if (labels_full && static_cast<Index>(labels_full->size()) != ds.size()) {
    throw Error(ErrorCode::CountMismatch, "label count (" + std::to_string(labels_full->size()) +
                                              ") does not match the data rows (" + std::to_string(ds.size()) + ")");
  }
  json timing = {{"load", clock.lap()}};

  std::optional<KnnCandidates> candidates;
  double h = kUnboundedWindow;
  if (needs_window || std::find(a.methods.begin(), a.methods.end(), "isomap") != a.methods.end()) {
    candidates = knn_candidates(data, m.k);
    if (needs_window) h = m.window.resolve(*candidates);
  }
  timing["candidates"] = clock.lap();

  std::vector<MethodRun> runs;
  for (const auto& name : a.methods) {
    runs.push_back(run_method(name, data, candidates ? &*candidates : nullptr, m.k, h, m.p,
                              parse_component_policy(m.policy), m.min_fraction, shared.cache_dir));
    timing[name] = {{"stages", compact_timings(runs.back().timings)}, {"cache", runs.back().cache_state}};
  }

  // Every method is scored on the vertices all of them kept.
  std::vector<Index> common = runs.front().embedding.kept;
  for (const auto& run : runs) {
    std::vector<Index> next;
    std::set_intersection(common.begin(), common.end(), run.embedding.kept.begin(), run.embedding.kept.end(),
                          std::back_inserter(next));
    common = std::move(next);
  }
  if (common.size() < 4) throw Error(ErrorCode::GraphTooFragmented, "methods share fewer than four kept points");

  const std::string ref_kind = !a.reference.empty() ? a.reference : (!a.chart.empty() ? "chart" : "euclidean");
  WindowChoice geodesic_window;  // unconstrained graph for the geodesic reference
  const Matrix reference = reference_distances(ref_kind, data, a.chart, m.k, geodesic_window, common, shared.cache_dir);
  std::optional<std::vector<int>> labels;
  std::optional<FoldAssignment> folds;
  if (labels_full) {
    labels = select_labels(*labels_full, common);
    folds = make_stratified_folds(*labels, s.folds, shared.seed);
  }
  timing["reference"] = clock.lap();

  std::vector<EvalReport> reports;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const Embedding& e = runs[r].embedding;
    std::map<Index, Index> position;
    for (std::size_t i = 0; i < e.kept.size(); ++i) position[e.kept[i]] = static_cast<Index>(i);
    Matrix coords(static_cast<Index>(common.size()), e.coordinates.cols());
    for (std::size_t i = 0; i < common.size(); ++i) coords.row(static_cast<Index>(i)) = e.coordinates.row(position[common[i]]);
    EvalReport report = score(coords, &reference, labels ? &*labels : nullptr, folds ? &*folds : nullptr, s);
    report.run = {{"method", e.method.to_json()}};
    reports.push_back(std::move(report));
  }
  timing["metrics"] = clock.lap();

  const std::size_t base = static_cast<std::size_t>(
      std::find(a.methods.begin(), a.methods.end(), baseline) - a.methods.begin());
  const std::vector<std::string> metric_names{"stress", "residual_variance", "trustworthiness", "continuity",
                                              "knn_accuracy", "density_cv"};
  json rows = json::array();
  json deltas = json::array();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    json row = reports[r].to_json(false);
    row["graph"] = runs[r].graph;
    row["n_kept"] = runs[r].embedding.kept.size();
    row["eigenvalues"] = runs[r].embedding.to_json()["eigenvalues"];
    rows.push_back(row);
    if (runs.size() < 2 || r == base) continue;
    json d = {{"method", a.methods[r]}, {"baseline", baseline}};
    for (const auto& name : metric_names) d[name] = optional_delta(metric(reports[r], name), metric(reports[base], name));
    if (reports[r].knn && reports[base].knn) {
      std::vector<double> diff;
      for (std::size_t f = 0; f < reports[r].knn->fold_accuracy.size(); ++f)
        diff.push_back(reports[r].knn->fold_accuracy[f] - reports[base].knn->fold_accuracy[f]);
      double mean = 0.0;
      for (double v : diff) mean += v;
      mean /= static_cast<double>(diff.size());
      double ss = 0.0;
      for (double v : diff) ss += (v - mean) * (v - mean);
      d["knn_fold_delta"] = {{"mean", mean}, {"sd", diff.size() > 1 ? std::sqrt(ss / static_cast<double>(diff.size() - 1)) : 0.0}};
    }
    deltas.push_back(d);
  }

  json doc = {{"schema", "bench/1"},
              {"run_config", config},
              {"input", input_summary(a.in, ds)},
              {"reference", ref_kind},
              {"common_points", common.size()},
              {"h_resolved", std::isinf(h) ? json("inf") : json(h)},
              {"baseline", baseline},
              {"methods", rows},
              {"deltas", deltas}};
  const fs::path out = a.out;
  write_json(out, doc);

  std::ostringstream csv;
  csv << EvalReport::csv_header();
  const bool with_deltas = runs.size() > 1;
  if (with_deltas) csv << ",delta_stress,delta_trustworthiness,delta_continuity,delta_knn_mean,delta_density_cv";
  csv << "\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    csv << reports[r].to_csv_line();
    if (with_deltas) {
      for (const char* name : {"stress", "trustworthiness", "continuity", "knn_accuracy", "density_cv"}) {
        csv << ',';
        const auto mine = metric(reports[r], name), theirs = metric(reports[base], name);
        if (r != base && mine && theirs) csv << format_real(*mine - *theirs);
      }
    }
    csv << "\n";
  }
  fs::path csv_path = a.csv;
  if (csv_path.empty()) csv_path = fs::path(out).replace_extension(".csv");
  write_text(csv_path, csv.str());
  write_json(sidecar(out, ".timing.json"), timing);
  std::cout << csv.str();
  return 0;
}

// ---------------------------------------------------------------- plot

constexpr const char* kPalette[10] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr double kCanvas = 800.0;

struct PlotArgs {
  std::string embedding;
  std::string labels;
  std::vector<int> axes{1, 2};
  std::string title;
  std::string out;
};

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// XML comments may not contain "--".
std::string comment_safe(std::string s) {
  for (std::size_t pos; (pos = s.find("--")) != std::string::npos;) s.replace(pos, 2, "-\\u002d");
  return s;
}

int cmd_plot(const PlotArgs& a, const json& config) {
  const EmbeddingTable table = read_embedding_csv(a.embedding);
  const Index p = table.coordinates.cols();
  if (p < 2) throw Error(ErrorCode::BadDimension, "plot needs at least 2 coordinate columns, found " + std::to_string(p));
  if (a.axes.size() != 2) throw Error(ErrorCode::InvalidArgument, "--axes takes two column numbers");
  for (int ax : a.axes)
    if (ax < 1 || ax > p) throw Error(ErrorCode::BadDimension, "axis " + std::to_string(ax) + " outside 1.." + std::to_string(p));
  std::optional<std::vector<int>> labels;
  if (!a.labels.empty()) {
    LabeledDataset dummy;
    const auto all = load_labels(a.labels, dummy);
    labels.emplace();
    for (Index r : table.index) {
      if (r < 0 || static_cast<std::size_t>(r) >= all->size()) throw Error(ErrorCode::CountMismatch, "label file shorter than the embedding index");
      labels->push_back((*all)[static_cast<std::size_t>(r)]);
    }
  }
  const Index cx = a.axes[0] - 1, cy = a.axes[1] - 1;
  auto bounds = [&](Index c) {
    double lo = table.coordinates.col(c).minCoeff(), hi = table.coordinates.col(c).maxCoeff();
    double span = hi - lo;
    if (!(span > 0.0)) span = 1.0;
    return std::pair{lo - 0.05 * span, hi + 0.05 * span};
  };
  const auto [x0, x1] = bounds(cx);
  const auto [y0, y1] = bounds(cy);

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"800\" height=\"800\" viewBox=\"0 0 800 800\">\n"
      << "<!-- run_config " << comment_safe(config.dump()) << " -->\n"
      << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"800\" fill=\"#ffffff\"/>\n";
  if (!a.title.empty()) svg << "<text x=\"400\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(a.title) << "</text>\n";
  svg << "<g stroke=\"none\">\n";
  for (Index i = 0; i < table.coordinates.rows(); ++i) {
    const double px = (table.coordinates(i, cx) - x0) / (x1 - x0) * kCanvas;
    const double py = kCanvas - (table.coordinates(i, cy) - y0) / (y1 - y0) * kCanvas;
    const int cls = labels ? (*labels)[static_cast<std::size_t>(i)] : 0;
    svg << "<circle cx=\"" << fixed2(px) << "\" cy=\"" << fixed2(py) << "\" r=\"2\" fill=\"" << kPalette[((cls % 10) + 10) % 10] << "\"/>\n";
  }
  svg << "</g>\n";
  if (labels) {
    const std::set<int> classes(labels->begin(), labels->end());
    int row = 0;
    for (int cls : classes) {
      const double y = 40.0 + 16.0 * row++;
      svg << "<circle cx=\"750\" cy=\"" << fixed2(y - 4) << "\" r=\"4\" fill=\"" << kPalette[((cls % 10) + 10) % 10] << "\"/>"
          << "<text x=\"760\" y=\"" << fixed2(y) << "\" font-family=\"sans-serif\" font-size=\"12\">" << cls << "</text>\n";
    }
  }
  svg << "</svg>\n";
  write_text(a.out, svg.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prisomap: manifold embeddings with a Parzen-Rosenblatt window cap"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", "prisomap 1.0.0");

  SharedFlags shared;

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a dataset");
  gen_cmd->add_option("generator", gen.generator, "Generator name (swiss-roll, mnist-subset)")->required();
  gen_cmd->add_option("--n", gen.n, "Number of points")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise sd (swiss-roll)")->capture_default_str();
  gen_cmd->add_option("--exponent", gen.exponent, "Angle density exponent (swiss-roll)")->capture_default_str();
  gen_cmd->add_option("--short-circuit", gen.short_circuit, "Bridge pairs as a fraction of n (swiss-roll)")->capture_default_str();
  gen_cmd->add_option("--images", gen.images, "IDX image file (mnist-subset)");
  gen_cmd->add_option("--labels", gen.labels, "IDX label file (mnist-subset)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  add_shared_flags(gen_cmd, shared);

  EmbedArgs embed;
  MethodOptions embed_method;
  auto* embed_cmd = app.add_subcommand("embed", "Embed a CSV dataset");
  embed_cmd->add_option("--in", embed.in, "Input CSV")->required();
  embed_cmd->add_option("--label-column", embed.label_column, "Column excluded from the features");
  embed_cmd->add_option("--method", embed_method.method, "pr-isomap, isomap, mds or pca")
      ->capture_default_str()
      ->check(CLI::IsMember(kMethods));
  add_method_options(embed_cmd, embed_method);
  embed_cmd->add_flag("--standardize", embed.standardize_features, "Standardize features first");
  embed_cmd->add_option("--out", embed.out, "Embedding CSV")->required();
  embed_cmd->add_option("--descriptor", embed.descriptor, "Descriptor JSON (default <out>.json)");
  add_shared_flags(embed_cmd, shared);

  EvalArgs eval;
  ScoreOptions eval_score;
  auto* eval_cmd = app.add_subcommand("eval", "Score an embedding");
  eval_cmd->add_option("--embedding", eval.embedding, "Embedding CSV")->required();
  eval_cmd->add_option("--in", eval.in, "Original data CSV")->required();
  eval_cmd->add_option("--label-column", eval.label_column, "Label column of the data CSV");
  eval_cmd->add_option("--labels", eval.labels, "Label CSV, one row per data row");
  eval_cmd->add_option("--reference", eval.reference, "Reference distances: geodesic, euclidean or chart")
      ->capture_default_str()
      ->check(CLI::IsMember({"geodesic", "euclidean", "chart"}));
  eval_cmd->add_option("--chart", eval.chart, "Chart coordinates CSV for --reference chart");
  eval_cmd->add_option("--k", eval.k, "Neighbours for the geodesic reference")->capture_default_str();
  add_window_options(eval_cmd, eval.window);
  add_score_options(eval_cmd, eval_score);
  eval_cmd->add_option("--out", eval.out, "Report JSON (default stdout)");
  eval_cmd->add_option("--csv", eval.csv, "Report CSV line");
  add_shared_flags(eval_cmd, shared);

  BenchArgs bench;
  MethodOptions bench_method;
  ScoreOptions bench_score;
  auto* bench_cmd = app.add_subcommand("bench", "Compare methods on one sample and one fold assignment");
  bench_cmd->add_option("--in", bench.in, "Input CSV")->required();
  bench_cmd->add_option("--label-column", bench.label_column, "Label column of the data CSV");
  bench_cmd->add_option("--labels", bench.labels, "Label CSV, one row per data row");
  bench_cmd->add_option("--chart", bench.chart, "Chart coordinates CSV");
  bench_cmd->add_option("--reference", bench.reference, "geodesic, euclidean or chart (default chart when given)")
      ->check(CLI::IsMember({"geodesic", "euclidean", "chart"}));
  bench_cmd->add_option("--methods", bench.methods, "Methods to compare")->delimiter(',')->check(CLI::IsMember(kMethods));
  bench_cmd->add_option("--baseline", bench.baseline, "Baseline method for deltas (default first)");
  add_method_options(bench_cmd, bench_method);
  add_score_options(bench_cmd, bench_score);
  bench_cmd->add_flag("--standardize", bench.standardize_features, "Standardize features first");
  bench_cmd->add_option("--out", bench.out, "Report JSON")->required();
  bench_cmd->add_option("--csv", bench.csv, "Report CSV (default <out> with .csv)");
  add_shared_flags(bench_cmd, shared);

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render an embedding as SVG");
  plot_cmd->add_option("--embedding", plot.embedding, "Embedding CSV")->required();
  plot_cmd->add_option("--labels", plot.labels, "Label CSV for colouring");
  plot_cmd->add_option("--axes", plot.axes, "Coordinate columns to draw (1-based)")->expected(2);
  plot_cmd->add_option("--title", plot.title, "Plot title");
  plot_cmd->add_option("--out", plot.out, "SVG output")->required();
  add_shared_flags(plot_cmd, shared);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    const auto first = std::find_if(args.begin(), args.end(), [](const std::string& s) { return s.empty() || s[0] != '-'; });
    if (first != args.end()) {
      if (CLI::App* sub = app.get_subcommand_no_throw(*first)) inject_config(sub, args);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    set_max_threads(shared.threads);
    if (gen_cmd->parsed()) {
      if (std::find(kGenerators.begin(), kGenerators.end(), gen.generator) == kGenerators.end()) {
        std::cerr << "error: unknown generator '" << gen.generator << "'; available generators: swiss-roll, mnist-subset\n";
        return 2;
      }
      return cmd_gen(gen, shared, run_config(gen_cmd));
    }
    if (embed_cmd->parsed()) return cmd_embed(embed, embed_method, shared, run_config(embed_cmd));
    if (eval_cmd->parsed()) return cmd_eval(eval, eval_score, shared, run_config(eval_cmd));
    if (bench_cmd->parsed()) {
      json cfg = run_config(bench_cmd);
      cfg["methods"] = bench.methods;
      return cmd_bench(bench, bench_method, bench_score, shared, cfg);
    }
    if (plot_cmd->parsed()) {
      json cfg = run_config(plot_cmd);
      cfg["axes"] = plot.axes;
      return cmd_plot(plot, cfg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
