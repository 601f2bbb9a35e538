#include "varscore/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "varscore/checkpoint.hpp"
#include "varscore/dms.hpp"
#include "varscore/errors.hpp"
#include "varscore/fitness.hpp"
#include "varscore/graph.hpp"
#include "varscore/ingest.hpp"
#include "varscore/ioutil.hpp"
#include "varscore/metrics.hpp"
#include "varscore/pdb.hpp"
#include "varscore/scorer.hpp"
#include "varscore/synthetic.hpp"
#include "varscore/variants.hpp"
#include "varscore/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace varscore {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::string join(const std::vector<int>& parts, char sep) {
  std::vector<std::string> s;
  s.reserve(parts.size());
  for (int p : parts) s.push_back(std::to_string(p));
  return join(s, sep);
}

// Resolved settings, hashed in sorted key order so the digest does not
// depend on registration order.
using Settings = std::vector<std::pair<std::string, std::string>>;

std::string settings_hash(const std::string& command, Settings settings) {
  std::sort(settings.begin(), settings.end());
  std::string canon = "command=" + command + "\n";
  for (const auto& [key, value] : settings) canon += key + "=" + value + "\n";
  return sha256_hex(canon);
}

// No timestamps anywhere in provenance: identical invocations must produce
// byte-identical outputs.
ordered_json provenance_block(const std::string& config_hash, std::uint64_t seed,
                              const std::string& checkpoint_hash) {
  ordered_json prov;
  prov["artifact_version"] = kVersion;
  prov["config_hash"] = config_hash;
  prov["seed"] = seed;
  if (!checkpoint_hash.empty()) prov["checkpoint_hash"] = checkpoint_hash;
  return prov;
}

void write_provenance(const std::string& artifact_path, const ordered_json& prov) {
  write_file_atomic(artifact_path + ".prov.json", prov.dump(2) + "\n");
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<Atom> load_atoms(const std::string& path, const std::string& chain) {
  std::vector<Atom> atoms = parse_structure(read_file(path));
  if (!chain.empty()) {
    if (chain.size() != 1) throw ConfigError("chain must be a single letter, got '" + chain + "'");
    std::erase_if(atoms, [&](const Atom& a) { return a.chain_id != chain[0]; });
    if (atoms.empty()) throw EmptyStructureError(path + " has no atoms on chain " + chain);
  }
  return atoms;
}

EnvironmentMode parse_environment(const std::string& mode, double radius) {
  if (mode == "local") return EnvironmentMode::local_within(radius);
  return EnvironmentMode::full();
}

std::vector<MaskedGraph> load_samples(const std::string& dataset_dir, int synthetic,
                                      std::uint64_t seed) {
  if (synthetic > 0) return generate_synthetic_res(synthetic, seed);
  ResLoadReport report = load_res_dataset(dataset_dir);
  for (const std::string& err : report.row_errors)
    std::cerr << "warning: " << dataset_dir << ": " << err << '\n';
  if (report.dataset.empty()) throw ValidationError(dataset_dir + " produced no usable samples");
  return std::move(report.dataset);
}

// Minimal self-contained line chart: mean metric value against training-set
// size, one polyline per model, whiskers at one standard deviation.
std::string curve_svg(const std::vector<CurveAggregate>& aggregates, const std::string& metric,
                      const std::string& title) {
  struct Point {
    double size, mean, stddev;
  };
  std::map<std::string, std::vector<Point>> series;
  std::set<int> sizes;
  for (const CurveAggregate& a : aggregates) {
    const std::size_t dot = a.metric.find('.');
    if (dot == std::string::npos || a.metric.substr(dot + 1) != metric) continue;
    if (!std::isfinite(a.mean)) continue;
    series[a.metric.substr(0, dot)].push_back(
        {static_cast<double>(a.size), a.mean, a.stddev});
    sizes.insert(a.size);
  }
  if (series.empty()) throw ValidationError("no finite aggregate rows for metric " + metric);

  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.size < b.size; });
    for (const Point& p : pts) {
      xlo = std::min(xlo, p.size);
      xhi = std::max(xhi, p.size);
      ylo = std::min(ylo, p.mean - p.stddev);
      yhi = std::max(yhi, p.mean + p.stddev);
    }
  }
  if (xhi - xlo < 1e-12) {
    xlo -= 1.0;
    xhi += 1.0;
  }
  const double ypad = std::max(0.05, (yhi - ylo) * 0.1);
  ylo -= ypad;
  yhi += ypad;

  constexpr double kW = 640, kH = 400, kL = 70, kR = 150, kT = 40, kB = 50;
  const auto px = [&](double v) { return kL + (v - xlo) / (xhi - xlo) * (kW - kL - kR); };
  const auto py = [&](double v) { return kH - kB - (v - ylo) / (yhi - ylo) * (kH - kT - kB); };
  const auto f1 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return std::string(buf);
  };
  const auto f3 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return std::string(buf);
  };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"" + f1(kW / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         title + "</text>\n";
  svg += "<line x1=\"" + f1(kL) + "\" y1=\"" + f1(kH - kB) + "\" x2=\"" + f1(kW - kR) +
         "\" y2=\"" + f1(kH - kB) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + f1(kL) + "\" y1=\"" + f1(kT) + "\" x2=\"" + f1(kL) + "\" y2=\"" +
         f1(kH - kB) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ylo + (yhi - ylo) * i / 4.0;
    svg += "<line x1=\"" + f1(kL - 4) + "\" y1=\"" + f1(py(v)) + "\" x2=\"" + f1(kL) +
           "\" y2=\"" + f1(py(v)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + f1(kL - 8) + "\" y=\"" + f1(py(v) + 4) +
           "\" text-anchor=\"end\">" + f3(v) + "</text>\n";
  }
  for (int s : sizes) {
    svg += "<line x1=\"" + f1(px(s)) + "\" y1=\"" + f1(kH - kB) + "\" x2=\"" + f1(px(s)) +
           "\" y2=\"" + f1(kH - kB + 4) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + f1(px(s)) + "\" y=\"" + f1(kH - kB + 18) +
           "\" text-anchor=\"middle\">" + std::to_string(s) + "</text>\n";
  }
  svg += "<text x=\"" + f1((kL + kW - kR) / 2) + "\" y=\"" + f1(kH - 10) +
         "\" text-anchor=\"middle\">training set size</text>\n";

  const std::vector<std::string> colors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::size_t ci = 0;
  double legend_y = kT + 10;
  for (const auto& [name, pts] : series) {
    const std::string& color = colors[ci++ % colors.size()];
    std::string poly;
    for (const Point& p : pts) {
      poly += f1(px(p.size)) + "," + f1(py(p.mean)) + " ";
      svg += "<line x1=\"" + f1(px(p.size)) + "\" y1=\"" + f1(py(p.mean - p.stddev)) +
             "\" x2=\"" + f1(px(p.size)) + "\" y2=\"" + f1(py(p.mean + p.stddev)) +
             "\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
      svg += "<circle cx=\"" + f1(px(p.size)) + "\" cy=\"" + f1(py(p.mean)) +
             "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    svg += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<line x1=\"" + f1(kW - kR + 10) + "\" y1=\"" + f1(legend_y) + "\" x2=\"" +
           f1(kW - kR + 30) + "\" y2=\"" + f1(legend_y) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + f1(kW - kR + 36) + "\" y=\"" + f1(legend_y + 4) + "\">" + name +
           "." + metric + "</text>\n";
    legend_y += 18;
  }
  svg += "</svg>\n";
  return svg;
}

// ---------------------------------------------------------------------------
// Fallback resolution. CLI11 applies config files before environment
// variables, which inverts the contract here (flags > environment > config
// > defaults), so untouched options are filled manually after the parse.

class OptionResolver {
 public:
  OptionResolver(const CLI::App* cmd, const nlohmann::json* section)
      : cmd_(cmd), section_(section) {}

  void fallback(const std::string& flag, std::string& value, const char* env = nullptr) const {
    const nlohmann::json* item = source(flag, env, value);
    if (item != nullptr) value = item->get<std::string>();
  }
  void fallback(const std::string& flag, double& value) const {
    const nlohmann::json* item = source(flag, nullptr, value);
    if (item != nullptr) value = item->get<double>();
  }
  void fallback(const std::string& flag, int& value) const {
    const nlohmann::json* item = source(flag, nullptr, value);
    if (item != nullptr) value = item->get<int>();
  }
  void fallback(const std::string& flag, std::uint64_t& value) const {
    const nlohmann::json* item = source(flag, nullptr, value);
    if (item != nullptr) value = item->get<std::uint64_t>();
  }
  void fallback(const std::string& flag, bool& value) const {
    const nlohmann::json* item = source(flag, nullptr, value);
    if (item != nullptr) value = item->get<bool>();
  }
  void fallback(const std::string& flag, std::vector<int>& value) const {
    const nlohmann::json* item = source(flag, nullptr, value);
    if (item != nullptr) value = item->get<std::vector<int>>();
  }

 private:
  // Returns the config item to apply, or nullptr when the flag was given on
  // the command line (flags win) or no fallback exists. Environment values
  // are applied in place and also return nullptr.
  template <typename T>
  const nlohmann::json* source(const std::string& flag, const char* env, T& value) const {
    if (cmd_->count(flag) > 0) return nullptr;
    if (env != nullptr) {
      if (const char* v = std::getenv(env); v != nullptr && *v != '\0') {
        if constexpr (std::is_same_v<T, std::string>) value = v;
        return nullptr;
      }
    }
    if (section_ == nullptr) return nullptr;
    const std::string key = flag.substr(flag.find_first_not_of('-'));
    const auto it = section_->find(key);
    if (it == section_->end()) return nullptr;
    return &*it;
  }

  const CLI::App* cmd_;
  const nlohmann::json* section_;
};

// ---------------------------------------------------------------------------
// Subcommand arguments beyond the shared RunConfig.

struct FetchArgs {
  std::vector<std::string> ids;
  std::string kind = "experimental";
  int assembly = 1;
  std::string endpoint_pdb;
  std::string endpoint_af;
  int attempts = 3;
  int backoff_ms = 250;
  std::string out = "manifest.csv";
};

struct GraphArgs {
  std::string structure;
  double cutoff = 4.5;
  std::string chain;
  std::string out = "graph.json";
};

struct TrainArgs {
  std::string dataset;
  int synthetic = 0;
  double val_fraction = 0.2;
  TrainConfig config;
};

struct ScoreArgs {
  std::string structure;
  std::string chain;
  bool no_parallel = false;
  std::string out = "matrix.csv";
};

struct RankArgs {
  std::string structure;
  std::string assay;
  std::string chain;
  double epsilon = 0.0;
  std::string recall_denominator = "assay";
  bool keep_intermediates = false;
  bool no_parallel = false;
};

struct EvaluateArgs {
  std::string ranking;
  std::string assay;
  std::string recall_denominator = "assay";
  std::string out = "report.json";
};

struct RegressArgs {
  std::string assay;
  std::string scores;
  std::string aaindex;
  double test_fraction = 0.2;
  bool no_parallel = false;
};

struct ConfusionArgs {
  std::string dataset;
  int synthetic = 0;
  bool no_parallel = false;
};

int run_fetch(const RunConfig& run, const FetchArgs& a) {
  FetchConfig config;
  config.cache_dir = run.cache_dir;
  config.experimental_endpoint = a.endpoint_pdb;
  config.predicted_endpoint = a.endpoint_af;
  config.attempts = a.attempts;
  config.backoff_ms = a.backoff_ms;

  std::string manifest = "id,kind,status,source,path,detail\n";
  bool any_failed = false;
  for (const std::string& id : a.ids) {
    StructureSource source;
    if (a.kind == "experimental") {
      source = StructureSource::experimental(id, a.assembly);
    } else if (a.kind == "predicted") {
      source = StructureSource::predicted(id);
    } else {
      source = StructureSource::local(id);
    }

    // A fetch that leaves the cached bytes untouched was served from cache.
    const std::string cache_file = cache_file_path(source, config);
    const bool existed = source.kind != StructureSource::Kind::local && fs::exists(cache_file);
    const std::string before = existed ? sha256_file(cache_file) : "";
    try {
      const StructureSource resolved = fetch_structure(source, config);
      std::string origin = "download";
      if (source.kind == StructureSource::Kind::local) {
        origin = "local";
      } else if (existed && sha256_file(cache_file) == before) {
        origin = "cache";
      }
      manifest += id + "," + a.kind + ",ok," + origin + "," +
                  csv_quote(resolved.resolved_path) + ",\n";
    } catch (const Error& e) {
      any_failed = true;
      manifest += id + "," + a.kind + ",failed,,," + csv_quote(e.what()) + "\n";
      std::cerr << "error: " << id << ": " << e.what() << '\n';
    }
  }

  write_file_atomic(a.out, manifest);
  const std::string hash = settings_hash(
      "fetch", {{"ids", join(a.ids, ';')},
                {"kind", a.kind},
                {"assembly", std::to_string(a.assembly)},
                {"cache", run.cache_dir},
                {"endpoint_pdb", a.endpoint_pdb},
                {"endpoint_af", a.endpoint_af},
                {"attempts", std::to_string(a.attempts)},
                {"backoff_ms", std::to_string(a.backoff_ms)},
                {"out", a.out}});
  write_provenance(a.out, provenance_block(hash, run.seed, ""));
  std::cout << "wrote " << a.out << ": " << a.ids.size() << " ids"
            << (any_failed ? ", with failures" : "") << '\n';
  return any_failed ? 1 : 0;
}

int run_graph(const RunConfig& run, const GraphArgs& a) {
  const AtomicGraph graph = build_atomic_graph(load_atoms(a.structure, a.chain), a.cutoff);
  write_file_atomic(a.out, graph_to_json(graph));
  const std::string hash =
      settings_hash("graph", {{"structure", a.structure},
                              {"cutoff", fmt17(a.cutoff)},
                              {"chain", a.chain},
                              {"out", a.out}});
  write_provenance(a.out, provenance_block(hash, run.seed, ""));
  std::cout << "wrote " << a.out << ": " << graph.atoms.size() << " atoms, "
            << graph.edges.size() << " edges, " << graph.ca_index.size()
            << " mapped residues\n";
  return 0;
}

int run_train(const RunConfig& run, const TrainArgs& a) {
  std::vector<MaskedGraph> samples = load_samples(a.dataset, a.synthetic, a.config.seed);
  if (samples.size() < 2)
    throw ValidationError("need at least two samples to split off a validation set");
  const auto n_val = static_cast<std::size_t>(std::max<long>(
      1, std::lround(static_cast<double>(samples.size()) * a.val_fraction)));
  if (n_val >= samples.size()) throw ConfigError("validation fraction leaves no training data");
  const std::vector<MaskedGraph> val(samples.end() - static_cast<std::ptrdiff_t>(n_val),
                                     samples.end());
  samples.resize(samples.size() - n_val);

  const TrainResult result = train_res(samples, val, a.config);

  std::string csv = "epoch,learning_rate,train_loss,val_loss,val_accuracy\n";
  for (const EpochStats& e : result.history) {
    csv += std::to_string(e.epoch) + "," + fmt17(e.learning_rate) + "," + fmt17(e.train_loss) +
           "," + fmt17(e.val_loss) + "," + fmt17(e.val_accuracy) + "\n";
  }

  fs::create_directories(run.out_dir);
  const std::string metrics_path = (fs::path(run.out_dir) / "metrics.csv").string();
  const std::string ckpt_path = (fs::path(run.out_dir) / "checkpoint.bin").string();
  write_file_atomic(metrics_path, csv);
  save_checkpoint(ckpt_path, result.params, a.config);

  const std::string hash = settings_hash(
      "train-res", {{"dataset", a.dataset},
                    {"synthetic", std::to_string(a.synthetic)},
                    {"val_fraction", fmt17(a.val_fraction)},
                    {"epochs", std::to_string(a.config.epochs)},
                    {"batch_size", std::to_string(a.config.batch_size)},
                    {"lr", fmt17(a.config.learning_rate)},
                    {"dropout", fmt17(a.config.dropout)},
                    {"patience", std::to_string(a.config.scheduler_patience)},
                    {"decay_rate", fmt17(a.config.decay_rate)},
                    {"plain_sgd", a.config.plain_sgd ? "1" : "0"},
                    {"seed", std::to_string(a.config.seed)},
                    {"out_dir", run.out_dir}});
  const std::string ckpt_hash = sha256_file(ckpt_path);
  write_provenance(metrics_path, provenance_block(hash, a.config.seed, ckpt_hash));
  write_provenance(ckpt_path, provenance_block(hash, a.config.seed, ckpt_hash));

  if (result.history.empty()) {
    std::cout << "wrote " << ckpt_path << ": seeded initialization, no epochs run\n";
  } else {
    const EpochStats& best = result.history[static_cast<std::size_t>(result.best_epoch - 1)];
    std::cout << "wrote " << ckpt_path << ": best epoch " << result.best_epoch
              << ", validation accuracy " << fmt4(best.val_accuracy) << '\n';
  }
  return 0;
}

ScoreMatrix scored_matrix(const RunConfig& run, const std::string& structure,
                          const std::string& chain, bool parallel) {
  const Checkpoint ckpt = load_checkpoint(run.checkpoint);
  const AtomicGraph graph =
      build_atomic_graph(load_atoms(structure, chain), ckpt.params.spec().cutoff);
  ScoreMatrix matrix = score_structure(ckpt.params, graph,
                                       parse_environment(run.mode, run.radius), parallel);
  matrix.checkpoint_id = sha256_file(run.checkpoint).substr(0, 12);
  matrix.structure_id = fs::path(structure).stem().string();
  return matrix;
}

int run_score(const RunConfig& run, const ScoreArgs& a) {
  const ScoreMatrix matrix = scored_matrix(run, a.structure, a.chain, !a.no_parallel);
  write_file_atomic(a.out, score_matrix_to_csv(matrix));
  const std::string hash = settings_hash(
      "score", {{"structure", a.structure},
                {"checkpoint", run.checkpoint},
                {"chain", a.chain},
                {"mode", run.mode},
                {"radius", fmt17(run.radius)},
                {"out", a.out}});
  write_provenance(a.out, provenance_block(hash, run.seed, sha256_file(run.checkpoint)));
  std::cout << "wrote " << a.out << ": " << matrix.positions.size() << " positions scored\n";
  return 0;
}

int run_rank(const RunConfig& run, const RankArgs& a) {
  const DmsAssay assay = parse_dms(read_file(a.assay));
  const ScoreMatrix matrix = scored_matrix(run, a.structure, a.chain, !a.no_parallel);
  const std::vector<CandidateMutation> candidates =
      generate_mutations(matrix, assay, run.filter_wrong);
  const std::vector<RankedMutation> ranked = run.strategy == "positional"
                                                 ? rank_positional(candidates, a.epsilon)
                                                 : rank_global(candidates);
  const RecallDenominator denom = a.recall_denominator == "ranked"
                                      ? RecallDenominator::ranked
                                      : RecallDenominator::assay;
  const EvaluationReport report = evaluate_ranking(ranked, assay, denom);

  const std::string hash = settings_hash(
      "rank", {{"structure", a.structure},
               {"assay", a.assay},
               {"checkpoint", run.checkpoint},
               {"chain", a.chain},
               {"strategy", run.strategy},
               {"epsilon", fmt17(a.epsilon)},
               {"filter_wrong", run.filter_wrong ? "1" : "0"},
               {"mode", run.mode},
               {"radius", fmt17(run.radius)},
               {"recall_denominator", a.recall_denominator},
               {"out_dir", run.out_dir}});
  const std::string ckpt_hash = sha256_file(run.checkpoint);
  const ordered_json prov = provenance_block(hash, run.seed, ckpt_hash);

  fs::create_directories(run.out_dir);
  const std::string tsv_path = (fs::path(run.out_dir) / "ranked.tsv").string();
  const std::string report_path = (fs::path(run.out_dir) / "report.json").string();
  write_file_atomic(tsv_path, ranked_to_tsv(ranked));
  write_provenance(tsv_path, prov);
  ordered_json report_json = ordered_json::parse(report_to_json(report));
  report_json["provenance"] = prov;
  write_file_atomic(report_path, report_json.dump(2) + "\n");
  if (a.keep_intermediates) {
    const std::string matrix_path = (fs::path(run.out_dir) / "matrix.csv").string();
    write_file_atomic(matrix_path, score_matrix_to_csv(matrix));
    write_provenance(matrix_path, prov);
  }

  std::cout << "wrote " << tsv_path << ": " << ranked.size() << " ranked mutations; spearman_all "
            << (report.spearman_all ? fmt4(*report.spearman_all) : std::string("undefined"))
            << ", top-10 precision " << fmt4(report.top10_precision) << '\n';
  return 0;
}

int run_evaluate(const RunConfig& run, const EvaluateArgs& a) {
  const std::vector<RankedMutation> ranked = ranked_from_tsv(read_file(a.ranking));
  const DmsAssay assay = parse_dms(read_file(a.assay));
  const RecallDenominator denom = a.recall_denominator == "ranked"
                                      ? RecallDenominator::ranked
                                      : RecallDenominator::assay;
  const EvaluationReport report = evaluate_ranking(ranked, assay, denom);

  const std::string hash = settings_hash(
      "evaluate", {{"ranking", a.ranking},
                   {"assay", a.assay},
                   {"recall_denominator", a.recall_denominator},
                   {"out", a.out}});
  ordered_json report_json = ordered_json::parse(report_to_json(report));
  report_json["provenance"] = provenance_block(hash, run.seed, "");
  write_file_atomic(a.out, report_json.dump(2) + "\n");
  std::cout << "wrote " << a.out << ": spearman_all "
            << (report.spearman_all ? fmt4(*report.spearman_all) : std::string("undefined"))
            << ", top-10 precision " << fmt4(report.top10_precision) << '\n';
  return 0;
}

int run_regress(const RunConfig& run, const RegressArgs& a) {
  const DmsAssay assay = parse_dms(read_file(a.assay));
  const ScoreMatrix matrix = score_matrix_from_csv(read_file(a.scores));

  LearningCurveConfig config;
  config.sizes = run.sizes;
  config.repeats = run.repeats;
  config.test_fraction = a.test_fraction;
  config.lambda = run.lambda;
  config.seed = run.seed;
  config.parallel = !a.no_parallel;

  const std::string hash = settings_hash(
      "regress", {{"assay", a.assay},
                  {"scores", a.scores},
                  {"aaindex", a.aaindex},
                  {"sizes", join(run.sizes, ';')},
                  {"repeats", std::to_string(run.repeats)},
                  {"lambda", fmt17(run.lambda)},
                  {"test_fraction", fmt17(a.test_fraction)},
                  {"seed", std::to_string(run.seed)},
                  {"out_dir", run.out_dir}});
  const ordered_json prov = provenance_block(hash, run.seed, "");
  fs::create_directories(run.out_dir);

  const auto emit = [&](const Embedding& embedding, const std::string& tag) {
    const LearningCurveResult result = learning_curve(assay, matrix, embedding, config);
    const std::string points_path =
        (fs::path(run.out_dir) / ("curve_points_" + tag + ".csv")).string();
    const std::string agg_path =
        (fs::path(run.out_dir) / ("curve_aggregate_" + tag + ".csv")).string();
    write_file_atomic(points_path, learning_curve_to_csv(result.points));
    write_file_atomic(agg_path, curve_aggregates_to_csv(result.aggregates));
    write_provenance(points_path, prov);
    write_provenance(agg_path, prov);

    // Plots are best-effort; the CSVs are the contract.
    try {
      const std::string svg_path = (fs::path(run.out_dir) / ("curve_" + tag + ".svg")).string();
      write_file_atomic(svg_path, curve_svg(result.aggregates, "spearman_all", tag));
      write_provenance(svg_path, prov);
    } catch (const std::exception& e) {
      std::cerr << "warning: plot for " << tag << " not rendered: " << e.what() << '\n';
    }

    const int last = *std::max_element(run.sizes.begin(), run.sizes.end());
    std::string summary = "wrote " + agg_path + ": size " + std::to_string(last);
    for (const char* model : {"augmented", "baseline"}) {
      const std::string name = std::string(model) + ".spearman_all";
      for (const CurveAggregate& agg : result.aggregates) {
        if (agg.size == last && agg.metric == name) {
          summary += std::string(" ") + model + " spearman_all " +
                     (std::isfinite(agg.mean) ? fmt4(agg.mean) : std::string("undefined"));
        }
      }
    }
    std::cout << summary << '\n';
  };

  emit(Embedding::one_hot(), "onehot");
  if (!a.aaindex.empty()) {
    emit(Embedding::aa_index(reduce_aaindex(parse_aaindex_csv(read_file(a.aaindex)))),
         "aaindex");
  }
  return 0;
}

int run_confusion(const RunConfig& run, const ConfusionArgs& a) {
  const Checkpoint ckpt = load_checkpoint(run.checkpoint);
  const std::vector<MaskedGraph> samples = load_samples(a.dataset, a.synthetic, run.seed);
  const ConfusionMatrix confusion = confusion_matrix(ckpt.params, samples, !a.no_parallel);

  const std::array<char, AminoAcid::kCount>& codes = amino_acid_codes();
  std::string csv = "true";
  for (char c : codes) {
    csv.push_back(',');
    csv.push_back(c);
  }
  csv.push_back('\n');
  for (int i = 0; i < AminoAcid::kCount; ++i) {
    csv.push_back(codes[static_cast<std::size_t>(i)]);
    for (int j = 0; j < AminoAcid::kCount; ++j) csv += "," + std::to_string(confusion(i, j));
    csv.push_back('\n');
  }

  const std::string hash = settings_hash(
      "confusion", {{"dataset", a.dataset},
                    {"synthetic", std::to_string(a.synthetic)},
                    {"checkpoint", run.checkpoint},
                    {"seed", std::to_string(run.seed)},
                    {"out_dir", run.out_dir}});
  const std::string ckpt_hash = sha256_file(run.checkpoint);

  fs::create_directories(run.out_dir);
  const std::string csv_path = (fs::path(run.out_dir) / "confusion.csv").string();
  const std::string summary_path = (fs::path(run.out_dir) / "summary.json").string();
  write_file_atomic(csv_path, csv);
  write_provenance(csv_path, provenance_block(hash, run.seed, ckpt_hash));

  const std::int64_t total = confusion.sum();
  const std::int64_t diagonal = confusion.diagonal().sum();
  ordered_json summary;
  summary["n_samples"] = total;
  summary["accuracy"] = total > 0 ? static_cast<double>(diagonal) / static_cast<double>(total) : 0.0;
  try {
    summary["blosum_spearman"] = compare_to_blosum62(confusion);
  } catch (const UndefinedCorrelationError& e) {
    summary["blosum_spearman"] = nullptr;
    std::cerr << "warning: substitution-matrix comparison undefined: " << e.what() << '\n';
  }
  summary["provenance"] = provenance_block(hash, run.seed, ckpt_hash);
  write_file_atomic(summary_path, summary.dump(2) + "\n");

  std::cout << "wrote " << csv_path << ": " << total << " samples, accuracy "
            << fmt4(summary["accuracy"].get<double>());
  if (summary["blosum_spearman"].is_number()) {
    std::cout << ", substitution-matrix spearman "
              << fmt4(summary["blosum_spearman"].get<double>());
  }
  std::cout << '\n';
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Structure-conditioned scoring, ranking, and regression for single-point protein variants"};
  app.require_subcommand(0, 1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file: {\"<subcommand>\": {\"<option>\": value}}; "
                 "flags and environment variables win over it")
      ->check(CLI::ExistingFile);

  RunConfig fetch_run, graph_run, train_run, score_run, rank_run, eval_run, regress_run,
      confusion_run;
  FetchArgs fetch;
  GraphArgs graph;
  TrainArgs train;
  ScoreArgs score;
  RankArgs rank;
  EvaluateArgs evaluate;
  RegressArgs regress;
  ConfusionArgs confusion;

  CLI::App* fetch_cmd =
      app.add_subcommand("fetch", "Resolve structure ids into a verified local cache");
  fetch_cmd->add_option("ids", fetch.ids, "Structure identifiers (paths with --kind local)");
  fetch_cmd->add_option("--kind", fetch.kind, "Structure source kind")
      ->check(CLI::IsMember({"experimental", "predicted", "local"}));
  fetch_cmd->add_option("--assembly", fetch.assembly, "Biological assembly number")
      ->check(CLI::PositiveNumber);
  fetch_cmd->add_option("--cache", fetch_run.cache_dir, "Cache directory (env VARSCORE_CACHE)");
  fetch_cmd->add_option("--endpoint-pdb", fetch.endpoint_pdb,
                        "Experimental-structure base URL (env VARSCORE_ENDPOINT_PDB)");
  fetch_cmd->add_option("--endpoint-af", fetch.endpoint_af,
                        "Predicted-structure base URL (env VARSCORE_ENDPOINT_AF)");
  fetch_cmd->add_option("--attempts", fetch.attempts, "Download attempts before giving up")
      ->check(CLI::PositiveNumber);
  fetch_cmd->add_option("--backoff-ms", fetch.backoff_ms, "Initial retry backoff, doubled per attempt");
  fetch_cmd->add_option("--seed", fetch_run.seed, "Seed recorded in provenance");
  fetch_cmd->add_option("--out", fetch.out, "Manifest CSV path");

  CLI::App* graph_cmd = app.add_subcommand("graph", "Dump a structure's proximity graph as JSON");
  graph_cmd->add_option("structure", graph.structure, "Structure file")
      ->required()
      ->check(CLI::ExistingFile);
  graph_cmd->add_option("--cutoff", graph.cutoff, "Edge distance cutoff, Angstrom")
      ->check(CLI::PositiveNumber);
  graph_cmd->add_option("--chain", graph.chain, "Keep only this chain");
  graph_cmd->add_option("--seed", graph_run.seed, "Seed recorded in provenance");
  graph_cmd->add_option("--out", graph.out, "Output JSON path");

  CLI::App* train_cmd =
      app.add_subcommand("train-res", "Train the residue-identity scorer and save a checkpoint");
  CLI::Option* train_dataset =
      train_cmd->add_option("--dataset", train.dataset, "Directory with targets.csv + sample PDBs")
          ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--synthetic", train.synthetic, "Generate this many synthetic samples")
      ->excludes(train_dataset);
  train_cmd->add_option("--val-fraction", train.val_fraction, "Fraction held out for validation")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--epochs", train.config.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", train.config.batch_size, "Minibatch size")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train.config.learning_rate, "Learning rate")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--dropout", train.config.dropout, "Dropout rate")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--patience", train.config.scheduler_patience,
                        "Epochs without improvement before decaying the learning rate");
  train_cmd->add_option("--decay-rate", train.config.decay_rate, "Learning-rate decay factor");
  train_cmd->add_flag("--plain-sgd", train.config.plain_sgd, "Disable adaptive moments");
  train_cmd->add_option("--seed", train.config.seed, "Training seed");
  train_cmd->add_option("--out-dir", train_run.out_dir, "Directory for checkpoint + metrics");

  CLI::App* score_cmd =
      app.add_subcommand("score", "Score every position of a structure against all 20 residues");
  score_cmd->add_option("--structure", score.structure, "Structure file")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--checkpoint", score_run.checkpoint, "Scorer checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--chain", score.chain, "Keep only this chain");
  score_cmd->add_option("--mode", score_run.mode, "Environment mode")
      ->check(CLI::IsMember({"full", "local"}));
  score_cmd->add_option("--radius", score_run.radius, "Local environment radius, Angstrom")
      ->check(CLI::PositiveNumber);
  score_cmd->add_flag("--no-parallel", score.no_parallel, "Score positions serially");
  score_cmd->add_option("--seed", score_run.seed, "Seed recorded in provenance");
  score_cmd->add_option("--out", score.out, "Score-matrix CSV path");

  CLI::App* rank_cmd = app.add_subcommand(
      "rank", "Score a structure, rank assay mutations, and evaluate against the assay");
  rank_cmd->add_option("--structure", rank.structure, "Structure file")
      ->required()
      ->check(CLI::ExistingFile);
  rank_cmd->add_option("--assay", rank.assay, "Mutational-scan CSV")
      ->required()
      ->check(CLI::ExistingFile);
  rank_cmd->add_option("--checkpoint", rank_run.checkpoint, "Scorer checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  rank_cmd->add_option("--chain", rank.chain, "Keep only this chain");
  rank_cmd->add_option("--strategy", rank_run.strategy, "Ranking strategy")
      ->check(CLI::IsMember({"global", "positional"}));
  rank_cmd->add_option("--epsilon", rank.epsilon,
                       "Self-score tie tolerance for positional ranking");
  bool rank_no_filter = false;
  rank_cmd->add_flag("--no-filter-wrong", rank_no_filter,
                     "Keep positions whose top-scoring residue is not the wildtype");
  rank_cmd->add_option("--mode", rank_run.mode, "Environment mode")
      ->check(CLI::IsMember({"full", "local"}));
  rank_cmd->add_option("--radius", rank_run.radius, "Local environment radius, Angstrom")
      ->check(CLI::PositiveNumber);
  rank_cmd->add_option("--recall-denominator", rank.recall_denominator,
                       "Denominator for top-10 recall")
      ->check(CLI::IsMember({"assay", "ranked"}));
  rank_cmd->add_flag("--keep-intermediates", rank.keep_intermediates,
                     "Also write the score matrix");
  rank_cmd->add_flag("--no-parallel", rank.no_parallel, "Score positions serially");
  rank_cmd->add_option("--seed", rank_run.seed, "Seed recorded in provenance");
  rank_cmd->add_option("--out-dir", rank_run.out_dir, "Directory for ranked.tsv + report.json");

  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Evaluate an existing ranking against an assay");
  eval_cmd->add_option("--ranking", evaluate.ranking, "Ranked TSV")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--assay", evaluate.assay, "Mutational-scan CSV")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--recall-denominator", evaluate.recall_denominator,
                       "Denominator for top-10 recall")
      ->check(CLI::IsMember({"assay", "ranked"}));
  eval_cmd->add_option("--seed", eval_run.seed, "Seed recorded in provenance");
  eval_cmd->add_option("--out", evaluate.out, "Report JSON path");

  CLI::App* regress_cmd = app.add_subcommand(
      "regress", "Learning curves for ridge fitness regression, score-augmented vs baseline");
  regress_cmd->add_option("--assay", regress.assay, "Mutational-scan CSV")
      ->required()
      ->check(CLI::ExistingFile);
  regress_cmd->add_option("--scores", regress.scores, "Score-matrix CSV")
      ->required()
      ->check(CLI::ExistingFile);
  regress_cmd->add_option("--aaindex", regress.aaindex,
                          "Physicochemical property table; adds a reduced-embedding run")
      ->check(CLI::ExistingFile);
  regress_cmd->add_option("--sizes", regress_run.sizes, "Training-set sizes")
      ->required()
      ->delimiter(',');
  regress_cmd->add_option("--repeats", regress_run.repeats, "Random splits per size")
      ->check(CLI::PositiveNumber);
  regress_cmd->add_option("--lambda", regress_run.lambda, "Ridge regularization strength");
  regress_cmd->add_option("--test-fraction", regress.test_fraction, "Held-out fraction")
      ->check(CLI::Range(0.0, 1.0));
  regress_cmd->add_flag("--no-parallel", regress.no_parallel, "Run repeats serially");
  regress_cmd->add_option("--seed", regress_run.seed, "Split seed");
  regress_cmd->add_option("--out-dir", regress_run.out_dir, "Directory for curve CSVs + plots");

  CLI::App* confusion_cmd = app.add_subcommand(
      "confusion", "Predicted-vs-true residue confusion matrix and substitution-matrix check");
  CLI::Option* confusion_dataset =
      confusion_cmd
          ->add_option("--dataset", confusion.dataset, "Directory with targets.csv + sample PDBs")
          ->check(CLI::ExistingDirectory);
  confusion_cmd
      ->add_option("--synthetic", confusion.synthetic, "Generate this many synthetic samples")
      ->excludes(confusion_dataset);
  confusion_cmd->add_option("--checkpoint", confusion_run.checkpoint, "Scorer checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  confusion_cmd->add_flag("--no-parallel", confusion.no_parallel, "Predict serially");
  confusion_cmd->add_option("--seed", confusion_run.seed, "Synthetic generation seed");
  confusion_cmd->add_option("--out-dir", confusion_run.out_dir,
                            "Directory for confusion.csv + summary.json");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));

    const std::vector<CLI::App*> parsed = app.get_subcommands();
    if (parsed.empty()) {
      std::cout << app.help();
      return 0;
    }
    CLI::App* cmd = parsed.front();

    nlohmann::json file_config;
    if (!config_path.empty()) {
      file_config = nlohmann::json::parse(read_file(config_path));
      if (!file_config.is_object()) throw ConfigError(config_path + " must hold a JSON object");
    }
    const nlohmann::json* section = nullptr;
    if (const auto it = file_config.find(cmd->get_name());
        it != file_config.end() && it->is_object()) {
      section = &*it;
    }
    const OptionResolver resolve(cmd, section);

    if (cmd == fetch_cmd) {
      resolve.fallback("--kind", fetch.kind);
      resolve.fallback("--assembly", fetch.assembly);
      resolve.fallback("--cache", fetch_run.cache_dir, "VARSCORE_CACHE");
      resolve.fallback("--endpoint-pdb", fetch.endpoint_pdb, "VARSCORE_ENDPOINT_PDB");
      resolve.fallback("--endpoint-af", fetch.endpoint_af, "VARSCORE_ENDPOINT_AF");
      resolve.fallback("--attempts", fetch.attempts);
      resolve.fallback("--backoff-ms", fetch.backoff_ms);
      resolve.fallback("--seed", fetch_run.seed);
      resolve.fallback("--out", fetch.out);
      return run_fetch(fetch_run, fetch);
    }
    if (cmd == graph_cmd) {
      resolve.fallback("--cutoff", graph.cutoff);
      resolve.fallback("--chain", graph.chain);
      resolve.fallback("--seed", graph_run.seed);
      resolve.fallback("--out", graph.out);
      return run_graph(graph_run, graph);
    }
    if (cmd == train_cmd) {
      resolve.fallback("--val-fraction", train.val_fraction);
      resolve.fallback("--epochs", train.config.epochs);
      resolve.fallback("--batch-size", train.config.batch_size);
      resolve.fallback("--lr", train.config.learning_rate);
      resolve.fallback("--dropout", train.config.dropout);
      resolve.fallback("--patience", train.config.scheduler_patience);
      resolve.fallback("--decay-rate", train.config.decay_rate);
      resolve.fallback("--plain-sgd", train.config.plain_sgd);
      resolve.fallback("--seed", train.config.seed);
      resolve.fallback("--out-dir", train_run.out_dir);
      return run_train(train_run, train);
    }
    if (cmd == score_cmd) {
      resolve.fallback("--chain", score.chain);
      resolve.fallback("--mode", score_run.mode);
      resolve.fallback("--radius", score_run.radius);
      resolve.fallback("--no-parallel", score.no_parallel);
      resolve.fallback("--seed", score_run.seed);
      resolve.fallback("--out", score.out);
      return run_score(score_run, score);
    }
    if (cmd == rank_cmd) {
      resolve.fallback("--chain", rank.chain);
      resolve.fallback("--strategy", rank_run.strategy);
      resolve.fallback("--epsilon", rank.epsilon);
      resolve.fallback("--no-filter-wrong", rank_no_filter);
      resolve.fallback("--mode", rank_run.mode);
      resolve.fallback("--radius", rank_run.radius);
      resolve.fallback("--recall-denominator", rank.recall_denominator);
      resolve.fallback("--keep-intermediates", rank.keep_intermediates);
      resolve.fallback("--no-parallel", rank.no_parallel);
      resolve.fallback("--seed", rank_run.seed);
      resolve.fallback("--out-dir", rank_run.out_dir);
      rank_run.filter_wrong = !rank_no_filter;
      return run_rank(rank_run, rank);
    }
    if (cmd == eval_cmd) {
      resolve.fallback("--recall-denominator", evaluate.recall_denominator);
      resolve.fallback("--seed", eval_run.seed);
      resolve.fallback("--out", evaluate.out);
      return run_evaluate(eval_run, evaluate);
    }
    if (cmd == regress_cmd) {
      resolve.fallback("--sizes", regress_run.sizes);
      resolve.fallback("--repeats", regress_run.repeats);
      resolve.fallback("--lambda", regress_run.lambda);
      resolve.fallback("--test-fraction", regress.test_fraction);
      resolve.fallback("--no-parallel", regress.no_parallel);
      resolve.fallback("--seed", regress_run.seed);
      resolve.fallback("--out-dir", regress_run.out_dir);
      return run_regress(regress_run, regress);
    }
    resolve.fallback("--no-parallel", confusion.no_parallel);
    resolve.fallback("--seed", confusion_run.seed);
    resolve.fallback("--out-dir", confusion_run.out_dir);
    return run_confusion(confusion_run, confusion);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const AlignmentError& e) {
    std::cerr << "error: " << e.what() << " (positions:";
    for (int p : e.positions()) std::cerr << ' ' << p;
    std::cerr << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace varscore
