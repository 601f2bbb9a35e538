#include "varscore/ingest.hpp"

#include "varscore/errors.hpp"
#include "varscore/ioutil.hpp"
#include "varscore/pdb.hpp"

// httplib drags in <resolv.h>, whose _res macro corrupts Eigen's template
// parameters; every Eigen-bearing header above must come first.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace varscore {

namespace {

// Advisory per-file lock so concurrent fetches of one id serialize. A holder
// that died leaves a stale file; it is stolen after a bounded wait.
class FetchLock {
 public:
  explicit FetchLock(std::string path) : path_(std::move(path)) {
    for (int waited_ms = 0;; waited_ms += 50) {
      fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd_ >= 0) return;
      if (waited_ms >= 10000) {  // steal a stale lock
        ::unlink(path_.c_str());
        continue;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
  ~FetchLock() {
    if (fd_ >= 0) ::close(fd_);
    ::unlink(path_.c_str());
  }
  FetchLock(const FetchLock&) = delete;
  FetchLock& operator=(const FetchLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

bool parses_as_structure(const std::string& content) {
  try {
    parse_structure(content);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::string download(const std::string& endpoint, const std::string& path, int attempts,
                     int backoff_ms) {
  if (endpoint.empty()) throw ConfigError("no endpoint configured for " + path);
  int last_status = 0;
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms << (attempt - 1)));
    }
    httplib::Client client(endpoint);
    client.set_follow_location(true);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(60, 0);
    auto response = client.Get(path);
    if (!response) {
      last_status = 0;
      last_error = httplib::to_string(response.error());
      continue;
    }
    if (response->status == 200) return response->body;
    last_status = response->status;
    last_error = "HTTP " + std::to_string(response->status);
  }
  const std::string what = endpoint + path + " failed after " + std::to_string(attempts) +
                           " attempts: " + last_error;
  if (last_status == 404) throw NotFoundError(what);
  throw NetworkError(what);
}

void write_sidecar(const std::string& path, const StructureSource& source,
                   const std::string& url, const std::string& content) {
  nlohmann::json j;
  j["id"] = source.id;
  j["kind"] = structure_kind_name(source.kind);
  if (source.kind == StructureSource::Kind::experimental) j["assembly"] = source.assembly;
  j["url"] = url;
  j["content_sha256"] = sha256_hex(content);
  j["bytes"] = content.size();
  j["fetched_unix"] = static_cast<std::int64_t>(std::time(nullptr));
  write_file_atomic(path, j.dump(2) + "\n");
}

bool cached_copy_valid(const std::string& file, const std::string& sidecar,
                       std::string* content) {
  if (!fs::exists(file)) return false;
  *content = read_file(file);
  if (!parses_as_structure(*content)) return false;
  if (fs::exists(sidecar)) {
    try {
      const auto j = nlohmann::json::parse(read_file(sidecar));
      if (j.contains("content_sha256") &&
          j["content_sha256"].get<std::string>() != sha256_hex(*content)) {
        return false;
      }
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

double coverage_fraction(const std::string& content, const std::vector<int>& required) {
  const auto atoms = parse_structure(content);
  std::set<int> present;
  for (const auto& atom : atoms) {
    if (atom.name == "CA") present.insert(atom.residue_index);
  }
  int hit = 0;
  for (int position : required) {
    if (present.count(position)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(required.size());
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

StructureSource StructureSource::experimental(std::string id, int assembly) {
  StructureSource s;
  s.kind = Kind::experimental;
  s.id = std::move(id);
  s.assembly = assembly;
  return s;
}

StructureSource StructureSource::predicted(std::string id) {
  StructureSource s;
  s.kind = Kind::predicted;
  s.id = std::move(id);
  return s;
}

StructureSource StructureSource::local(std::string path) {
  StructureSource s;
  s.kind = Kind::local;
  s.id = std::move(path);
  return s;
}

const char* structure_kind_name(StructureSource::Kind kind) {
  switch (kind) {
    case StructureSource::Kind::experimental:
      return "experimental";
    case StructureSource::Kind::predicted:
      return "predicted";
    case StructureSource::Kind::local:
      return "local";
  }
  return "local";
}

std::string cache_file_path(const StructureSource& source, const FetchConfig& config) {
  if (source.kind == StructureSource::Kind::local) return source.id;
  const std::string file_name = source.kind == StructureSource::Kind::experimental
                                    ? source.id + ".pdb" + std::to_string(source.assembly)
                                    : source.id + ".pdb";
  return (fs::path(config.cache_dir) / structure_kind_name(source.kind) / file_name).string();
}

StructureSource fetch_structure(const StructureSource& source, const FetchConfig& config,
                                const std::vector<int>& required_positions,
                                const StructureSource* fallback) {
  StructureSource resolved = source;

  if (source.kind == StructureSource::Kind::local) {
    const std::string content = read_file(source.id);
    if (!parses_as_structure(content)) {
      throw CorruptDownloadError("local structure " + source.id + " does not parse");
    }
    resolved.resolved_path = source.id;
    return resolved;
  }

  const bool experimental = source.kind == StructureSource::Kind::experimental;
  const std::string file = cache_file_path(source, config);
  const std::string file_name = fs::path(file).filename().string();
  fs::create_directories(fs::path(file).parent_path());
  const std::string sidecar = file + ".json";

  FetchLock lock(file + ".lock");

  std::string content;
  if (!cached_copy_valid(file, sidecar, &content)) {
    const std::string path = "/" + file_name;
    const std::string& endpoint =
        experimental ? config.experimental_endpoint : config.predicted_endpoint;
    content = download(endpoint, path, config.attempts, config.backoff_ms);
    if (!parses_as_structure(content)) {
      throw CorruptDownloadError("downloaded " + endpoint + path + " does not parse");
    }
    write_file_atomic(file, content);
    write_sidecar(sidecar, source, endpoint + path, content);
  }
  resolved.resolved_path = file;

  if (experimental && !required_positions.empty()) {
    const double coverage = coverage_fraction(content, required_positions);
    if (coverage < config.coverage_threshold) {
      char line[160];
      std::snprintf(line, sizeof(line), "%.1f%% of %zu required positions", coverage * 100.0,
                    required_positions.size());
      if (fallback != nullptr) {
        std::fprintf(stderr, "structure %s covers %s; using the %s fallback %s\n",
                     source.id.c_str(), line, structure_kind_name(fallback->kind),
                     fallback->id.c_str());
        return fetch_structure(*fallback, config, {}, nullptr);
      }
      throw CoverageError("structure " + source.id + " covers only " + line +
                          " and no fallback is configured");
    }
  }
  return resolved;
}

ResLoadReport load_res_dataset(const std::string& directory, double cutoff) {
  const std::string csv = read_file((fs::path(directory) / "targets.csv").string());
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("targets.csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "structure_file,chain,residue_index,label") {
    throw ParseError("targets.csv must start with 'structure_file,chain,residue_index,label'",
                     1);
  }

  ResLoadReport report;
  std::map<std::string, std::vector<Atom>> atom_cache;
  std::map<std::pair<std::string, char>, AtomicGraph> graph_cache;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto row_error = [&](const std::string& message) {
      report.row_errors.push_back("row " + std::to_string(line_no) + ": " + message);
    };

    const auto fields = split_csv_row(line);
    if (fields.size() != 4) {
      row_error("expected 4 fields, got " + std::to_string(fields.size()));
      continue;
    }
    const std::string& file = fields[0];
    if (fields[1].size() != 1) {
      row_error("chain must be a single character, got '" + fields[1] + "'");
      continue;
    }
    const char chain = fields[1][0];
    int residue = 0;
    try {
      std::size_t used = 0;
      residue = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument(fields[2]);
    } catch (const std::exception&) {
      row_error("bad residue index '" + fields[2] + "'");
      continue;
    }
    if (fields[3].size() != 1 || !AminoAcid::from_code(fields[3][0])) {
      row_error("bad label '" + fields[3] + "'");
      continue;
    }
    const AminoAcid label = AminoAcid::from_code(fields[3][0]).value();

    try {
      if (!atom_cache.count(file)) {
        atom_cache[file] =
            parse_structure(read_file((fs::path(directory) / file).string()));
      }
      const auto graph_key = std::make_pair(file, chain);
      if (!graph_cache.count(graph_key)) {
        std::vector<Atom> chain_atoms;
        for (const auto& atom : atom_cache[file]) {
          if (atom.chain_id == chain) chain_atoms.push_back(atom);
        }
        if (chain_atoms.empty()) {
          row_error("structure " + file + " has no chain " + std::string(1, chain));
          continue;
        }
        graph_cache[graph_key] = build_atomic_graph(std::move(chain_atoms), cutoff);
      }
      MaskedGraph masked = mask_residue(graph_cache[graph_key], residue);
      if (!(masked.true_label == label)) {
        row_error("label " + std::string(1, label.code()) + " disagrees with residue type " +
                  std::string(1, masked.true_label.code()) + " at " + file + " " +
                  std::string(1, chain) + std::to_string(residue));
        continue;
      }
      report.dataset.push_back(std::move(masked));
    } catch (const Error& e) {
      row_error(std::string(e.what()) + " (" + file + ")");
    }
  }
  return report;
}

void write_res_dataset(const std::vector<MaskedGraph>& dataset, const std::string& directory) {
  fs::create_directories(directory);
  std::string csv = "structure_file,chain,residue_index,label\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu.pdb", i);
    const auto& sample = dataset[i];
    write_file_atomic((fs::path(directory) / name).string(), to_pdb(sample.graph.atoms));
    const char chain =
        sample.graph.atoms[static_cast<std::size_t>(sample.target_atom)].chain_id;
    csv += std::string(name) + "," + std::string(1, chain) + "," +
           std::to_string(sample.target_residue) + "," +
           std::string(1, sample.true_label.code()) + "\n";
  }
  write_file_atomic((fs::path(directory) / "targets.csv").string(), csv);
}

}  // namespace varscore
