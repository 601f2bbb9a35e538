#pragma once

#include <string>
#include <vector>

#include "varscore/graph.hpp"

namespace varscore {

// Where a structure comes from: an archive assembly, a predicted model, or a
// file already on disk. `resolved_path` is filled in by fetch_structure.
struct StructureSource {
  enum class Kind { experimental, predicted, local };

  Kind kind = Kind::local;
  std::string id;  // archive identifier, or the file path for local sources
  int assembly = 1;
  std::string resolved_path;

  static StructureSource experimental(std::string id, int assembly = 1);
  static StructureSource predicted(std::string id);
  static StructureSource local(std::string path);
};

const char* structure_kind_name(StructureSource::Kind kind);

struct FetchConfig {
  std::string cache_dir;
  // Base URLs; an experimental structure resolves to
  // <experimental_endpoint>/<id>.pdb<assembly>, a predicted one to
  // <predicted_endpoint>/<id>.pdb.
  std::string experimental_endpoint;
  std::string predicted_endpoint;
  double coverage_threshold = 0.95;  // fraction of required positions with a CA
  int attempts = 3;
  int backoff_ms = 250;  // doubled after each failed attempt
};

// Returns the source with resolved_path pointing at a verified local file,
// downloading into `<cache_dir>/<kind>/<file>` (sidecar JSON records the
// fetch time and content hash) unless a valid cached copy exists. Transport
// failures retry `attempts` times with exponential backoff; a persistent 404
// throws NotFoundError, other transport failures NetworkError, and a body
// that does not parse CorruptDownloadError. When `required_positions` is
// non-empty and an experimental structure covers fewer than
// coverage_threshold of them, the fetch falls back to `fallback` when given
// and throws CoverageError otherwise. Concurrent fetches of one id are
// serialized through a lock file.
StructureSource fetch_structure(const StructureSource& source, const FetchConfig& config,
                                const std::vector<int>& required_positions = {},
                                const StructureSource* fallback = nullptr);

// Where fetch_structure caches a remote source; local sources resolve to
// their own path.
std::string cache_file_path(const StructureSource& source, const FetchConfig& config);

struct ResLoadReport {
  std::vector<MaskedGraph> dataset;
  std::vector<std::string> row_errors;  // one message per skipped target row
};

// Loads `<directory>/targets.csv` (header `structure_file,chain,residue_index,label`),
// parsing each structure file once and masking each named residue. Rows that
// fail — missing file, unknown residue, or a label disagreeing with the
// structure's residue type — are reported in row_errors and skipped while the
// rest of the dataset loads.
ResLoadReport load_res_dataset(const std::string& directory, double cutoff = 4.5);

// One PDB file per sample plus targets.csv. Coordinates are stored at the
// format's milliangstrom precision, so exactly representable inputs reload
// identically.
void write_res_dataset(const std::vector<MaskedGraph>& dataset, const std::string& directory);

}  // namespace varscore
