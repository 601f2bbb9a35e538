#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace varscore {

// Settings shared by the subcommands, resolved with precedence
// flags > environment > config file > these defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string cache_dir = ".varscore-cache";
  std::string checkpoint;
  std::string mode = "full";  // full | local
  double radius = 10.0;       // environment radius when mode == local, Angstrom
  std::string strategy = "global";  // global | positional
  bool filter_wrong = true;
  double lambda = 1.0;
  std::vector<int> sizes;
  int repeats = 20;
  std::string out_dir = ".";
};

// Entry point shared by the binary and the in-process tests. `args` excludes
// the program name. Returns the process exit code; never throws. Every file
// an invocation writes gets a `.prov.json` sidecar (or an embedded provenance
// block) recording the artifact version, a hash of the resolved settings, the
// seed, and the checkpoint hash when one is involved; reruns with identical
// inputs produce byte-identical outputs.
int cli_main(const std::vector<std::string>& args);

}  // namespace varscore
