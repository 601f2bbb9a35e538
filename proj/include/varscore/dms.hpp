#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "varscore/amino_acid.hpp"

namespace varscore {

enum class Taxon { human, eukaryote, prokaryote, virus, unknown };

std::string taxon_name(Taxon t);
Taxon taxon_from_name(std::string_view name);

struct DmsRecord {
  int position = 0;  // 1-based
  AminoAcid wildtype = AminoAcid::from_index(0);
  AminoAcid mutant = AminoAcid::from_index(0);
  double fitness = 0.0;

  bool operator==(const DmsRecord&) const = default;
};

// A deep mutational scan: measured fitness for single substitutions.
struct DmsAssay {
  std::string id;
  std::vector<AminoAcid> sequence;  // declared wildtype sequence; may be empty
  std::vector<DmsRecord> records;
  double wt_reference = 0.0;  // fitness of the unmutated protein
  Taxon taxon = Taxon::unknown;
  int skipped_multi = 0;  // multi-substitution rows dropped during parsing

  // Wildtype at a 1-based position: from the declared sequence when present,
  // otherwise from the measured records covering that position.
  std::optional<AminoAcid> wildtype_at(int position) const;
};

// CSV with header `mutant,DMS_score` and rows like `A24G,0.83`. Lines
// starting with '#' before the header may declare metadata:
//   # id: <name>          # sequence: <one-letter codes>
//   # wt_reference: <x>   # taxon: <human|eukaryote|prokaryote|virus|unknown>
// Rows with colon-separated multi-substitution tokens are skipped and
// counted. Throws ParseError (with line number) on malformed rows and
// ValidationError on wildtype/sequence disagreement or duplicate pairs.
DmsAssay parse_dms(std::string_view csv);

// Inverse of parse_dms up to the dropped multi-substitution rows.
std::string to_dms_csv(const DmsAssay& assay);

}  // namespace varscore
