#pragma once

#include <string>
#include <vector>

#include "varscore/dms.hpp"
#include "varscore/scorer.hpp"

namespace varscore {

struct EnvironmentMode {
  bool local = false;
  double radius = 0.0;

  static EnvironmentMode full() { return {}; }
  static EnvironmentMode local_within(double radius) { return {true, radius}; }
  std::string str() const;
};

// Per-position identity scores S(i, a): one row per residue with a mapped
// alpha carbon, columns in amino-acid index order.
struct ScoreMatrix {
  std::vector<int> positions;       // residue indices, ascending
  std::vector<AminoAcid> wildtype;  // x_i per row
  Eigen::MatrixXd scores;           // n x 20

  // Provenance, filled by the caller that knows the artifact identities.
  std::string checkpoint_id;
  std::string structure_id;
  std::string environment_mode;

  // Recomputed, never stored: argmax of the row equals the wildtype.
  bool correct(int row) const;
  int row_of(int position) const;  // -1 when the position has no row
};

// One candidate single-point mutation (i, a), a != x_i.
struct CandidateMutation {
  int position = 0;
  AminoAcid wildtype = AminoAcid::from_index(0);
  AminoAcid mutant = AminoAcid::from_index(0);
  double score = 0.0;       // S(i, a)
  double self_score = 0.0;  // S(i, x_i)
};

struct RankedMutation {
  int rank = 0;  // 1-based, gap-free
  int position = 0;
  AminoAcid wildtype = AminoAcid::from_index(0);
  AminoAcid mutant = AminoAcid::from_index(0);
  double score = 0.0;
  double self_score = 0.0;
};

// Masks every residue in turn and collects the 20 scores. mode=local first
// restricts the structure to the environment around the position. Positions
// may be scored in parallel; the result is order-independent.
ScoreMatrix score_structure(const ScorerParams& params, const AtomicGraph& graph,
                            EnvironmentMode mode = {}, bool parallel = true);

// Intersects the score matrix with the assay's measured single-point
// mutations; with filter_wrong, positions whose argmax misses the wildtype
// are dropped entirely. Throws AlignmentError when the assay and structure
// disagree on any shared wildtype, listing the offending positions.
std::vector<CandidateMutation> generate_mutations(const ScoreMatrix& matrix,
                                                  const DmsAssay& assay,
                                                  bool filter_wrong = true);

// Score descending; ties by position then amino-acid index ascending.
std::vector<RankedMutation> rank_global(const std::vector<CandidateMutation>& candidates);

// Positions by wildtype self-score ascending (epsilon-clustered; 0 = exact
// equality), then mutation score descending, keeping the top 3 per position.
std::vector<RankedMutation> rank_positional(const std::vector<CandidateMutation>& candidates,
                                            double epsilon = 0.0);

std::string score_matrix_to_csv(const ScoreMatrix& matrix);
ScoreMatrix score_matrix_from_csv(std::string_view csv);

std::string ranked_to_tsv(const std::vector<RankedMutation>& ranking);
std::vector<RankedMutation> ranked_from_tsv(std::string_view tsv);

}  // namespace varscore
