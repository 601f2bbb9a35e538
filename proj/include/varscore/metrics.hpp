#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "varscore/dms.hpp"
#include "varscore/graph.hpp"
#include "varscore/scorer.hpp"
#include "varscore/variants.hpp"

namespace varscore {

// Ranking quality against a measured assay. A correlation is absent (not
// zero) when its subset has fewer than two members or constant values.
struct EvaluationReport {
  std::optional<double> spearman_all;
  std::optional<double> spearman_better_wt;
  std::optional<double> spearman_worse_wt;
  double top10_precision = 0.0;
  double top10_recall = 0.0;
  int n_total = 0;
  int n_better = 0;  // assay mutations with fitness strictly above the WT reference
  int n_worse = 0;   // strictly below; ties at the reference count in neither
};

// Rank correlation with average ranks for ties: Pearson correlation of the
// rank-transformed inputs. Throws UndefinedCorrelationError on length
// mismatch, fewer than two points, or a constant argument.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Denominator for top-10 recall: the whole assay's better-than-WT count
// (default, model-independent) or only the better-than-WT mutations that
// reached the ranked list.
enum class RecallDenominator { assay, ranked };

// Scores the ranked list against the assay. Every ranked mutation must be
// present in the assay (candidate generation intersects with it).
EvaluationReport evaluate_ranking(const std::vector<RankedMutation>& ranked,
                                  const DmsAssay& assay,
                                  RecallDenominator denominator = RecallDenominator::assay);

using ConfusionMatrix = Eigen::Matrix<std::int64_t, 20, 20>;

// Entry (true, predicted) counts argmax predictions over the dataset, so each
// row sums to that class's dataset count and the total equals |dataset|.
ConfusionMatrix confusion_matrix(const ScorerParams& params,
                                 const std::vector<MaskedGraph>& dataset,
                                 bool parallel = true);

// Spearman between row-normalized off-diagonal confusion frequencies and the
// matching substitution scores, both flattened row-major. Rows with no counts
// contribute zero frequencies. Throws UndefinedCorrelationError when the
// confusion matrix has no off-diagonal mass.
double compare_to_blosum62(const ConfusionMatrix& confusion,
                           const std::array<std::array<int, 20>, 20>& blosum = blosum62());

enum class CorrelationSubset { all, better_wt };

// Spearman between two models' scores on the mutations both rankings share,
// optionally restricted to assay fitness strictly above the WT reference.
// Throws ValidationError when a shared mutation is missing from the assay and
// UndefinedCorrelationError when fewer than two shared mutations remain.
double cross_model_correlation(const std::vector<RankedMutation>& ranked_a,
                               const std::vector<RankedMutation>& ranked_b,
                               const DmsAssay& assay,
                               CorrelationSubset subset = CorrelationSubset::all);

// Report as a JSON object string; absent correlations serialize as null.
std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& text);

}  // namespace varscore
