#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "varscore/dms.hpp"
#include "varscore/variants.hpp"

namespace varscore {

enum class EmbeddingKind { one_hot, aa_index };

// Per-amino-acid embedding rows, indexed by AminoAcid order: the 20x20
// identity for one-hot, or a 20x19 reduced index table.
struct Embedding {
  EmbeddingKind kind = EmbeddingKind::one_hot;
  Eigen::MatrixXd table;

  static Embedding one_hot();
  // Validates the 20x19 shape and finiteness.
  static Embedding aa_index(const Eigen::MatrixXd& reduced);
  int dim() const { return static_cast<int>(table.cols()); }
};

// Z-scores the columns (imputing missing entries, encoded as NaN, by column
// mean first) and projects the 20 amino acids onto the top 19 principal
// components, largest variance first, each component's largest-magnitude
// coordinate made positive. Throws DimensionalityError for fewer than 19
// columns or a constant column.
Eigen::MatrixXd reduce_aaindex(const Eigen::MatrixXd& raw_table);

// `aa,<value...>` rows, one per amino acid; empty or NA fields become NaN for
// later imputation. Column count must match across rows.
Eigen::MatrixXd parse_aaindex_csv(const std::string& text);

// Flattened embedding of the sequence with position (1-based) mutated to
// `mutant`, with the model score appended as the final entry. Length is
// dim * |sequence| + 1. The string overload validates its letters.
Eigen::VectorXd embed(const std::vector<AminoAcid>& sequence, int position, AminoAcid mutant,
                      const Embedding& embedding, double score);
Eigen::VectorXd embed(const std::string& sequence, int position, AminoAcid mutant,
                      const Embedding& embedding, double score);

struct RidgeModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double lambda = 0.0;

  double predict(const Eigen::VectorXd& feature) const {
    return weights.dot(feature) + intercept;
  }
};

// Minimizes squared error + lambda * ||w||^2 with an unpenalized intercept
// (handled by centering). Solves the primal normal equations, or the dual
// when features outnumber samples and lambda > 0. Every returned model
// satisfies the stationarity residual bound 1e-8; a lambda = 0 fit on a
// rank-deficient design fails it and throws SingularSystemError.
RidgeModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                     double lambda);
RidgeModel ridge_fit(const std::vector<Eigen::VectorXd>& features,
                     const std::vector<double>& targets, double lambda);

struct LearningCurveConfig {
  std::vector<int> sizes;
  int repeats = 20;
  double test_fraction = 0.2;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  bool parallel = true;
};

// One evaluated metric for one (size, repeat, model) cell. Metric names are
// "<model>.<metric>" with model in {augmented, baseline} and metric in
// {spearman_all, spearman_better_wt, top10_precision, top10_recall}.
// Correlations that are undefined on a cell are recorded as NaN and skipped
// by the aggregation.
struct CurvePoint {
  int size = 0;
  int repeat = 0;
  std::string metric;
  double value = 0.0;
};

struct CurveAggregate {
  int size = 0;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single repeat
};

struct LearningCurveResult {
  std::vector<CurvePoint> points;
  std::vector<CurveAggregate> aggregates;
};

// Per repeat: shuffle the assay rows with a repeat-specific seed, hold out
// test_fraction, then train augmented and baseline (score column zeroed)
// ridge models on nested prefixes of the remaining rows and evaluate on the
// held-out set. Top-10 recall uses the held-out better-than-WT count. The
// assay must declare its sequence; every assay position must have a score
// row; each size must fit in the training pool.
LearningCurveResult learning_curve(const DmsAssay& assay, const ScoreMatrix& matrix,
                                   const Embedding& embedding,
                                   const LearningCurveConfig& config);

// CSV `size,repeat,metric,value` in evaluation order.
std::string learning_curve_to_csv(const std::vector<CurvePoint>& points);
// CSV `size,metric,mean,std`, sizes ascending, metric names sorted.
std::string curve_aggregates_to_csv(const std::vector<CurveAggregate>& aggregates);

}  // namespace varscore
