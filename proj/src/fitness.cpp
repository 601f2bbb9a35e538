#include "varscore/fitness.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "varscore/errors.hpp"
#include "varscore/metrics.hpp"
#include "varscore/parallel.hpp"
#include "varscore/rng.hpp"

namespace varscore {

namespace {

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double spearman_or_nan(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  try {
    return spearman(xs, ys);
  } catch (const UndefinedCorrelationError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

Embedding Embedding::one_hot() {
  Embedding e;
  e.kind = EmbeddingKind::one_hot;
  e.table = Eigen::MatrixXd::Identity(20, 20);
  return e;
}

Embedding Embedding::aa_index(const Eigen::MatrixXd& reduced) {
  if (reduced.rows() != 20 || reduced.cols() != 19) {
    throw DimensionalityError("reduced index table must be 20x19, got " +
                              std::to_string(reduced.rows()) + "x" +
                              std::to_string(reduced.cols()));
  }
  if (!reduced.allFinite()) throw DimensionalityError("reduced index table has non-finite entries");
  Embedding e;
  e.kind = EmbeddingKind::aa_index;
  e.table = reduced;
  return e;
}

Eigen::MatrixXd reduce_aaindex(const Eigen::MatrixXd& raw_table) {
  const Eigen::Index rows = raw_table.rows();
  const Eigen::Index cols = raw_table.cols();
  if (rows != 20) {
    throw DimensionalityError("index table needs one row per amino acid, got " +
                              std::to_string(rows));
  }
  if (cols < 19) {
    throw DimensionalityError("index table needs at least 19 columns, got " +
                              std::to_string(cols));
  }

  // Impute missing entries (NaN) by column mean, then z-score each column.
  Eigen::MatrixXd z = raw_table;
  for (Eigen::Index c = 0; c < cols; ++c) {
    double sum = 0.0;
    Eigen::Index present = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (std::isfinite(z(r, c))) {
        sum += z(r, c);
        ++present;
      }
    }
    if (present == 0) {
      throw DimensionalityError("index column " + std::to_string(c) + " is entirely missing");
    }
    const double mean_present = sum / static_cast<double>(present);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!std::isfinite(z(r, c))) z(r, c) = mean_present;
    }
    const double mean = z.col(c).mean();
    z.col(c).array() -= mean;
    const double sd = std::sqrt(z.col(c).squaredNorm() / static_cast<double>(rows));
    if (sd == 0.0) {
      throw DimensionalityError("index column " + std::to_string(c) + " is constant");
    }
    z.col(c) /= sd;
  }

  // Centered rows make the Gram matrix rank-deficient by one, so the top 19
  // components carry all the variance; its eigendecomposition gives the
  // projected coordinates directly as U * sqrt(eigenvalue).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(z * z.transpose());
  if (eig.info() != Eigen::Success) throw DimensionalityError("eigendecomposition failed");
  Eigen::MatrixXd scores(rows, 19);
  for (int k = 0; k < 19; ++k) {
    const Eigen::Index source = rows - 1 - k;  // eigenvalues are ascending
    const double value = std::max(eig.eigenvalues()[source], 0.0);
    scores.col(k) = eig.eigenvectors().col(source) * std::sqrt(value);
    // Deterministic sign: largest-magnitude coordinate positive.
    Eigen::Index arg = 0;
    scores.col(k).cwiseAbs().maxCoeff(&arg);
    if (scores(arg, k) < 0.0) scores.col(k) = -scores.col(k);
  }
  return scores;
}

Eigen::MatrixXd parse_aaindex_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::map<int, std::vector<double>> rows;
  Eigen::Index cols = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("aa,", 0) == 0) continue;  // optional header
    std::istringstream fields(line);
    std::string aa_field;
    if (!std::getline(fields, aa_field, ',') || aa_field.size() != 1) {
      throw ParseError("expected a single-letter amino-acid field", line_no);
    }
    const auto aa = AminoAcid::from_code(aa_field[0]);
    if (!aa) throw ParseError("unknown amino acid '" + aa_field + "'", line_no);
    if (rows.count(aa->index())) {
      throw ValidationError("duplicate row for amino acid " + aa_field);
    }
    std::vector<double> values;
    std::string field;
    while (std::getline(fields, field, ',')) {
      if (field.empty() || field == "NA" || field == "na") {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("bad numeric field '" + field + "'", line_no);
      }
    }
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(values.size());
    } else if (cols != static_cast<Eigen::Index>(values.size())) {
      throw ParseError("row has " + std::to_string(values.size()) + " values, expected " +
                           std::to_string(cols),
                       line_no);
    }
    rows[aa->index()] = std::move(values);
  }
  if (rows.size() != 20) {
    throw ValidationError("index table has rows for " + std::to_string(rows.size()) +
                          " amino acids, need all 20");
  }
  Eigen::MatrixXd table(20, cols);
  for (const auto& [index, values] : rows) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      table(index, c) = values[static_cast<std::size_t>(c)];
    }
  }
  return table;
}

Eigen::VectorXd embed(const std::vector<AminoAcid>& sequence, int position, AminoAcid mutant,
                      const Embedding& embedding, double score) {
  const int n = static_cast<int>(sequence.size());
  if (n == 0) throw ValidationError("cannot embed an empty sequence");
  if (position < 1 || position > n) {
    throw ValidationError("position " + std::to_string(position) + " outside sequence of length " +
                          std::to_string(n));
  }
  const int dim = embedding.dim();
  Eigen::VectorXd feature(static_cast<Eigen::Index>(dim) * n + 1);
  for (int p = 0; p < n; ++p) {
    AminoAcid aa = sequence[static_cast<std::size_t>(p)];
    if (p == position - 1) {
      if (aa == mutant) {
        throw ValidationError("mutation at position " + std::to_string(position) +
                              " does not change the residue");
      }
      aa = mutant;
    }
    feature.segment(static_cast<Eigen::Index>(p) * dim, dim) = embedding.table.row(aa.index());
  }
  feature[feature.size() - 1] = score;
  return feature;
}

Eigen::VectorXd embed(const std::string& sequence, int position, AminoAcid mutant,
                      const Embedding& embedding, double score) {
  std::vector<AminoAcid> parsed;
  parsed.reserve(sequence.size());
  for (std::size_t p = 0; p < sequence.size(); ++p) {
    const auto aa = AminoAcid::from_code(sequence[p]);
    if (!aa) {
      throw ValidationError(std::string("invalid residue '") + sequence[p] + "' at position " +
                            std::to_string(p + 1));
    }
    parsed.push_back(*aa);
  }
  return embed(parsed, position, mutant, embedding, score);
}

RidgeModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                     double lambda) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n < 1) throw ValidationError("ridge fit needs at least one sample");
  if (targets.size() != n) {
    throw ValidationError("have " + std::to_string(n) + " samples but " +
                          std::to_string(targets.size()) + " targets");
  }
  if (lambda < 0.0) throw ValidationError("regularization strength must be non-negative");

  // The intercept stays unpenalized by centering both sides.
  const Eigen::RowVectorXd x_mean = features.colwise().mean();
  const Eigen::MatrixXd xc = features.rowwise() - x_mean;
  const double y_mean = targets.mean();
  const Eigen::VectorXd yc = targets.array() - y_mean;
  const Eigen::VectorXd rhs = xc.transpose() * yc;

  Eigen::VectorXd w;
  if (d > n && lambda > 0.0) {
    // Dual form: w = Xc' (Xc Xc' + lambda I)^-1 yc, identical to the primal
    // solution but sized by the sample count.
    Eigen::MatrixXd gram = xc * xc.transpose();
    gram.diagonal().array() += lambda;
    w = xc.transpose() * gram.ldlt().solve(yc);
  } else {
    if (lambda == 0.0) {
      // A consistent singular system can slip through LDLT; reject it here.
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
      if (qr.rank() < d) {
        throw SingularSystemError(
            "design is rank-deficient at regularization strength 0; use a positive strength");
      }
    }
    Eigen::MatrixXd normal = xc.transpose() * xc;
    normal.diagonal().array() += lambda;
    w = normal.ldlt().solve(rhs);
  }

  // Stationarity certificate for every returned model.
  const double residual = (xc.transpose() * (xc * w) + lambda * w - rhs).norm();
  const double scale = rhs.norm();
  if (!w.allFinite() || residual > 1e-8 * scale + 1e-12) {
    if (lambda == 0.0) {
      throw SingularSystemError(
          "normal equations are singular at regularization strength 0; use a positive strength");
    }
    throw SingularSystemError("normal-equation solve failed (residual " +
                              std::to_string(residual) + ")");
  }

  RidgeModel model;
  model.weights = std::move(w);
  model.intercept = y_mean - x_mean.dot(model.weights);
  model.lambda = lambda;
  return model;
}

RidgeModel ridge_fit(const std::vector<Eigen::VectorXd>& features,
                     const std::vector<double>& targets, double lambda) {
  if (features.empty()) throw ValidationError("ridge fit needs at least one sample");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), features.front().size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != x.cols()) {
      throw ValidationError("feature " + std::to_string(i) + " has length " +
                            std::to_string(features[i].size()) + ", expected " +
                            std::to_string(x.cols()));
    }
    x.row(static_cast<Eigen::Index>(i)) = features[i];
  }
  Eigen::VectorXd y(x.rows());
  for (std::size_t i = 0; i < targets.size(); ++i) y[static_cast<Eigen::Index>(i)] = targets[i];
  if (static_cast<std::size_t>(x.rows()) != targets.size()) {
    throw ValidationError("have " + std::to_string(x.rows()) + " samples but " +
                          std::to_string(targets.size()) + " targets");
  }
  return ridge_fit(x, y, lambda);
}

LearningCurveResult learning_curve(const DmsAssay& assay, const ScoreMatrix& matrix,
                                   const Embedding& embedding,
                                   const LearningCurveConfig& config) {
  if (assay.sequence.empty()) {
    throw ValidationError("assay " + assay.id + " must declare its sequence");
  }
  if (assay.records.empty()) throw ValidationError("assay " + assay.id + " has no mutations");
  if (config.repeats < 1) throw ValidationError("need at least one repeat");
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw ValidationError("test fraction must lie in (0, 1)");
  }
  if (config.sizes.empty()) throw ValidationError("no training sizes given");

  const int total = static_cast<int>(assay.records.size());
  const int test_count = std::max(1, static_cast<int>(std::lround(total * config.test_fraction)));
  const int pool = total - test_count;
  if (pool < 1) {
    throw ValidationError("assay " + assay.id + " leaves no training rows after holdout");
  }
  for (int size : config.sizes) {
    if (size < 1) throw ValidationError("training size must be positive");
    if (size > pool) {
      throw ValidationError("size " + std::to_string(size) + " exceeds the " +
                            std::to_string(pool) + " training rows available in assay " +
                            assay.id);
    }
  }

  // Features are shared across repeats; the baseline variant re-uses the
  // augmented vector with the trailing score slot zeroed.
  std::vector<Eigen::VectorXd> augmented(assay.records.size());
  Eigen::VectorXd fitness(total);
  for (std::size_t i = 0; i < assay.records.size(); ++i) {
    const auto& rec = assay.records[i];
    const int row = matrix.row_of(rec.position);
    if (row < 0) {
      throw ValidationError("assay " + assay.id + " position " + std::to_string(rec.position) +
                            " has no score row");
    }
    const double score = matrix.scores(row, rec.mutant.index());
    augmented[i] = embed(assay.sequence, rec.position, rec.mutant, embedding, score);
    fitness[static_cast<Eigen::Index>(i)] = rec.fitness;
  }

  static const char* kMetricNames[4] = {"spearman_all", "spearman_better_wt", "top10_precision",
                                        "top10_recall"};
  static const char* kModelNames[2] = {"augmented", "baseline"};
  const std::size_t cells_per_repeat = config.sizes.size() * 2 * 4;
  std::vector<double> values(static_cast<std::size_t>(config.repeats) * cells_per_repeat);

  parallel_for(
      config.repeats,
      [&](std::int64_t repeat) {
        std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(repeat)));
        std::vector<int> perm(static_cast<std::size_t>(total));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const std::vector<int> test(perm.begin() + pool, perm.end());

        int better_in_test = 0;
        for (int idx : test) {
          if (fitness[idx] > assay.wt_reference) ++better_in_test;
        }

        double* out = values.data() + static_cast<std::size_t>(repeat) * cells_per_repeat;
        for (std::size_t size_index = 0; size_index < config.sizes.size(); ++size_index) {
          const int size = config.sizes[size_index];
          for (int model_index = 0; model_index < 2; ++model_index) {
            const bool baseline = model_index == 1;
            Eigen::MatrixXd x(size, augmented.front().size());
            Eigen::VectorXd y(size);
            for (int i = 0; i < size; ++i) {
              const int idx = perm[static_cast<std::size_t>(i)];
              x.row(i) = augmented[static_cast<std::size_t>(idx)];
              y[i] = fitness[idx];
            }
            if (baseline) x.col(x.cols() - 1).setZero();
            const RidgeModel model = ridge_fit(x, y, config.lambda);

            std::vector<double> predicted(test.size()), actual(test.size());
            for (std::size_t t = 0; t < test.size(); ++t) {
              Eigen::VectorXd feature = augmented[static_cast<std::size_t>(test[t])];
              if (baseline) feature[feature.size() - 1] = 0.0;
              predicted[t] = model.predict(feature);
              actual[t] = fitness[test[t]];
            }

            std::vector<double> pred_better, actual_better;
            for (std::size_t t = 0; t < test.size(); ++t) {
              if (actual[t] > assay.wt_reference) {
                pred_better.push_back(predicted[t]);
                actual_better.push_back(actual[t]);
              }
            }

            std::vector<std::size_t> order(test.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
              return predicted[a] > predicted[b];
            });
            const std::size_t window = std::min<std::size_t>(10, order.size());
            int hits = 0;
            for (std::size_t t = 0; t < window; ++t) {
              if (actual[order[t]] > assay.wt_reference) ++hits;
            }

            double* cell = out + (size_index * 2 + static_cast<std::size_t>(model_index)) * 4;
            cell[0] = spearman_or_nan(predicted, actual);
            cell[1] = spearman_or_nan(pred_better, actual_better);
            cell[2] = static_cast<double>(hits) / static_cast<double>(window);
            cell[3] = better_in_test > 0 ? static_cast<double>(hits) / better_in_test : 0.0;
          }
        }
      },
      config.parallel);

  LearningCurveResult result;
  for (int repeat = 0; repeat < config.repeats; ++repeat) {
    const double* out = values.data() + static_cast<std::size_t>(repeat) * cells_per_repeat;
    for (std::size_t size_index = 0; size_index < config.sizes.size(); ++size_index) {
      for (int model_index = 0; model_index < 2; ++model_index) {
        for (int metric = 0; metric < 4; ++metric) {
          CurvePoint point;
          point.size = config.sizes[size_index];
          point.repeat = repeat;
          point.metric = std::string(kModelNames[model_index]) + "." + kMetricNames[metric];
          point.value = out[(size_index * 2 + static_cast<std::size_t>(model_index)) * 4 +
                            static_cast<std::size_t>(metric)];
          result.points.push_back(std::move(point));
        }
      }
    }
  }

  // Aggregate over repeats, skipping undefined (NaN) cells.
  std::vector<int> sorted_sizes = config.sizes;
  std::sort(sorted_sizes.begin(), sorted_sizes.end());
  sorted_sizes.erase(std::unique(sorted_sizes.begin(), sorted_sizes.end()), sorted_sizes.end());
  std::set<std::string> metric_names;
  for (const auto& p : result.points) metric_names.insert(p.metric);
  for (int size : sorted_sizes) {
    for (const auto& name : metric_names) {
      std::vector<double> cell_values;
      for (const auto& p : result.points) {
        if (p.size == size && p.metric == name && std::isfinite(p.value)) {
          cell_values.push_back(p.value);
        }
      }
      CurveAggregate agg;
      agg.size = size;
      agg.metric = name;
      if (cell_values.empty()) {
        agg.mean = std::numeric_limits<double>::quiet_NaN();
        agg.stddev = 0.0;
      } else {
        agg.mean = std::accumulate(cell_values.begin(), cell_values.end(), 0.0) /
                   static_cast<double>(cell_values.size());
        double ss = 0.0;
        for (double v : cell_values) ss += (v - agg.mean) * (v - agg.mean);
        agg.stddev = cell_values.size() > 1
                         ? std::sqrt(ss / static_cast<double>(cell_values.size() - 1))
                         : 0.0;
      }
      result.aggregates.push_back(std::move(agg));
    }
  }
  return result;
}

std::string learning_curve_to_csv(const std::vector<CurvePoint>& points) {
  std::string out = "size,repeat,metric,value\n";
  for (const auto& p : points) {
    out += std::to_string(p.size) + "," + std::to_string(p.repeat) + "," + p.metric + "," +
           format_value(p.value) + "\n";
  }
  return out;
}

std::string curve_aggregates_to_csv(const std::vector<CurveAggregate>& aggregates) {
  std::string out = "size,metric,mean,std\n";
  for (const auto& a : aggregates) {
    out += std::to_string(a.size) + "," + a.metric + "," + format_value(a.mean) + "," +
           format_value(a.stddev) + "\n";
  }
  return out;
}

}  // namespace varscore
