#include "varscore/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "varscore/errors.hpp"
#include "varscore/parallel.hpp"

namespace varscore {

namespace {

// Average ranks: tied values all receive the mean of the ranks they span.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelationError("correlation undefined for constant input");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> try_spearman(const std::vector<double>& xs,
                                   const std::vector<double>& ys) {
  if (xs.size() < 2) return std::nullopt;
  try {
    return spearman(xs, ys);
  } catch (const UndefinedCorrelationError&) {
    return std::nullopt;
  }
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw UndefinedCorrelationError("input lengths differ: " + std::to_string(xs.size()) +
                                    " vs " + std::to_string(ys.size()));
  }
  if (xs.size() < 2) {
    throw UndefinedCorrelationError("need at least two points, got " +
                                    std::to_string(xs.size()));
  }
  return pearson(average_ranks(xs), average_ranks(ys));
}

EvaluationReport evaluate_ranking(const std::vector<RankedMutation>& ranked,
                                  const DmsAssay& assay, RecallDenominator denominator) {
  std::map<std::pair<int, int>, double> fitness_of;
  for (const auto& r : assay.records) {
    fitness_of[{r.position, r.mutant.index()}] = r.fitness;
  }

  EvaluationReport report;
  report.n_total = static_cast<int>(ranked.size());
  std::vector<double> scores, fits;
  std::vector<double> scores_better, fits_better, scores_worse, fits_worse;
  int ranked_better = 0;
  int top10_hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    const auto it = fitness_of.find({r.position, r.mutant.index()});
    if (it == fitness_of.end()) {
      throw ValidationError("ranked mutation " + std::string(1, r.wildtype.code()) +
                            std::to_string(r.position) + std::string(1, r.mutant.code()) +
                            " is not in the assay");
    }
    const double fitness = it->second;
    scores.push_back(r.score);
    fits.push_back(fitness);
    if (fitness > assay.wt_reference) {
      ++ranked_better;
      scores_better.push_back(r.score);
      fits_better.push_back(fitness);
      if (i < 10) ++top10_hits;
    } else if (fitness < assay.wt_reference) {
      scores_worse.push_back(r.score);
      fits_worse.push_back(fitness);
    }
  }

  for (const auto& rec : assay.records) {
    if (rec.fitness > assay.wt_reference) ++report.n_better;
    if (rec.fitness < assay.wt_reference) ++report.n_worse;
  }

  report.spearman_all = try_spearman(scores, fits);
  report.spearman_better_wt = try_spearman(scores_better, fits_better);
  report.spearman_worse_wt = try_spearman(scores_worse, fits_worse);

  if (!ranked.empty()) {
    const int window = std::min<int>(10, static_cast<int>(ranked.size()));
    report.top10_precision = static_cast<double>(top10_hits) / window;
    const int denom = denominator == RecallDenominator::assay ? report.n_better : ranked_better;
    report.top10_recall = denom > 0 ? static_cast<double>(top10_hits) / denom : 0.0;
  }
  return report;
}

ConfusionMatrix confusion_matrix(const ScorerParams& params,
                                 const std::vector<MaskedGraph>& dataset, bool parallel) {
  if (dataset.empty()) throw ValidationError("confusion matrix needs a non-empty dataset");
  std::vector<int> predicted(dataset.size());
  parallel_for(
      static_cast<std::int64_t>(dataset.size()),
      [&](std::int64_t i) {
        predicted[static_cast<std::size_t>(i)] =
            forward(params, dataset[static_cast<std::size_t>(i)]).argmax();
      },
      parallel);
  ConfusionMatrix counts = ConfusionMatrix::Zero();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    counts(dataset[i].true_label.index(), predicted[i]) += 1;
  }
  return counts;
}

double compare_to_blosum62(const ConfusionMatrix& confusion,
                           const std::array<std::array<int, 20>, 20>& blosum) {
  std::int64_t off_diagonal_mass = 0;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      if (confusion(i, j) < 0) throw ValidationError("confusion counts must be non-negative");
      if (i != j) off_diagonal_mass += confusion(i, j);
    }
  }
  if (off_diagonal_mass == 0) {
    throw UndefinedCorrelationError("confusion matrix has no off-diagonal mass");
  }
  std::vector<double> frequencies, substitution_scores;
  for (int i = 0; i < 20; ++i) {
    const double row_sum = static_cast<double>(confusion.row(i).sum());
    for (int j = 0; j < 20; ++j) {
      if (i == j) continue;
      frequencies.push_back(row_sum > 0 ? static_cast<double>(confusion(i, j)) / row_sum : 0.0);
      substitution_scores.push_back(static_cast<double>(
          blosum[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
    }
  }
  return spearman(frequencies, substitution_scores);
}

double cross_model_correlation(const std::vector<RankedMutation>& ranked_a,
                               const std::vector<RankedMutation>& ranked_b,
                               const DmsAssay& assay, CorrelationSubset subset) {
  std::map<std::pair<int, int>, double> fitness_of;
  for (const auto& r : assay.records) {
    fitness_of[{r.position, r.mutant.index()}] = r.fitness;
  }
  std::map<std::pair<int, int>, double> score_b;
  for (const auto& r : ranked_b) score_b[{r.position, r.mutant.index()}] = r.score;

  std::vector<double> xs, ys;
  for (const auto& r : ranked_a) {
    const std::pair<int, int> key{r.position, r.mutant.index()};
    const auto other = score_b.find(key);
    if (other == score_b.end()) continue;
    const auto fit = fitness_of.find(key);
    if (fit == fitness_of.end()) {
      throw ValidationError("shared mutation at position " + std::to_string(r.position) +
                            " is not in the assay");
    }
    if (subset == CorrelationSubset::better_wt && !(fit->second > assay.wt_reference)) {
      continue;
    }
    xs.push_back(r.score);
    ys.push_back(other->second);
  }
  if (xs.size() < 2) {
    throw UndefinedCorrelationError("fewer than two shared mutations (" +
                                    std::to_string(xs.size()) + ")");
  }
  return spearman(xs, ys);
}

std::string report_to_json(const EvaluationReport& report) {
  nlohmann::json j;
  auto put = [&](const char* key, const std::optional<double>& value) {
    if (value) {
      j[key] = *value;
    } else {
      j[key] = nullptr;
    }
  };
  put("spearman_all", report.spearman_all);
  put("spearman_better_wt", report.spearman_better_wt);
  put("spearman_worse_wt", report.spearman_worse_wt);
  j["top10_precision"] = report.top10_precision;
  j["top10_recall"] = report.top10_recall;
  j["n_total"] = report.n_total;
  j["n_better"] = report.n_better;
  j["n_worse"] = report.n_worse;
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad report JSON: ") + e.what());
  }
  EvaluationReport report;
  auto get = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
  };
  report.spearman_all = get("spearman_all");
  report.spearman_better_wt = get("spearman_better_wt");
  report.spearman_worse_wt = get("spearman_worse_wt");
  report.top10_precision = j.value("top10_precision", 0.0);
  report.top10_recall = j.value("top10_recall", 0.0);
  report.n_total = j.value("n_total", 0);
  report.n_better = j.value("n_better", 0);
  report.n_worse = j.value("n_worse", 0);
  return report;
}

}  // namespace varscore
