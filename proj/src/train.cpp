#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "varscore/errors.hpp"
#include "varscore/parallel.hpp"
#include "varscore/rng.hpp"
#include "varscore/scorer.hpp"

namespace varscore {

namespace {

double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index g = 0; g < logits.rows(); ++g) {
    Eigen::RowVectorXd row = logits.row(g);
    const double mx = row.maxCoeff();
    total += std::log((row.array() - mx).exp().sum()) + mx - row[labels[static_cast<std::size_t>(g)]];
  }
  return total;
}

// Forward-only mean loss, chunked so memory stays bounded.
double evaluate_loss(const ScorerParams& params, const std::vector<MaskedGraph>& dataset) {
  constexpr std::size_t kChunk = 256;
  double total = 0.0;
  for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
    const std::size_t stop = std::min(dataset.size(), start + kChunk);
    std::vector<const MaskedGraph*> chunk;
    chunk.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) chunk.push_back(&dataset[i]);
    BatchedGraphs in = featurize_batch(chunk, params.spec());
    total += cross_entropy(forward_batch(params, in), in.label);
  }
  return total / static_cast<double>(dataset.size());
}

}  // namespace

double evaluate_accuracy(const ScorerParams& params, const std::vector<MaskedGraph>& dataset,
                         bool parallel) {
  if (dataset.empty()) throw ValidationError("cannot evaluate accuracy on an empty dataset");
  std::vector<char> correct(dataset.size(), 0);
  parallel_for(
      static_cast<std::int64_t>(dataset.size()),
      [&](std::int64_t i) {
        ScoreVector v = forward(params, dataset[static_cast<std::size_t>(i)]);
        correct[static_cast<std::size_t>(i)] =
            v.argmax() == dataset[static_cast<std::size_t>(i)].true_label.index() ? 1 : 0;
      },
      parallel);
  std::int64_t hits = 0;
  for (char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

TrainResult train_res(const std::vector<MaskedGraph>& train, const std::vector<MaskedGraph>& val,
                      const TrainConfig& config, const FeatureSpec& spec) {
  config.validate();
  spec.validate();
  if (train.empty()) throw ValidationError("training set is empty");
  if (val.empty()) throw ValidationError("validation set is empty");

  ScorerParams params = ScorerParams::random(spec, config.seed);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  std::int64_t step = 0;

  double lr = config.learning_rate;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_flat = params.flat();
  int best_epoch = -1;
  int stagnant = 0;

  TrainResult result{params, {}, -1, 0.0};

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(train.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const MaskedGraph*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&train[order[i]]);

      DropoutSpec drop{config.dropout,
                       mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)),
                           static_cast<std::uint64_t>(step))};
      const double loss = loss_and_grad(params, batch, grad, drop);
      loss_sum += loss * static_cast<double>(stop - start);
      seen += stop - start;

      ++step;
      if (config.plain_sgd) {
        params.flat() -= lr * grad;
      } else {
        m = kBeta1 * m + (1.0 - kBeta1) * grad;
        v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        params.flat() -=
            (lr / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + kAdamEps).matrix());
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = lr;
    stats.train_loss = loss_sum / static_cast<double>(seen);
    stats.val_loss = evaluate_loss(params, val);
    stats.val_accuracy = evaluate_accuracy(params, val);
    result.history.push_back(stats);

    if (stats.val_loss < best_val - 1e-12) {
      best_val = stats.val_loss;
      best_flat = params.flat();
      best_epoch = epoch;
      stagnant = 0;
    } else if (++stagnant >= config.scheduler_patience) {
      lr *= config.decay_rate;
      stagnant = 0;
    }
  }

  result.params.flat() = best_flat;
  result.best_epoch = best_epoch;
  result.best_val_loss = best_epoch < 0 ? std::numeric_limits<double>::quiet_NaN() : best_val;
  return result;
}

}  // namespace varscore
