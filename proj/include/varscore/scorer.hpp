#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "varscore/amino_acid.hpp"
#include "varscore/graph.hpp"

namespace varscore {

// Network dimensions. Defaults give the full-size scorer; tests shrink them.
struct FeatureSpec {
  int node_scalar_dim = 100;  // n
  int node_vector_dim = 16;   // nu
  int edge_scalar_dim = 32;   // m
  int edge_vector_dim = 1;    // eta
  int hidden_out_dim = 100;   // o, width of the output head
  int num_layers = 5;
  double cutoff = 4.5;  // upper end of the radial-basis support, Angstrom

  void validate() const;  // throws ConfigError on non-positive dimensions
  bool operator==(const FeatureSpec&) const = default;
};

// Raw per-node input channels before injection into the n scalar slots:
// one-hot element class {C,N,O,S,P,other} + backbone flag + target flag.
inline constexpr int kRawNodeChannels = 8;

struct TrainConfig {
  double learning_rate = 1e-4;
  int scheduler_patience = 10;  // epochs without validation improvement
  double decay_rate = 0.75;     // learning-rate multiplier on plateau
  double dropout = 0.1;
  int batch_size = 64;
  int epochs = 40;
  std::uint64_t seed = 0;
  bool plain_sgd = false;  // disable adaptive moments

  void validate() const;
};

struct ScoreVector {
  Eigen::Matrix<double, AminoAcid::kCount, 1> scores;

  // Lowest index wins ties.
  int argmax() const {
    int best = 0;
    for (int i = 1; i < AminoAcid::kCount; ++i)
      if (scores[i] > scores[best]) best = i;
    return best;
  }
};

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::int64_t offset = 0;  // into the flat parameter vector
};

// All learnable tensors in one flat vector; shapes are a deterministic
// function of FeatureSpec. Named views map into the flat storage.
class ScorerParams {
 public:
  ScorerParams() : ScorerParams(FeatureSpec{}) {}
  explicit ScorerParams(FeatureSpec spec);

  // Fan-in-scaled uniform weights, zero biases.
  static ScorerParams random(FeatureSpec spec, std::uint64_t seed);

  const FeatureSpec& spec() const { return spec_; }
  const std::vector<TensorInfo>& tensors() const { return infos_; }
  std::int64_t size() const { return data_.size(); }

  Eigen::VectorXd& flat() { return data_; }
  const Eigen::VectorXd& flat() const { return data_; }

  Eigen::Map<Eigen::MatrixXd> tensor(std::string_view name);
  Eigen::Map<const Eigen::MatrixXd> tensor(std::string_view name) const;
  const TensorInfo& info(std::string_view name) const;  // throws ConfigError if absent

 private:
  FeatureSpec spec_;
  std::vector<TensorInfo> infos_;
  Eigen::VectorXd data_;
};

// One or more masked graphs packed block-diagonally: node rows are
// concatenated, edge endpoints shifted by each graph's node offset. Vector
// quantities use three consecutive rows per node (row 3r+d = component d).
struct BatchedGraphs {
  Eigen::MatrixXd node_scalar;  // N x n, raw channels in the first slots
  Eigen::MatrixXd edge_scalar;  // E x m, radial-basis expansion of distance
  Eigen::MatrixXd edge_vector;  // 3E x eta, unit displacement src -> dst
  std::vector<int> edge_src;
  std::vector<int> edge_dst;
  std::vector<int> target;  // per graph, global node index of the masked CA
  std::vector<int> label;   // per graph, true amino-acid index
  int num_nodes = 0;
  int num_graphs = 0;
};

// Radial basis used for edge scalars: `count` Gaussians with centers evenly
// spaced on [0, cutoff] and width = spacing.
Eigen::VectorXd radial_basis(double distance, int count, double cutoff);

BatchedGraphs featurize(const MaskedGraph& masked, const FeatureSpec& spec);
BatchedGraphs featurize_batch(const std::vector<const MaskedGraph*>& batch,
                              const FeatureSpec& spec);

// rate == 0 disables dropout (inference); otherwise masks are a pure
// function of the seed, so a training step is reproducible bit-for-bit.
struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

// Intermediates retained for the backward pass; also exposes per-layer
// vector channels so equivariance can be checked from outside.
struct ForwardTrace;

// Returns logits, one row of 20 per graph in the batch.
Eigen::MatrixXd forward_batch(const ScorerParams& params, const BatchedGraphs& input,
                              const DropoutSpec& dropout = {},
                              ForwardTrace* trace = nullptr);

ScoreVector forward(const ScorerParams& params, const MaskedGraph& masked);

// Vector-channel states after each layer (3N x nu each), for tests.
std::vector<Eigen::MatrixXd> forward_vector_states(const ScorerParams& params,
                                                   const BatchedGraphs& input);

// Mean cross-entropy over the batch; grad is resized to params.size().
double loss_and_grad(const ScorerParams& params, const BatchedGraphs& input,
                     Eigen::VectorXd& grad, const DropoutSpec& dropout = {});
double loss_and_grad(const ScorerParams& params,
                     const std::vector<const MaskedGraph*>& batch, Eigen::VectorXd& grad,
                     const DropoutSpec& dropout = {});

struct EpochStats {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  ScorerParams params;  // best-validation checkpoint
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

// Adaptive-moment descent with a reduce-on-plateau schedule. The caller
// supplies the train/validation split. Deterministic per seed.
TrainResult train_res(const std::vector<MaskedGraph>& train,
                      const std::vector<MaskedGraph>& val, const TrainConfig& config,
                      const FeatureSpec& spec = {});

// Fraction of graphs whose argmax logit equals the true label.
double evaluate_accuracy(const ScorerParams& params, const std::vector<MaskedGraph>& dataset,
                         bool parallel = true);

}  // namespace varscore
