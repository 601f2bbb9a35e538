#include <algorithm>
#include <random>

#include "varscore/errors.hpp"
#include "varscore/scorer.hpp"

namespace varscore {

void FeatureSpec::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(node_scalar_dim, "node_scalar_dim");
  positive(node_vector_dim, "node_vector_dim");
  positive(edge_scalar_dim, "edge_scalar_dim");
  positive(edge_vector_dim, "edge_vector_dim");
  positive(hidden_out_dim, "hidden_out_dim");
  positive(num_layers, "num_layers");
  if (!(cutoff > 0.0)) throw ConfigError("cutoff must be positive");
  if (node_scalar_dim < kRawNodeChannels) {
    throw ConfigError("node_scalar_dim must hold the " +
                      std::to_string(kRawNodeChannels) + " raw input channels");
  }
}

void TrainConfig::validate() const {
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be non-negative");
  if (scheduler_patience <= 0) throw ConfigError("scheduler_patience must be positive");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ConfigError("decay_rate must be in (0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
}

namespace {

// Vector hidden width of a unit mapping vi -> vo vector channels.
int hidden_vec(int vi, int vo) { return std::max(vi, vo); }

void add_unit(std::vector<TensorInfo>& infos, std::int64_t& offset, const std::string& prefix,
              int si, int vi, int so, int vo) {
  const int vh = hidden_vec(vi, vo);
  auto push = [&](const char* name, int rows, int cols) {
    infos.push_back({prefix + name, rows, cols, offset});
    offset += static_cast<std::int64_t>(rows) * cols;
  };
  push(".Wh", vh, vi);
  push(".Ws", so, si + vh);
  push(".bs", so, 1);
  push(".Wv", vo, vh);
  push(".Wg", vo, so);
  push(".bg", vo, 1);
}

}  // namespace

ScorerParams::ScorerParams(FeatureSpec spec) : spec_(spec) {
  spec_.validate();
  const int n = spec_.node_scalar_dim;
  const int nu = spec_.node_vector_dim;
  const int m = spec_.edge_scalar_dim;
  const int eta = spec_.edge_vector_dim;
  const int o = spec_.hidden_out_dim;

  std::int64_t offset = 0;
  for (int k = 0; k < spec_.num_layers; ++k) {
    const std::string layer = "layer" + std::to_string(k);
    add_unit(infos_, offset, layer + ".msg", n + m, nu + eta, n, nu);
    add_unit(infos_, offset, layer + ".ff", n, nu, n, nu);
  }
  auto push = [&](const char* name, int rows, int cols) {
    infos_.push_back({name, rows, cols, offset});
    offset += static_cast<std::int64_t>(rows) * cols;
  };
  push("out.W", o, n);
  push("out.b", o, 1);
  push("head.W1", o, o);
  push("head.b1", o, 1);
  push("head.W2", AminoAcid::kCount, o);
  push("head.b2", AminoAcid::kCount, 1);

  data_ = Eigen::VectorXd::Zero(offset);
}

ScorerParams ScorerParams::random(FeatureSpec spec, std::uint64_t seed) {
  ScorerParams p(spec);
  std::mt19937_64 rng(seed);
  for (const auto& info : p.infos_) {
    if (info.cols == 1 && info.name.find(".b") != std::string::npos) continue;  // biases stay zero
    const double bound = std::sqrt(6.0 / info.cols);  // fan-in of x * W^T
    std::uniform_real_distribution<double> dist(-bound, bound);
    double* ptr = p.data_.data() + info.offset;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(info.rows) * info.cols; ++i) {
      ptr[i] = dist(rng);
    }
  }
  return p;
}

const TensorInfo& ScorerParams::info(std::string_view name) const {
  for (const auto& t : infos_) {
    if (t.name == name) return t;
  }
  throw ConfigError("unknown parameter tensor '" + std::string(name) + "'");
}

Eigen::Map<Eigen::MatrixXd> ScorerParams::tensor(std::string_view name) {
  const auto& t = info(name);
  return {data_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const Eigen::MatrixXd> ScorerParams::tensor(std::string_view name) const {
  const auto& t = info(name);
  return {data_.data() + t.offset, t.rows, t.cols};
}

}  // namespace varscore
