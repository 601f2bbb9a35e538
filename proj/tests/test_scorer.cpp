#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "varscore/checkpoint.hpp"
#include "varscore/errors.hpp"
#include "varscore/ioutil.hpp"
#include "varscore/scorer.hpp"
#include "varscore/synthetic.hpp"

using namespace varscore;

namespace {

FeatureSpec tiny_spec() {
  FeatureSpec s;
  s.node_scalar_dim = 10;
  s.node_vector_dim = 3;
  s.edge_scalar_dim = 6;
  s.edge_vector_dim = 1;
  s.hidden_out_dim = 8;
  s.num_layers = 2;
  return s;
}

FeatureSpec small_spec() {
  FeatureSpec s;
  s.node_scalar_dim = 24;
  s.node_vector_dim = 4;
  s.edge_scalar_dim = 8;
  s.edge_vector_dim = 1;
  s.hidden_out_dim = 16;
  s.num_layers = 3;
  return s;
}

MaskedGraph random_environment(std::mt19937_64& rng, int n_atoms) {
  std::uniform_real_distribution<double> pos(-4.0, 4.0);
  const char* elements[5] = {"C", "N", "O", "S", "P"};
  std::vector<Atom> atoms;
  for (int i = 0; i < n_atoms; ++i) {
    Atom a;
    a.element = elements[i % 5];
    a.name = i == 0 ? "CA" : "X";
    a.residue_index = i + 1;
    a.residue_type = AminoAcid::from_index(i % 20);
    a.coords = {pos(rng), pos(rng), pos(rng)};
    atoms.push_back(a);
  }
  MaskedGraph m;
  m.graph = build_atomic_graph(std::move(atoms), 4.5);
  m.target_atom = 0;
  m.target_residue = 1;
  m.true_label = AminoAcid::from_index(static_cast<int>(rng() % 20));
  return m;
}

MaskedGraph transformed(const MaskedGraph& m, const Eigen::Matrix3d& rot,
                        const Eigen::Vector3d& shift) {
  auto atoms = m.graph.atoms;
  for (auto& a : atoms) a.coords = rot * a.coords + shift;
  MaskedGraph out;
  out.graph = build_atomic_graph(std::move(atoms), m.graph.cutoff);
  out.target_atom = m.target_atom;
  out.target_residue = m.target_residue;
  out.true_label = m.true_label;
  return out;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

double loss_only(const ScorerParams& params, const BatchedGraphs& in) {
  Eigen::MatrixXd logits = forward_batch(params, in);
  double total = 0.0;
  for (Eigen::Index g = 0; g < logits.rows(); ++g) {
    Eigen::RowVectorXd row = logits.row(g);
    const double mx = row.maxCoeff();
    total += std::log((row.array() - mx).exp().sum()) + mx -
             row[in.label[static_cast<std::size_t>(g)]];
  }
  return total / static_cast<double>(logits.rows());
}

}  // namespace

TEST_CASE("parameter registry is a deterministic function of the dimensions") {
  ScorerParams a(tiny_spec());
  ScorerParams b(tiny_spec());
  REQUIRE(a.tensors().size() == b.tensors().size());
  for (std::size_t i = 0; i < a.tensors().size(); ++i) {
    CHECK(a.tensors()[i].name == b.tensors()[i].name);
    CHECK(a.tensors()[i].rows == b.tensors()[i].rows);
    CHECK(a.tensors()[i].cols == b.tensors()[i].cols);
    CHECK(a.tensors()[i].offset == b.tensors()[i].offset);
  }
  // 2 layers x 2 units x 6 tensors + out.W/out.b + 4 head tensors
  CHECK(a.tensors().size() == 2 * 2 * 6 + 2 + 4);
  CHECK(a.tensor("layer0.msg.Ws").rows() == 10);
  CHECK(a.tensor("layer0.msg.Ws").cols() == 10 + 6 + 4);
  CHECK(a.tensor("head.W2").rows() == 20);
  CHECK_THROWS_AS(a.tensor("nonexistent"), ConfigError);
}

TEST_CASE("invalid dimensions are rejected") {
  FeatureSpec s = tiny_spec();
  s.node_vector_dim = 0;
  CHECK_THROWS_AS(ScorerParams{s}, ConfigError);
  s = tiny_spec();
  s.node_scalar_dim = 4;  // cannot hold the raw channels
  CHECK_THROWS_AS(ScorerParams{s}, ConfigError);
  TrainConfig c;
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.decay_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("radial basis matches an independent reimplementation") {
  const int count = 32;
  const double cutoff = 4.5;
  const double d = 2.25;
  Eigen::VectorXd got = radial_basis(d, count, cutoff);
  // Straight transcription of the definition, computed in long double.
  const long double spacing = cutoff / (count - 1);
  for (int k = 0; k < count; ++k) {
    const long double center = spacing * k;
    const long double z = (static_cast<long double>(d) - center) / spacing;
    const long double expected = std::exp(-0.5L * z * z);
    CHECK(got[k] == doctest::Approx(static_cast<double>(expected)).epsilon(1e-12));
  }
  CHECK(got.maxCoeff() <= 1.0);
  CHECK(got.minCoeff() >= 0.0);
}

TEST_CASE("featurization is pointwise in the raw channels") {
  std::mt19937_64 rng(3);
  auto m = random_environment(rng, 11);
  auto in = featurize(m, tiny_spec());
  // Atoms 5 and 10 share the element and neither is backbone nor target.
  CHECK(m.graph.atoms[5].element == m.graph.atoms[10].element);
  CHECK(in.node_scalar.row(5).isApprox(in.node_scalar.row(10)));
  // Edge vectors are unit length.
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(in.edge_src.size()); ++e) {
    CHECK(in.edge_vector.block<3, 1>(3 * e, 0).norm() == doctest::Approx(1.0));
  }
  // Raw channels occupy the first slots; the rest stay zero.
  CHECK(in.node_scalar.rightCols(tiny_spec().node_scalar_dim - kRawNodeChannels).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("logits are invariant under rigid motions and vectors rotate with the input") {
  std::mt19937_64 rng(11);
  auto spec = small_spec();
  auto params = ScorerParams::random(spec, 5);
  for (int s = 0; s < 3; ++s) {
    auto m = random_environment(rng, 14);
    auto in = featurize(m, spec);
    Eigen::MatrixXd base = forward_batch(params, in);
    auto base_states = forward_vector_states(params, in);
    for (int t = 0; t < 6; ++t) {
      Eigen::Matrix3d rot = random_rotation(rng);
      Eigen::Vector3d shift(10.0 * t, -3.0, 0.5 * t);
      auto moved = transformed(m, rot, shift);
      auto in2 = featurize(moved, spec);
      Eigen::MatrixXd logits = forward_batch(params, in2);
      const double rel = (logits - base).norm() / base.norm();
      CHECK(rel < 1e-4);

      auto states = forward_vector_states(params, in2);
      REQUIRE(states.size() == base_states.size());
      for (std::size_t layer = 0; layer < states.size(); ++layer) {
        const auto& v0 = base_states[layer];
        const auto& v1 = states[layer];
        double worst = 0.0;
        for (Eigen::Index node = 0; node < v0.rows() / 3; ++node) {
          Eigen::MatrixXd expected = rot * v0.middleRows(3 * node, 3);
          worst = std::max(worst, (v1.middleRows(3 * node, 3) - expected).norm() /
                                      std::max(1e-12, expected.norm()));
        }
        CHECK(worst < 1e-4);
      }
    }
  }
}

TEST_CASE("permuting atoms with consistent reindexing leaves logits unchanged") {
  std::mt19937_64 rng(17);
  auto spec = small_spec();
  auto params = ScorerParams::random(spec, 23);
  auto m = random_environment(rng, 12);
  Eigen::MatrixXd base = forward_batch(params, featurize(m, spec));

  std::vector<int> perm(m.graph.atoms.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Atom> atoms(m.graph.atoms.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    atoms[static_cast<std::size_t>(perm[i])] = m.graph.atoms[i];
  }
  MaskedGraph p;
  p.graph = build_atomic_graph(std::move(atoms), m.graph.cutoff);
  p.target_atom = perm[static_cast<std::size_t>(m.target_atom)];
  p.target_residue = m.target_residue;
  p.true_label = m.true_label;
  Eigen::MatrixXd permuted = forward_batch(params, featurize(p, spec));
  CHECK((permuted - base).norm() < 1e-9);
}

TEST_CASE("analytic gradients match central finite differences on every tensor") {
  std::mt19937_64 rng(29);
  auto spec = tiny_spec();
  auto params = ScorerParams::random(spec, 101);
  REQUIRE(params.size() <= 5000);

  std::vector<MaskedGraph> graphs;
  graphs.push_back(random_environment(rng, 7));
  graphs.push_back(random_environment(rng, 9));
  std::vector<const MaskedGraph*> batch = {&graphs[0], &graphs[1]};
  BatchedGraphs in = featurize_batch(batch, spec);

  Eigen::VectorXd grad;
  loss_and_grad(params, in, grad);

  const double h = 1e-4;
  ScorerParams probe = params;
  for (const auto& t : params.tensors()) {
    const std::int64_t count = static_cast<std::int64_t>(t.rows) * t.cols;
    Eigen::VectorXd fd(count);
    for (std::int64_t i = 0; i < count; ++i) {
      const std::int64_t idx = t.offset + i;
      const double saved = probe.flat()[idx];
      probe.flat()[idx] = saved + h;
      const double up = loss_only(probe, in);
      probe.flat()[idx] = saved - h;
      const double down = loss_only(probe, in);
      probe.flat()[idx] = saved;
      fd[i] = (up - down) / (2.0 * h);
    }
    const Eigen::VectorXd analytic = grad.segment(t.offset, count);
    const double denom = std::max(fd.norm(), 1e-10);
    const double rel = (analytic - fd).norm() / denom;
    INFO("tensor ", t.name, " rel ", rel);
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("uniform logits give ln(20) loss and duplicating a batch element keeps the mean") {
  auto spec = tiny_spec();
  ScorerParams zero(spec);  // all weights zero -> all logits zero
  std::mt19937_64 rng(31);
  auto m = random_environment(rng, 8);
  Eigen::VectorXd grad;
  const double loss = loss_and_grad(zero, {&m}, grad);
  CHECK(loss == doctest::Approx(std::log(20.0)).epsilon(1e-9));

  auto params = ScorerParams::random(spec, 7);
  auto m2 = random_environment(rng, 10);
  const double single = loss_and_grad(params, {&m, &m2}, grad);
  const double doubled = loss_and_grad(params, {&m, &m2, &m, &m2}, grad);
  CHECK(single == doctest::Approx(doubled).epsilon(1e-12));
}

TEST_CASE("softmax of scores sums to one") {
  std::mt19937_64 rng(37);
  auto params = ScorerParams::random(small_spec(), 41);
  auto m = random_environment(rng, 13);
  ScoreVector v = forward(params, m);
  Eigen::ArrayXd ex = (v.scores.array() - v.scores.maxCoeff()).exp();
  CHECK(std::abs(ex.sum() / ex.sum() - 1.0) < 1e-15);
  const double total = (ex / ex.sum()).sum();
  CHECK(std::abs(total - 1.0) < 1e-9);
  for (int i = 0; i < 20; ++i) CHECK(std::isfinite(v.scores[i]));
}

TEST_CASE("block-diagonal batching reproduces per-graph forwards") {
  std::mt19937_64 rng(43);
  auto spec = small_spec();
  auto params = ScorerParams::random(spec, 47);
  std::vector<MaskedGraph> graphs;
  for (int i = 0; i < 4; ++i) graphs.push_back(random_environment(rng, 6 + i));
  std::vector<const MaskedGraph*> ptrs;
  for (auto& g : graphs) ptrs.push_back(&g);
  Eigen::MatrixXd batched = forward_batch(params, featurize_batch(ptrs, spec));
  for (int i = 0; i < 4; ++i) {
    ScoreVector single = forward(params, graphs[static_cast<std::size_t>(i)]);
    CHECK((batched.row(i).transpose() - single.scores).norm() < 1e-10);
  }
}

TEST_CASE("forward is deterministic and dropout is reproducible per seed") {
  std::mt19937_64 rng(53);
  auto spec = tiny_spec();
  auto params = ScorerParams::random(spec, 59);
  auto m = random_environment(rng, 9);
  auto in = featurize(m, spec);
  Eigen::MatrixXd a = forward_batch(params, in);
  Eigen::MatrixXd b = forward_batch(params, in);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  DropoutSpec drop{0.3, 12345};
  Eigen::MatrixXd c = forward_batch(params, in, drop);
  Eigen::MatrixXd d = forward_batch(params, in, drop);
  CHECK((c - d).cwiseAbs().maxCoeff() == 0.0);
  DropoutSpec other{0.3, 54321};
  Eigen::MatrixXd e = forward_batch(params, in, other);
  CHECK((c - e).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("checkpoints round-trip bit-exactly and reject corruption") {
  auto spec = tiny_spec();
  auto params = ScorerParams::random(spec, 61);
  TrainConfig config;
  config.seed = 99;
  config.learning_rate = 3e-4;

  const std::string path = "checkpoint_roundtrip.bin";
  save_checkpoint(path, params, config);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.params.spec() == spec);
  CHECK(loaded.config.seed == 99);
  CHECK(loaded.config.learning_rate == 3e-4);
  REQUIRE(loaded.params.size() == params.size());
  CHECK(std::memcmp(loaded.params.flat().data(), params.flat().data(),
                    static_cast<std::size_t>(params.size()) * sizeof(double)) == 0);

  // Forward after reload is bit-identical.
  std::mt19937_64 rng(67);
  auto m = random_environment(rng, 9);
  auto in = featurize(m, spec);
  Eigen::MatrixXd a = forward_batch(params, in);
  Eigen::MatrixXd b = forward_batch(loaded.params, in);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  std::string blob = read_file(path);
  write_file_atomic("checkpoint_bad_magic.bin", "XXXX" + blob.substr(4));
  CHECK_THROWS_AS(load_checkpoint("checkpoint_bad_magic.bin"), ParseError);
  write_file_atomic("checkpoint_truncated.bin", blob.substr(0, blob.size() - 17));
  CHECK_THROWS_AS(load_checkpoint("checkpoint_truncated.bin"), ParseError);
  CHECK_THROWS_AS(load_checkpoint("checkpoint_missing.bin"), NotFoundError);
  std::remove(path.c_str());
  std::remove("checkpoint_bad_magic.bin");
  std::remove("checkpoint_truncated.bin");
}

TEST_CASE("fixed seed and graph reproduce the recorded logits") {
  // Regenerate tests/data/golden_logits.txt when the parameter layout or
  // initialization scheme changes, never to paper over a numerical drift.
  FeatureSpec spec;
  spec.node_scalar_dim = 12;
  spec.node_vector_dim = 3;
  spec.edge_scalar_dim = 5;
  spec.edge_vector_dim = 1;
  spec.hidden_out_dim = 9;
  spec.num_layers = 2;
  auto params = ScorerParams::random(spec, 12345);

  std::vector<Atom> atoms;
  const char* el[4] = {"C", "N", "O", "S"};
  for (int i = 0; i < 6; ++i) {
    Atom a;
    a.element = el[i % 4];
    a.name = i == 0 ? "CA" : "X";
    a.residue_index = i + 1;
    a.residue_type = AminoAcid::from_index(i);
    a.coords = {1.3 * i, 0.7 * ((i * i) % 5), -0.9 * i + 0.2};
    atoms.push_back(a);
  }
  MaskedGraph m;
  m.graph = build_atomic_graph(atoms, 4.5);
  m.target_atom = 0;
  m.target_residue = 1;
  m.true_label = AminoAcid::from_index(3);

  ScoreVector v = forward(params, m);
  std::ifstream golden(std::string(TEST_DATA_DIR) + "/golden_logits.txt");
  REQUIRE(golden.good());
  for (int i = 0; i < 20; ++i) {
    double expected = 0.0;
    golden >> expected;
    CHECK(v.scores[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("shape mismatch between parameters and input is rejected") {
  std::mt19937_64 rng(71);
  auto params = ScorerParams::random(tiny_spec(), 3);
  auto m = random_environment(rng, 8);
  auto in = featurize(m, small_spec());
  CHECK_THROWS_AS(forward_batch(params, in), ConfigError);
}

TEST_CASE("training is deterministic, improves a separable problem, and honors lr=0") {
  auto spec = tiny_spec();
  auto data = generate_synthetic_res(120, 7);
  std::vector<MaskedGraph> train(data.begin(), data.begin() + 80);
  std::vector<MaskedGraph> val(data.begin() + 80, data.end());

  TrainConfig cfg;
  cfg.learning_rate = 2e-3;
  cfg.epochs = 6;
  cfg.batch_size = 16;
  cfg.dropout = 0.05;
  cfg.seed = 13;

  auto r1 = train_res(train, val, cfg, spec);
  auto r2 = train_res(train, val, cfg, spec);
  REQUIRE(r1.history.size() == 6);
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
    CHECK(r1.history[i].val_accuracy == r2.history[i].val_accuracy);
  }
  CHECK(r1.history.back().train_loss < r1.history.front().train_loss);
  CHECK((r1.params.flat() - r2.params.flat()).cwiseAbs().maxCoeff() == 0.0);

  TrainConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  frozen.dropout = 0.0;
  auto r3 = train_res(train, val, frozen, spec);
  auto init = ScorerParams::random(spec, frozen.seed);
  CHECK((r3.params.flat() - init.flat()).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(train_res({}, val, cfg, spec), ValidationError);
  CHECK_THROWS_AS(train_res(train, {}, cfg, spec), ValidationError);
}

TEST_CASE("learning-rate schedule decays after a validation plateau") {
  auto spec = tiny_spec();
  auto data = generate_synthetic_res(40, 3);
  std::vector<MaskedGraph> train(data.begin(), data.begin() + 30);
  std::vector<MaskedGraph> val(data.begin() + 30, data.end());

  TrainConfig cfg;
  cfg.learning_rate = 0.0;  // loss can never improve after epoch 1
  cfg.scheduler_patience = 2;
  cfg.decay_rate = 0.5;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.dropout = 0.0;
  cfg.seed = 1;
  auto r = train_res(train, val, cfg, spec);
  // Epoch 1 improves on infinity; epochs 2-3 plateau -> decay before epoch 4,
  // epochs 4-5 plateau -> decay before epoch 6 (not observed).
  CHECK(r.history[0].learning_rate == 0.0);
  REQUIRE(r.history.size() == 5);
}

TEST_CASE("accuracy evaluation matches a hand count and rejects empty input") {
  auto spec = tiny_spec();
  auto params = ScorerParams::random(spec, 83);
  auto data = generate_synthetic_res(5, 11);
  // Relabel each sample to the argmax, so all are "correct".
  for (auto& m : data) {
    m.true_label = AminoAcid::from_index(forward(params, m).argmax());
  }
  CHECK(evaluate_accuracy(params, data) == doctest::Approx(1.0));
  // Break one label.
  data[0].true_label = AminoAcid::from_index((data[0].true_label.index() + 1) % 20);
  CHECK(evaluate_accuracy(params, data) == doctest::Approx(0.8));
  CHECK_THROWS_AS(evaluate_accuracy(params, {}), ValidationError);
}
