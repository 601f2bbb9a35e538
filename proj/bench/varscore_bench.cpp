// Benchmark comparing the OpenMP-parallel kernels against their serial
// paths and, for graph construction, against the all-pairs reference.
// Each section verifies that the compared implementations produce
// identical results before reporting timings.

#include "varscore/fitness.hpp"
#include "varscore/graph.hpp"
#include "varscore/parallel.hpp"
#include "varscore/scorer.hpp"
#include "varscore/synthetic.hpp"
#include "varscore/variants.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace varscore;

namespace {

int g_mismatches = 0;

void check(bool ok, const char* what) {
  if (!ok) {
    ++g_mismatches;
    std::printf("  MISMATCH: %s\n", what);
  }
}

// Median of three runs, in milliseconds.
template <typename Fn>
double time_ms(const Fn& fn) {
  std::vector<double> runs;
  for (int i = 0; i < 3; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    runs.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count());
  }
  std::sort(runs.begin(), runs.end());
  return runs[1];
}

std::vector<Atom> random_cloud(std::mt19937_64& rng, int n) {
  const double half = 0.9 * std::cbrt(static_cast<double>(n)) * 2.0;
  std::uniform_real_distribution<double> pos(-half, half);
  const char* elements[5] = {"C", "N", "O", "S", "P"};
  std::vector<Atom> atoms;
  for (int i = 0; i < n; ++i) {
    Atom a;
    a.element = elements[i % 5];
    a.name = i % 4 == 0 ? "CA" : "X";
    a.residue_index = i + 1;
    a.chain_id = 'A';
    a.residue_type = AminoAcid::from_index(i % 20);
    a.coords = {pos(rng), pos(rng), pos(rng)};
    atoms.push_back(a);
  }
  return atoms;
}

std::vector<Atom> backbone_fragment(int residues) {
  std::vector<Atom> atoms;
  for (int r = 1; r <= residues; ++r) {
    const double base = 3.6 * r;
    const char* names[4] = {"N", "CA", "C", "O"};
    const char* elements[4] = {"N", "C", "C", "O"};
    for (int k = 0; k < 4; ++k) {
      Atom a;
      a.name = names[k];
      a.element = elements[k];
      a.residue_index = r;
      a.chain_id = 'A';
      a.residue_type = AminoAcid::from_index((r - 1) % 20);
      a.coords = {base + 0.8 * k, 0.4 * k, 0.15 * r};
      atoms.push_back(a);
    }
  }
  return atoms;
}

bool same_edges(const AtomicGraph& a, const AtomicGraph& b) {
  if (a.edges.size() != b.edges.size()) return false;
  for (std::size_t i = 0; i < a.edges.size(); ++i) {
    if (a.edges[i].src != b.edges[i].src || a.edges[i].dst != b.edges[i].dst ||
        a.edges[i].distance != b.edges[i].distance) {
      return false;
    }
  }
  return true;
}

void bench_graph_build() {
  std::printf("neighbor graph construction (cutoff 4.5)\n");
  std::mt19937_64 rng(7);
  for (const int n : {500, 2000, 8000}) {
    const std::vector<Atom> atoms = random_cloud(rng, n);
    const AtomicGraph reference = build_atomic_graph_brute(atoms, 4.5);
    check(same_edges(build_atomic_graph(atoms, 4.5, true), reference),
          "grid parallel edges differ from all-pairs");
    check(same_edges(build_atomic_graph(atoms, 4.5, false), reference),
          "grid serial edges differ from all-pairs");

    const double grid_par = time_ms([&] { build_atomic_graph(atoms, 4.5, true); });
    const double grid_ser = time_ms([&] { build_atomic_graph(atoms, 4.5, false); });
    const double brute = time_ms([&] { build_atomic_graph_brute(atoms, 4.5); });
    std::printf("  %5d atoms, %8zu edges: grid %8.2f ms parallel, %8.2f ms serial, "
                "all-pairs %8.2f ms (x%.1f)\n",
                n, reference.edges.size(), grid_par, grid_ser, brute,
                brute / std::max(grid_par, 1e-9));
  }
}

void bench_score_structure() {
  std::printf("structure scoring (mask every residue, full model size)\n");
  const FeatureSpec spec;
  const ScorerParams params = ScorerParams::random(spec, 5);
  const AtomicGraph graph = build_atomic_graph(backbone_fragment(48), spec.cutoff);

  const ScoreMatrix parallel = score_structure(params, graph, {}, true);
  const ScoreMatrix serial = score_structure(params, graph, {}, false);
  check(parallel.positions == serial.positions &&
            (parallel.scores - serial.scores).cwiseAbs().maxCoeff() == 0.0,
        "parallel and serial score matrices differ");

  const double par = time_ms([&] { score_structure(params, graph, {}, true); });
  const double ser = time_ms([&] { score_structure(params, graph, {}, false); });
  std::printf("  %3zu positions, %zu atoms: %8.2f ms parallel, %8.2f ms serial (x%.2f)\n",
              parallel.positions.size(), graph.atoms.size(), par, ser,
              ser / std::max(par, 1e-9));
}

void bench_batch_inference() {
  std::printf("batch inference (argmax accuracy over synthetic environments)\n");
  const FeatureSpec spec;
  const ScorerParams params = ScorerParams::random(spec, 6);
  const auto dataset = generate_synthetic_res(400, 9);

  const double acc_par = evaluate_accuracy(params, dataset, true);
  const double acc_ser = evaluate_accuracy(params, dataset, false);
  check(acc_par == acc_ser, "parallel and serial accuracies differ");

  const double par = time_ms([&] { evaluate_accuracy(params, dataset, true); });
  const double ser = time_ms([&] { evaluate_accuracy(params, dataset, false); });
  std::printf("  %zu environments: %8.2f ms parallel, %8.2f ms serial (x%.2f)\n",
              dataset.size(), par, ser, ser / std::max(par, 1e-9));
}

void bench_learning_curve() {
  std::printf("learning curve (ridge fits across sizes and repeats)\n");
  const ScorerParams params = ScorerParams::random(FeatureSpec{
                                  .node_scalar_dim = 24,
                                  .node_vector_dim = 4,
                                  .edge_scalar_dim = 8,
                                  .edge_vector_dim = 1,
                                  .hidden_out_dim = 16,
                                  .num_layers = 2,
                              },
                              8);
  const AtomicGraph graph = build_atomic_graph(backbone_fragment(24), params.spec().cutoff);
  const ScoreMatrix matrix = score_structure(params, graph);

  DmsAssay assay;
  assay.id = "bench";
  int max_position = 0;
  for (int p : matrix.positions) max_position = std::max(max_position, p);
  assay.sequence.assign(static_cast<std::size_t>(max_position), AminoAcid::from_index(0));
  for (std::size_t i = 0; i < matrix.positions.size(); ++i) {
    assay.sequence[static_cast<std::size_t>(matrix.positions[i] - 1)] = matrix.wildtype[i];
  }
  for (Eigen::Index i = 0; i < matrix.scores.rows(); ++i) {
    for (int a = 0; a < AminoAcid::kCount; ++a) {
      if (a == matrix.wildtype[static_cast<std::size_t>(i)].index()) continue;
      assay.records.push_back({matrix.positions[static_cast<std::size_t>(i)],
                               matrix.wildtype[static_cast<std::size_t>(i)],
                               AminoAcid::from_index(a), matrix.scores(i, a)});
    }
  }
  assay.wt_reference = matrix.scores.minCoeff() - 1.0;

  LearningCurveConfig config;
  config.sizes = {24, 72};
  config.repeats = 20;
  config.lambda = 1e-6;
  config.seed = 1;

  config.parallel = true;
  const LearningCurveResult r_par = learning_curve(assay, matrix, Embedding::one_hot(), config);
  config.parallel = false;
  const LearningCurveResult r_ser = learning_curve(assay, matrix, Embedding::one_hot(), config);
  bool identical = r_par.aggregates.size() == r_ser.aggregates.size();
  for (std::size_t i = 0; identical && i < r_par.aggregates.size(); ++i) {
    identical = r_par.aggregates[i].size == r_ser.aggregates[i].size &&
                r_par.aggregates[i].metric == r_ser.aggregates[i].metric &&
                r_par.aggregates[i].mean == r_ser.aggregates[i].mean &&
                r_par.aggregates[i].stddev == r_ser.aggregates[i].stddev;
  }
  check(identical, "parallel and serial learning curves differ");

  const double par = time_ms([&] {
    config.parallel = true;
    learning_curve(assay, matrix, Embedding::one_hot(), config);
  });
  const double ser = time_ms([&] {
    config.parallel = false;
    learning_curve(assay, matrix, Embedding::one_hot(), config);
  });
  std::printf("  %zu sizes x %d repeats: %8.2f ms parallel, %8.2f ms serial (x%.2f)\n",
              config.sizes.size(), config.repeats, par, ser, ser / std::max(par, 1e-9));
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", max_threads());
  bench_graph_build();
  bench_score_structure();
  bench_batch_inference();
  bench_learning_curve();
  if (g_mismatches > 0) {
    std::printf("\n%d result mismatch(es) between compared implementations\n", g_mismatches);
    return 1;
  }
  std::printf("\nall compared implementations agree\n");
  return 0;
}
