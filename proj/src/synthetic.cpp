#include "varscore/synthetic.hpp"

#include <Eigen/Geometry>

#include <array>
#include <random>
#include <string>

#include "varscore/errors.hpp"

namespace varscore {

namespace {

constexpr std::array<const char*, 5> kElements = {"C", "N", "O", "S", "P"};
constexpr std::array<double, 4> kBandRadius = {2.0, 2.6, 3.2, 3.8};
constexpr double kJitter = 0.2;  // bands stay disjoint: spacing 0.6 > 2 * 0.2
constexpr double kCutoff = 4.5;

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = {normal(rng), normal(rng), normal(rng)};
  } while (v.norm() < 1e-6);
  return v.normalized();
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

std::vector<MaskedGraph> generate_synthetic_res(int n_samples, std::uint64_t seed) {
  if (n_samples <= 0) throw ValidationError("n_samples must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-kJitter, kJitter);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);

  std::vector<MaskedGraph> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const int label = i % AminoAcid::kCount;
    const int band = label / static_cast<int>(kElements.size());
    const int elem = label % static_cast<int>(kElements.size());
    const int count = 2 + band;

    std::vector<Atom> atoms;
    Atom target;
    target.element = "C";
    target.name = "CA";
    target.residue_index = 1;
    target.chain_id = 'A';
    target.residue_type = AminoAcid::from_index(label);
    target.coords = Eigen::Vector3d::Zero();
    atoms.push_back(target);

    for (int a = 0; a < count; ++a) {
      Atom env;
      env.element = kElements[static_cast<std::size_t>(elem)];
      env.name = "ENV";
      env.residue_index = 2 + a;
      env.chain_id = 'A';
      env.residue_type = AminoAcid::from_code('G').value();
      env.coords = random_unit(rng) * (kBandRadius[static_cast<std::size_t>(band)] + jitter(rng));
      atoms.push_back(env);
    }

    const Eigen::Matrix3d rot = random_rotation(rng);
    const Eigen::Vector3d offset(shift(rng), shift(rng), shift(rng));
    for (auto& atom : atoms) atom.coords = rot * atom.coords + offset;

    MaskedGraph sample;
    sample.graph = build_atomic_graph(std::move(atoms), kCutoff, /*parallel=*/false);
    sample.target_atom = 0;
    sample.target_residue = 1;
    sample.true_label = AminoAcid::from_index(label);
    out.push_back(std::move(sample));
  }
  return out;
}

int decode_synthetic_label(const MaskedGraph& sample) {
  const auto& atoms = sample.graph.atoms;
  if (atoms.empty() || sample.target_atom < 0 ||
      sample.target_atom >= static_cast<int>(atoms.size())) {
    throw ValidationError("sample has no valid target atom");
  }
  const Eigen::Vector3d center = atoms[static_cast<std::size_t>(sample.target_atom)].coords;

  int count = 0;
  std::string element;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (static_cast<int>(i) == sample.target_atom) continue;
    if ((atoms[i].coords - center).norm() > kCutoff) continue;
    if (element.empty()) {
      element = atoms[i].element;
    } else if (element != atoms[i].element) {
      throw ValidationError("environment mixes elements; not a generated sample");
    }
    ++count;
  }

  const int band = count - 2;
  if (band < 0 || band >= static_cast<int>(kBandRadius.size())) {
    throw ValidationError("neighbor count " + std::to_string(count) + " matches no class");
  }
  for (std::size_t e = 0; e < kElements.size(); ++e) {
    if (element == kElements[e]) {
      return band * static_cast<int>(kElements.size()) + static_cast<int>(e);
    }
  }
  throw ValidationError("element '" + element + "' matches no class");
}

}  // namespace varscore
