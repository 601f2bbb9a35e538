#include "varscore/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include <json.hpp>

#include "varscore/errors.hpp"
#include "varscore/parallel.hpp"

namespace varscore {

namespace {

void validate_inputs(const std::vector<Atom>& atoms, double cutoff) {
  if (atoms.empty()) throw EmptyStructureError("cannot build a graph from zero atoms");
  if (!(cutoff > 0.0)) throw ValidationError("cutoff must be positive");
}

std::map<int, int> index_alpha_carbons(const std::vector<Atom>& atoms) {
  std::map<int, int> ca;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].name == "CA") {
      ca.try_emplace(atoms[i].residue_index, static_cast<int>(i));
    }
  }
  return ca;
}

std::uint64_t cell_key(int cx, int cy, int cz) {
  auto enc = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v + (1 << 20))) & 0x1FFFFF; };
  return enc(cx) | (enc(cy) << 21) | (enc(cz) << 42);
}

}  // namespace

AtomicGraph build_atomic_graph(std::vector<Atom> atoms, double cutoff, bool parallel) {
  validate_inputs(atoms, cutoff);

  const auto n = static_cast<std::int64_t>(atoms.size());
  std::unordered_map<std::uint64_t, std::vector<int>> grid;
  grid.reserve(static_cast<std::size_t>(n));
  std::vector<std::array<int, 3>> cells(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& p = atoms[static_cast<std::size_t>(i)].coords;
    cells[static_cast<std::size_t>(i)] = {static_cast<int>(std::floor(p.x() / cutoff)),
                                          static_cast<int>(std::floor(p.y() / cutoff)),
                                          static_cast<int>(std::floor(p.z() / cutoff))};
    const auto& c = cells[static_cast<std::size_t>(i)];
    grid[cell_key(c[0], c[1], c[2])].push_back(static_cast<int>(i));
  }

  std::vector<std::vector<Edge>> per_atom(static_cast<std::size_t>(n));
  parallel_for(
      n,
      [&](std::int64_t i) {
        const auto& pi = atoms[static_cast<std::size_t>(i)].coords;
        const auto& c = cells[static_cast<std::size_t>(i)];
        auto& out = per_atom[static_cast<std::size_t>(i)];
        for (int dx = -1; dx <= 1; ++dx)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dz = -1; dz <= 1; ++dz) {
              auto it = grid.find(cell_key(c[0] + dx, c[1] + dy, c[2] + dz));
              if (it == grid.end()) continue;
              for (int j : it->second) {
                if (j == i) continue;
                double d = (atoms[static_cast<std::size_t>(j)].coords - pi).norm();
                if (d < cutoff) out.push_back({static_cast<int>(i), j, d});
              }
            }
        std::sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) { return a.dst < b.dst; });
      },
      parallel);

  AtomicGraph g;
  g.cutoff = cutoff;
  std::size_t total = 0;
  for (const auto& v : per_atom) total += v.size();
  g.edges.reserve(total);
  for (const auto& v : per_atom) g.edges.insert(g.edges.end(), v.begin(), v.end());
  g.ca_index = index_alpha_carbons(atoms);
  g.atoms = std::move(atoms);
  return g;
}

AtomicGraph build_atomic_graph_brute(std::vector<Atom> atoms, double cutoff) {
  validate_inputs(atoms, cutoff);
  AtomicGraph g;
  g.cutoff = cutoff;
  const auto n = atoms.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d = (atoms[i].coords - atoms[j].coords).norm();
      if (d < cutoff) g.edges.push_back({static_cast<int>(i), static_cast<int>(j), d});
    }
  g.ca_index = index_alpha_carbons(atoms);
  g.atoms = std::move(atoms);
  return g;
}

MaskedGraph mask_residue(const AtomicGraph& graph, int residue_index) {
  bool residue_seen = false;
  std::vector<Atom> kept;
  kept.reserve(graph.atoms.size());
  int target_atom = -1;
  AminoAcid label = AminoAcid::from_index(0);
  for (const auto& a : graph.atoms) {
    if (a.residue_index == residue_index) {
      residue_seen = true;
      label = a.residue_type;
      if (!a.is_backbone()) continue;
      if (a.name == "CA" && target_atom < 0) target_atom = static_cast<int>(kept.size());
    }
    kept.push_back(a);
  }
  if (!residue_seen) {
    throw UnknownPositionError("residue " + std::to_string(residue_index) + " not in structure");
  }
  if (target_atom < 0) {
    throw UnknownPositionError("residue " + std::to_string(residue_index) + " has no alpha carbon");
  }

  MaskedGraph m;
  m.graph = build_atomic_graph(std::move(kept), graph.cutoff);
  m.target_atom = target_atom;
  m.target_residue = residue_index;
  m.true_label = label;
  return m;
}

std::vector<Atom> extract_local_environment(const AtomicGraph& graph, int residue_index,
                                            double radius) {
  if (!(radius >= 0.0)) throw ValidationError("radius must be non-negative");
  auto it = graph.ca_index.find(residue_index);
  if (it == graph.ca_index.end()) {
    throw UnknownPositionError("residue " + std::to_string(residue_index) + " has no alpha carbon");
  }
  const Eigen::Vector3d center = graph.atoms[static_cast<std::size_t>(it->second)].coords;
  std::vector<Atom> env;
  for (const auto& a : graph.atoms) {
    if ((a.coords - center).norm() <= radius) env.push_back(a);
  }
  return env;
}

std::string graph_to_json(const AtomicGraph& graph) {
  nlohmann::json j;
  j["cutoff"] = graph.cutoff;
  auto& atoms = j["atoms"] = nlohmann::json::array();
  for (const auto& a : graph.atoms) {
    atoms.push_back({{"element", a.element},
                     {"name", a.name},
                     {"residue_index", a.residue_index},
                     {"residue_type", a.residue_type.three_letter()},
                     {"chain", std::string(1, a.chain_id)},
                     {"coords", {a.coords.x(), a.coords.y(), a.coords.z()}}});
  }
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"distance", e.distance}});
  }
  auto& ca_map = j["ca_map"] = nlohmann::json::object();
  for (const auto& [residue, atom] : graph.ca_index) {
    ca_map[std::to_string(residue)] = atom;
  }
  return j.dump(2);
}

}  // namespace varscore
