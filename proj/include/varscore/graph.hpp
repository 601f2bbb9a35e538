#pragma once

#include <map>
#include <string>
#include <vector>

#include "varscore/atom.hpp"

namespace varscore {

struct Edge {
  int src = 0;
  int dst = 0;
  double distance = 0.0;
};

// Atoms plus the directed proximity edges between them. Both directions of
// each neighbor pair are stored; edges are sorted by (src, dst).
struct AtomicGraph {
  std::vector<Atom> atoms;
  std::vector<Edge> edges;
  double cutoff = 0.0;

  // residue_index -> atom index of that residue's first alpha carbon.
  std::map<int, int> ca_index;
};

// Graph with one residue reduced to its backbone, ready for identity scoring.
struct MaskedGraph {
  AtomicGraph graph;
  int target_atom = 0;      // alpha carbon of the masked residue
  int target_residue = 0;   // residue index that was masked
  AminoAcid true_label = AminoAcid::from_index(0);
};

// Connects atoms closer than `cutoff` (strictly). Throws EmptyStructureError
// on empty input and ValidationError on non-positive cutoff.
AtomicGraph build_atomic_graph(std::vector<Atom> atoms, double cutoff = 4.5,
                               bool parallel = true);

// Same contract, all-pairs scan. Reference for the grid-indexed builder.
AtomicGraph build_atomic_graph_brute(std::vector<Atom> atoms, double cutoff = 4.5);

// Removes the side chain of `residue_index`, keeping its backbone, and
// rebuilds edges. Throws UnknownPositionError when the residue is absent or
// has no alpha carbon.
MaskedGraph mask_residue(const AtomicGraph& graph, int residue_index);

// Sub-structure of atoms within `radius` (inclusive) of the residue's alpha
// carbon. The alpha carbon itself is always included.
std::vector<Atom> extract_local_environment(const AtomicGraph& graph, int residue_index,
                                            double radius);

// JSON text with nodes (element, name, residue, chain, coords) and edges.
std::string graph_to_json(const AtomicGraph& graph);

}  // namespace varscore
