#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "varscore/atom.hpp"

namespace varscore {

enum class StructureFormat { pdb };

// Bookkeeping for records dropped while parsing.
struct ParseStats {
  int atom_records = 0;        // ATOM records seen (any residue type)
  int skipped_hetatm = 0;      // HETATM records (waters included)
  int skipped_altloc = 0;      // alternate-location duplicates beyond the first
  int skipped_hydrogen = 0;    // element H or D
  int skipped_nonstandard = 0; // ATOM records of non-canonical residues
  int insertion_coded = 0;     // residues renumbered past the chain end
};

// Parses fixed-column ATOM records into a flat atom list.
//
// Keeps one atom per (chain, residue, atom name): the first occurrence wins when
// alternate locations repeat a name. HETATM and water records are skipped, as are
// hydrogens. Residues carrying an insertion code are appended after the chain's
// last plain residue number, in file order.
std::vector<Atom> parse_structure(std::string_view content,
                                  StructureFormat format = StructureFormat::pdb,
                                  ParseStats* stats = nullptr);

// Writes atoms back out as minimal fixed-column ATOM records (one chain per
// chain_id, TER/END omitted). Used by the on-disk RES dataset format.
std::string to_pdb(const std::vector<Atom>& atoms);

}  // namespace varscore
