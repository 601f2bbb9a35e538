#pragma once

#include <Eigen/Core>
#include <string>

#include "varscore/amino_acid.hpp"

namespace varscore {

// A single heavy atom of a standard amino-acid residue.
struct Atom {
  std::string element;     // chemical element symbol, trimmed uppercase ("C", "N", "FE")
  std::string name;        // atom name within the residue, trimmed ("CA", "CB", "OD1")
  Eigen::Vector3d coords;  // Angstrom
  int residue_index = 0;   // 1-based position in chain
  char chain_id = 'A';
  AminoAcid residue_type;

  bool is_backbone() const {
    return name == "N" || name == "CA" || name == "C" || name == "O";
  }
};

}  // namespace varscore
