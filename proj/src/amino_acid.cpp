#include "varscore/amino_acid.hpp"

#include <stdexcept>

namespace varscore {

namespace {

constexpr std::array<char, 20> kCodes = {'A', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'K', 'L',
                                         'M', 'N', 'P', 'Q', 'R', 'S', 'T', 'V', 'W', 'Y'};

const std::array<std::string, 20> kThreeLetter = {
    "ALA", "CYS", "ASP", "GLU", "PHE", "GLY", "HIS", "ILE", "LYS", "LEU",
    "MET", "ASN", "PRO", "GLN", "ARG", "SER", "THR", "VAL", "TRP", "TYR"};

// Canonical BLOSUM62 in its conventional row order ARNDCQEGHILKMFPSTWYV,
// transcribed verbatim so it can be eyeballed against published tables.
constexpr char kBlosumOrder[21] = "ARNDCQEGHILKMFPSTWYV";
constexpr int kBlosumRaw[20][20] = {
    /*A*/ {4, -1, -2, -2, 0, -1, -1, 0, -2, -1, -1, -1, -1, -2, -1, 1, 0, -3, -2, 0},
    /*R*/ {-1, 5, 0, -2, -3, 1, 0, -2, 0, -3, -2, 2, -1, -3, -2, -1, -1, -3, -2, -3},
    /*N*/ {-2, 0, 6, 1, -3, 0, 0, 0, 1, -3, -3, 0, -2, -3, -2, 1, 0, -4, -2, -3},
    /*D*/ {-2, -2, 1, 6, -3, 0, 2, -1, -1, -3, -4, -1, -3, -3, -1, 0, -1, -4, -3, -3},
    /*C*/ {0, -3, -3, -3, 9, -3, -4, -3, -3, -1, -1, -3, -1, -2, -3, -1, -1, -2, -2, -1},
    /*Q*/ {-1, 1, 0, 0, -3, 5, 2, -2, 0, -3, -2, 1, 0, -3, -1, 0, -1, -2, -1, -2},
    /*E*/ {-1, 0, 0, 2, -4, 2, 5, -2, 0, -3, -3, 1, -2, -3, -1, 0, -1, -3, -2, -2},
    /*G*/ {0, -2, 0, -1, -3, -2, -2, 6, -2, -4, -4, -2, -3, -3, -2, 0, -2, -2, -3, -3},
    /*H*/ {-2, 0, 1, -1, -3, 0, 0, -2, 8, -3, -3, -1, -2, -1, -2, -1, -2, -2, 2, -3},
    /*I*/ {-1, -3, -3, -3, -1, -3, -3, -4, -3, 4, 2, -3, 1, 0, -3, -2, -1, -3, -1, 3},
    /*L*/ {-1, -2, -3, -4, -1, -2, -3, -4, -3, 2, 4, -2, 2, 0, -3, -2, -1, -2, -1, 1},
    /*K*/ {-1, 2, 0, -1, -3, 1, 1, -2, -1, -3, -2, 5, -1, -3, -1, 0, -1, -3, -2, -2},
    /*M*/ {-1, -1, -2, -3, -1, 0, -2, -3, -2, 1, 2, -1, 5, 0, -2, -1, -1, -1, -1, 1},
    /*F*/ {-2, -3, -3, -3, -2, -3, -3, -3, -1, 0, 0, -3, 0, 6, -4, -2, -2, 1, 3, -1},
    /*P*/ {-1, -2, -2, -1, -3, -1, -1, -2, -2, -3, -3, -1, -2, -4, 7, -1, -1, -4, -3, -2},
    /*S*/ {1, -1, 1, 0, -1, 0, 0, 0, -1, -2, -2, 0, -1, -2, -1, 4, 1, -3, -2, -2},
    /*T*/ {0, -1, 0, -1, -1, -1, -1, -2, -2, -1, -1, -1, -1, -2, -1, 1, 5, -2, -2, 0},
    /*W*/ {-3, -3, -4, -4, -2, -2, -3, -2, -2, -3, -2, -3, -1, 1, -4, -3, -2, 11, 2, -3},
    /*Y*/ {-2, -2, -2, -3, -2, -1, -2, -3, 2, -1, -1, -2, -1, 3, -3, -2, -2, 2, 7, -1},
    /*V*/ {0, -3, -3, -3, -1, -2, -2, -3, -3, 3, 1, -2, 1, -1, -2, -2, 0, -3, -1, 4}};

int code_to_index(char code) {
  for (int i = 0; i < 20; ++i) {
    if (kCodes[i] == code) return i;
  }
  return -1;
}

}  // namespace

AminoAcid AminoAcid::from_index(int index) {
  if (index < 0 || index >= kCount) {
    throw std::out_of_range("amino-acid index out of range: " + std::to_string(index));
  }
  return AminoAcid(index);
}

std::optional<AminoAcid> AminoAcid::from_code(char code) {
  if (code >= 'a' && code <= 'z') code = static_cast<char>(code - 'a' + 'A');
  int idx = code_to_index(code);
  if (idx < 0) return std::nullopt;
  return AminoAcid(idx);
}

std::optional<AminoAcid> AminoAcid::from_three_letter(std::string_view name) {
  for (int i = 0; i < kCount; ++i) {
    if (kThreeLetter[i] == name) return AminoAcid(i);
  }
  return std::nullopt;
}

char AminoAcid::code() const { return kCodes[index_]; }

const std::string& AminoAcid::three_letter() const { return kThreeLetter[index_]; }

const std::array<char, AminoAcid::kCount>& amino_acid_codes() { return kCodes; }

const std::array<std::array<int, 20>, 20>& blosum62() {
  // Reordered once from the canonical layout into AminoAcid index order.
  static const auto table = [] {
    std::array<std::array<int, 20>, 20> out{};
    std::array<int, 20> perm{};  // AminoAcid index -> row in kBlosumRaw
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 20; ++j) {
        if (kBlosumOrder[j] == kCodes[i]) perm[i] = j;
      }
    }
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 20; ++j) {
        out[i][j] = kBlosumRaw[perm[i]][perm[j]];
      }
    }
    return out;
  }();
  return table;
}

}  // namespace varscore
