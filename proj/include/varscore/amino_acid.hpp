#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace varscore {

// One of the 20 canonical amino acids.
//
// The index order is alphabetical by single-letter code:
//   A C D E F G H I K L M N P Q R S T V W Y  ->  0..19
// This order is used everywhere a 20-vector or 20-column table is indexed
// (score matrices, confusion matrices, BLOSUM62, embeddings).
class AminoAcid {
 public:
  static constexpr int kCount = 20;

  AminoAcid() = default;

  static AminoAcid from_index(int index);
  static std::optional<AminoAcid> from_code(char code);
  static std::optional<AminoAcid> from_three_letter(std::string_view name);

  int index() const { return index_; }
  char code() const;
  const std::string& three_letter() const;

  friend bool operator==(AminoAcid a, AminoAcid b) { return a.index_ == b.index_; }
  friend bool operator!=(AminoAcid a, AminoAcid b) { return a.index_ != b.index_; }
  friend bool operator<(AminoAcid a, AminoAcid b) { return a.index_ < b.index_; }

 private:
  explicit AminoAcid(int index) : index_(index) {}
  int index_ = 0;
};

// Single-letter codes in index order.
const std::array<char, AminoAcid::kCount>& amino_acid_codes();

// BLOSUM62 substitution scores, rows and columns in AminoAcid index order.
const std::array<std::array<int, AminoAcid::kCount>, AminoAcid::kCount>& blosum62();

}  // namespace varscore
