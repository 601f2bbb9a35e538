#include "varscore/pdb.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "varscore/errors.hpp"

namespace varscore {

namespace {

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view field(std::string_view line, std::size_t start, std::size_t len) {
  if (start >= line.size()) return {};
  return line.substr(start, std::min(len, line.size() - start));
}

double parse_double_field(std::string_view raw, const char* what, std::size_t line_no) {
  std::string_view s = trimmed(raw);
  if (s.empty()) throw ParseError(std::string("empty ") + what + " field", line_no);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(std::string("cannot parse ") + what + " '" + std::string(s) + "'", line_no);
  }
  if (!std::isfinite(value)) {
    throw ParseError(std::string("non-finite ") + what, line_no);
  }
  return value;
}

int parse_int_field(std::string_view raw, const char* what, std::size_t line_no) {
  std::string_view s = trimmed(raw);
  if (s.empty()) throw ParseError(std::string("empty ") + what + " field", line_no);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(std::string("cannot parse ") + what + " '" + std::string(s) + "'", line_no);
  }
  return value;
}

bool is_water(std::string_view res) {
  return res == "HOH" || res == "WAT" || res == "H2O" || res == "DOD" || res == "SOL";
}

// Element from columns 77-78 when present, else derived from the atom name
// (leading digits stripped; canonical residues carry only C/N/O/S heavy atoms).
std::string element_of(std::string_view line, std::string_view atom_name) {
  std::string_view col = trimmed(field(line, 76, 2));
  if (!col.empty()) {
    std::string e(col);
    for (auto& c : e) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return e;
  }
  for (char c : atom_name) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  return "X";
}

}  // namespace

std::vector<Atom> parse_structure(std::string_view content, StructureFormat format,
                                  ParseStats* stats) {
  (void)format;  // single supported format
  ParseStats local;
  ParseStats& st = stats ? *stats : local;
  st = ParseStats{};

  struct RawAtom {
    Atom atom;
    int res_seq;
    char icode;
  };
  std::vector<RawAtom> raw;
  // (chain, resSeq, icode, atom name) already seen; first occurrence wins.
  std::set<std::tuple<char, int, char, std::string>> seen;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    std::string_view line = content.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                              : eol - pos);
    pos = eol == std::string_view::npos ? content.size() : eol + 1;
    ++line_no;

    std::string_view record = field(line, 0, 6);
    if (record.substr(0, 6) == "HETATM") {
      ++st.skipped_hetatm;
      continue;
    }
    if (record.substr(0, 4) != "ATOM" || trimmed(record) != "ATOM") continue;

    ++st.atom_records;
    if (line.size() < 54) throw ParseError("ATOM record too short", line_no);

    std::string res_name(trimmed(field(line, 17, 3)));
    if (is_water(res_name)) {
      ++st.skipped_hetatm;
      continue;
    }
    auto residue_type = AminoAcid::from_three_letter(res_name);
    if (!residue_type) {
      ++st.skipped_nonstandard;
      continue;
    }

    std::string atom_name(trimmed(field(line, 12, 4)));
    std::string element = element_of(line, atom_name);
    if (element == "H" || element == "D") {
      ++st.skipped_hydrogen;
      continue;
    }

    char chain = line.size() > 21 ? line[21] : ' ';
    if (chain == ' ') chain = 'A';
    int res_seq = parse_int_field(field(line, 22, 4), "residue sequence number", line_no);
    char icode = line.size() > 26 ? line[26] : ' ';

    if (!seen.insert({chain, res_seq, icode, atom_name}).second) {
      ++st.skipped_altloc;
      continue;
    }

    Atom atom;
    atom.element = std::move(element);
    atom.name = std::move(atom_name);
    atom.coords = Eigen::Vector3d(parse_double_field(field(line, 30, 8), "x coordinate", line_no),
                                  parse_double_field(field(line, 38, 8), "y coordinate", line_no),
                                  parse_double_field(field(line, 46, 8), "z coordinate", line_no));
    atom.chain_id = chain;
    atom.residue_type = *residue_type;
    raw.push_back({std::move(atom), res_seq, icode});
  }

  if (raw.empty()) {
    throw EmptyStructureError("no standard amino-acid ATOM records found");
  }

  // Assign residue indices. Plain residues keep their author numbering;
  // insertion-coded residues are appended after the chain's last plain number
  // in order of first appearance.
  std::map<char, int> chain_max;
  for (const auto& r : raw) {
    if (r.icode == ' ') {
      auto [it, inserted] = chain_max.try_emplace(r.atom.chain_id, r.res_seq);
      if (!inserted) it->second = std::max(it->second, r.res_seq);
    }
  }
  std::map<std::tuple<char, int, char>, int> icode_index;
  std::vector<Atom> atoms;
  atoms.reserve(raw.size());
  for (auto& r : raw) {
    if (r.icode == ' ') {
      r.atom.residue_index = r.res_seq;
    } else {
      auto key = std::make_tuple(r.atom.chain_id, r.res_seq, r.icode);
      auto it = icode_index.find(key);
      if (it == icode_index.end()) {
        int next = ++chain_max[r.atom.chain_id];
        it = icode_index.emplace(key, next).first;
        ++st.insertion_coded;
      }
      r.atom.residue_index = it->second;
    }
    atoms.push_back(std::move(r.atom));
  }
  return atoms;
}

std::string to_pdb(const std::vector<Atom>& atoms) {
  std::string out;
  out.reserve(atoms.size() * 81);
  char buf[96];
  int serial = 0;
  for (const auto& a : atoms) {
    ++serial;
    // Names shorter than four characters start in column 14, matching convention.
    std::string name = a.name.size() < 4 ? " " + a.name : a.name;
    std::snprintf(buf, sizeof(buf), "ATOM  %5d %-4s %3s %c%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2s\n",
                  serial, name.c_str(), a.residue_type.three_letter().c_str(), a.chain_id,
                  a.residue_index, a.coords.x(), a.coords.y(), a.coords.z(), a.element.c_str());
    out += buf;
  }
  out += "END\n";
  return out;
}

}  // namespace varscore
