#include "varscore/dms.hpp"

#include <charconv>
#include <cstdio>
#include <set>

#include "varscore/errors.hpp"

namespace varscore {

namespace {

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, std::size_t line_no, const char* what) {
  s = trimmed(s);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(std::string("cannot parse ") + what + " '" + std::string(s) + "'", line_no);
  }
  return value;
}

DmsRecord parse_mutant_token(std::string_view token, std::size_t line_no) {
  token = trimmed(token);
  if (token.size() < 3) throw ParseError("mutant token '" + std::string(token) + "' too short", line_no);
  auto wt = AminoAcid::from_code(token.front());
  auto mut = AminoAcid::from_code(token.back());
  if (!wt) throw ParseError("'" + std::string(1, token.front()) + "' is not an amino acid", line_no);
  if (!mut) throw ParseError("'" + std::string(1, token.back()) + "' is not an amino acid", line_no);
  const std::string_view digits = token.substr(1, token.size() - 2);
  int position = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), position);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || position < 1) {
    throw ParseError("bad position in mutant token '" + std::string(token) + "'", line_no);
  }
  return {position, *wt, *mut, 0.0};
}

}  // namespace

std::string taxon_name(Taxon t) {
  switch (t) {
    case Taxon::human: return "human";
    case Taxon::eukaryote: return "eukaryote";
    case Taxon::prokaryote: return "prokaryote";
    case Taxon::virus: return "virus";
    case Taxon::unknown: return "unknown";
  }
  return "unknown";
}

Taxon taxon_from_name(std::string_view name) {
  for (Taxon t : {Taxon::human, Taxon::eukaryote, Taxon::prokaryote, Taxon::virus}) {
    if (name == taxon_name(t)) return t;
  }
  return Taxon::unknown;
}

std::optional<AminoAcid> DmsAssay::wildtype_at(int position) const {
  if (position >= 1 && position <= static_cast<int>(sequence.size())) {
    return sequence[static_cast<std::size_t>(position - 1)];
  }
  for (const auto& r : records) {
    if (r.position == position) return r.wildtype;
  }
  return std::nullopt;
}

DmsAssay parse_dms(std::string_view csv) {
  DmsAssay assay;
  std::set<std::pair<int, int>> seen;  // (position, mutant index)
  bool header_seen = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t eol = csv.find('\n', pos);
    std::string_view line =
        csv.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? csv.size() : eol + 1;
    ++line_no;
    line = trimmed(line);
    if (line.empty()) continue;

    if (line.front() == '#') {
      std::string_view body = trimmed(line.substr(1));
      const std::size_t colon = body.find(':');
      if (colon == std::string_view::npos) continue;
      const std::string_view key = trimmed(body.substr(0, colon));
      const std::string_view value = trimmed(body.substr(colon + 1));
      if (key == "id") {
        assay.id = std::string(value);
      } else if (key == "sequence") {
        assay.sequence.clear();
        for (char c : value) {
          auto aa = AminoAcid::from_code(c);
          if (!aa) throw ParseError("sequence contains non-amino-acid '" + std::string(1, c) + "'", line_no);
          assay.sequence.push_back(*aa);
        }
      } else if (key == "wt_reference") {
        assay.wt_reference = parse_number(value, line_no, "wt_reference");
      } else if (key == "taxon") {
        assay.taxon = taxon_from_name(value);
      }
      continue;
    }

    if (!header_seen) {
      if (trimmed(line) != "mutant,DMS_score") {
        throw ParseError("expected header 'mutant,DMS_score', got '" + std::string(line) + "'",
                         line_no);
      }
      header_seen = true;
      continue;
    }

    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw ParseError("row has no comma separator", line_no);
    }
    const std::string_view token = trimmed(line.substr(0, comma));
    if (token.find(':') != std::string_view::npos) {
      ++assay.skipped_multi;
      continue;
    }
    DmsRecord record = parse_mutant_token(token, line_no);
    record.fitness = parse_number(line.substr(comma + 1), line_no, "DMS_score");

    if (!assay.sequence.empty()) {
      if (record.position > static_cast<int>(assay.sequence.size())) {
        throw ValidationError("position " + std::to_string(record.position) +
                              " lies beyond the declared sequence");
      }
      if (assay.sequence[static_cast<std::size_t>(record.position - 1)] != record.wildtype) {
        throw ValidationError("row " + std::to_string(line_no) + ": wildtype '" +
                              std::string(1, record.wildtype.code()) +
                              "' disagrees with the declared sequence at position " +
                              std::to_string(record.position));
      }
    } else {
      // No declared sequence: records covering a position must agree.
      for (const auto& prev : assay.records) {
        if (prev.position == record.position && prev.wildtype != record.wildtype) {
          throw ValidationError("conflicting wildtype letters at position " +
                                std::to_string(record.position));
        }
      }
    }
    if (!seen.insert({record.position, record.mutant.index()}).second) {
      throw ValidationError("duplicate mutation " + std::string(1, record.wildtype.code()) +
                            std::to_string(record.position) + std::string(1, record.mutant.code()));
    }
    assay.records.push_back(record);
  }

  if (!header_seen) throw ParseError("missing 'mutant,DMS_score' header", line_no);
  return assay;
}

std::string to_dms_csv(const DmsAssay& assay) {
  std::string out;
  char buf[64];
  if (!assay.id.empty()) out += "# id: " + assay.id + "\n";
  if (!assay.sequence.empty()) {
    out += "# sequence: ";
    for (const auto& aa : assay.sequence) out.push_back(aa.code());
    out += "\n";
  }
  std::snprintf(buf, sizeof(buf), "%.17g", assay.wt_reference);
  out += "# wt_reference: " + std::string(buf) + "\n";
  out += "# taxon: " + taxon_name(assay.taxon) + "\n";
  out += "mutant,DMS_score\n";
  for (const auto& r : assay.records) {
    std::snprintf(buf, sizeof(buf), "%c%d%c,%.17g\n", r.wildtype.code(), r.position,
                  r.mutant.code(), r.fitness);
    out += buf;
  }
  return out;
}

}  // namespace varscore
