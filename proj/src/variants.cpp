#include "varscore/variants.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>

#include "varscore/errors.hpp"
#include "varscore/parallel.hpp"

namespace varscore {

namespace {

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = line.find(sep, start);
    if (at == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, at - start));
    start = at + 1;
  }
}

double parse_double(std::string_view s, std::size_t line_no, const char* what) {
  s = trimmed(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(std::string("cannot parse ") + what + " '" + std::string(s) + "'", line_no);
  }
  return v;
}

int parse_int(std::string_view s, std::size_t line_no, const char* what) {
  s = trimmed(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(std::string("cannot parse ") + what + " '" + std::string(s) + "'", line_no);
  }
  return v;
}

AminoAcid parse_aa(std::string_view s, std::size_t line_no) {
  s = trimmed(s);
  if (s.size() == 1) {
    if (auto aa = AminoAcid::from_code(s.front())) return *aa;
  }
  throw ParseError("'" + std::string(s) + "' is not an amino-acid code", line_no);
}

std::vector<RankedMutation> with_ranks(std::vector<RankedMutation> items) {
  for (std::size_t i = 0; i < items.size(); ++i) items[i].rank = static_cast<int>(i) + 1;
  return items;
}

}  // namespace

std::string EnvironmentMode::str() const {
  if (!local) return "full";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "local:%g", radius);
  return buf;
}

bool ScoreMatrix::correct(int row) const {
  const Eigen::Index r = row;
  int best = 0;
  for (int a = 1; a < AminoAcid::kCount; ++a) {
    if (scores(r, a) > scores(r, best)) best = a;
  }
  return best == wildtype[static_cast<std::size_t>(row)].index();
}

int ScoreMatrix::row_of(int position) const {
  const auto it = std::lower_bound(positions.begin(), positions.end(), position);
  if (it == positions.end() || *it != position) return -1;
  return static_cast<int>(it - positions.begin());
}

ScoreMatrix score_structure(const ScorerParams& params, const AtomicGraph& graph,
                            EnvironmentMode mode, bool parallel) {
  if (graph.ca_index.empty()) {
    throw EmptyStructureError("structure has no residues with an alpha carbon");
  }
  if (mode.local && !(mode.radius > 0.0)) {
    throw ConfigError("local environment radius must be positive");
  }

  ScoreMatrix out;
  out.environment_mode = mode.str();
  for (const auto& [position, atom] : graph.ca_index) {
    (void)atom;
    out.positions.push_back(position);
  }
  const auto n = static_cast<std::int64_t>(out.positions.size());
  out.wildtype.resize(static_cast<std::size_t>(n), AminoAcid::from_index(0));
  out.scores.resize(n, AminoAcid::kCount);

  parallel_for(
      n,
      [&](std::int64_t i) {
        const int position = out.positions[static_cast<std::size_t>(i)];
        MaskedGraph masked;
        if (mode.local) {
          auto env = extract_local_environment(graph, position, mode.radius);
          masked = mask_residue(build_atomic_graph(std::move(env), graph.cutoff,
                                                   /*parallel=*/false),
                                position);
        } else {
          masked = mask_residue(graph, position);
        }
        out.wildtype[static_cast<std::size_t>(i)] = masked.true_label;
        out.scores.row(i) = forward(params, masked).scores.transpose();
      },
      parallel);
  return out;
}

std::vector<CandidateMutation> generate_mutations(const ScoreMatrix& matrix,
                                                  const DmsAssay& assay, bool filter_wrong) {
  // Wildtype agreement on all shared positions, reported in one pass.
  std::set<int> offending;
  for (const auto& r : assay.records) {
    const int row = matrix.row_of(r.position);
    if (row < 0) continue;
    if (matrix.wildtype[static_cast<std::size_t>(row)] != r.wildtype) offending.insert(r.position);
  }
  if (!offending.empty()) {
    throw AlignmentError("assay and structure disagree on the wildtype",
                         std::vector<int>(offending.begin(), offending.end()));
  }

  std::vector<CandidateMutation> out;
  for (const auto& r : assay.records) {
    const int row = matrix.row_of(r.position);
    if (row < 0) continue;
    if (r.mutant == r.wildtype) continue;
    if (filter_wrong && !matrix.correct(row)) continue;
    CandidateMutation c;
    c.position = r.position;
    c.wildtype = r.wildtype;
    c.mutant = r.mutant;
    c.score = matrix.scores(row, r.mutant.index());
    c.self_score = matrix.scores(row, r.wildtype.index());
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const CandidateMutation& a, const CandidateMutation& b) {
    if (a.position != b.position) return a.position < b.position;
    return a.mutant.index() < b.mutant.index();
  });
  return out;
}

std::vector<RankedMutation> rank_global(const std::vector<CandidateMutation>& candidates) {
  if (candidates.empty()) throw ValidationError("nothing to rank");
  std::vector<RankedMutation> items;
  items.reserve(candidates.size());
  for (const auto& c : candidates) {
    items.push_back({0, c.position, c.wildtype, c.mutant, c.score, c.self_score});
  }
  std::sort(items.begin(), items.end(), [](const RankedMutation& a, const RankedMutation& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.position != b.position) return a.position < b.position;
    return a.mutant.index() < b.mutant.index();
  });
  return with_ranks(std::move(items));
}

std::vector<RankedMutation> rank_positional(const std::vector<CandidateMutation>& candidates,
                                            double epsilon) {
  if (candidates.empty()) throw ValidationError("nothing to rank");
  if (epsilon < 0.0) throw ConfigError("epsilon must be non-negative");

  // Top 3 per position, ordered by score descending inside the position.
  std::map<int, std::vector<CandidateMutation>> by_position;
  for (const auto& c : candidates) by_position[c.position].push_back(c);
  std::vector<CandidateMutation> kept;
  for (auto& [position, list] : by_position) {
    (void)position;
    std::sort(list.begin(), list.end(), [](const CandidateMutation& a, const CandidateMutation& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.mutant.index() < b.mutant.index();
    });
    if (list.size() > 3) list.resize(3);
    kept.insert(kept.end(), list.begin(), list.end());
  }

  // Epsilon-cluster the self-scores so "equal" stays a transitive relation.
  std::vector<double> selfs;
  selfs.reserve(kept.size());
  for (const auto& c : kept) selfs.push_back(c.self_score);
  std::sort(selfs.begin(), selfs.end());
  selfs.erase(std::unique(selfs.begin(), selfs.end()), selfs.end());
  std::vector<int> cluster_of_value(selfs.size(), 0);
  int cluster = 0;
  for (std::size_t i = 1; i < selfs.size(); ++i) {
    if (selfs[i] - selfs[i - 1] > epsilon) ++cluster;
    cluster_of_value[i] = cluster;
  }
  auto cluster_of = [&](double v) {
    const auto it = std::lower_bound(selfs.begin(), selfs.end(), v);
    return cluster_of_value[static_cast<std::size_t>(it - selfs.begin())];
  };

  std::vector<RankedMutation> items;
  items.reserve(kept.size());
  for (const auto& c : kept) {
    items.push_back({0, c.position, c.wildtype, c.mutant, c.score, c.self_score});
  }
  std::sort(items.begin(), items.end(), [&](const RankedMutation& a, const RankedMutation& b) {
    const int ca = cluster_of(a.self_score), cb = cluster_of(b.self_score);
    if (ca != cb) return ca < cb;  // lower self-score first
    if (a.score != b.score) return a.score > b.score;
    if (a.position != b.position) return a.position < b.position;
    return a.mutant.index() < b.mutant.index();
  });
  return with_ranks(std::move(items));
}

std::string score_matrix_to_csv(const ScoreMatrix& matrix) {
  std::string out = "position,wt_aa";
  for (const auto& code : amino_acid_codes()) {
    out.push_back(',');
    out.push_back(code);
  }
  out.push_back('\n');
  char buf[40];
  for (Eigen::Index i = 0; i < matrix.scores.rows(); ++i) {
    out += std::to_string(matrix.positions[static_cast<std::size_t>(i)]);
    out.push_back(',');
    out.push_back(matrix.wildtype[static_cast<std::size_t>(i)].code());
    for (int a = 0; a < AminoAcid::kCount; ++a) {
      std::snprintf(buf, sizeof(buf), ",%.17g", matrix.scores(i, a));
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

ScoreMatrix score_matrix_from_csv(std::string_view csv) {
  ScoreMatrix out;
  std::vector<std::array<double, 20>> rows;
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

    auto fields = split(line, ',');
    if (!header_seen) {
      if (fields.size() != 22 || trimmed(fields[0]) != "position" || trimmed(fields[1]) != "wt_aa") {
        throw ParseError("bad score-matrix header", line_no);
      }
      for (int a = 0; a < AminoAcid::kCount; ++a) {
        if (trimmed(fields[static_cast<std::size_t>(a) + 2]) !=
            std::string_view(&amino_acid_codes()[static_cast<std::size_t>(a)], 1)) {
          throw ParseError("score-matrix columns must list the 20 amino acids in order", line_no);
        }
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 22) {
      throw ParseError("expected 22 fields, got " + std::to_string(fields.size()), line_no);
    }
    out.positions.push_back(parse_int(fields[0], line_no, "position"));
    out.wildtype.push_back(parse_aa(fields[1], line_no));
    std::array<double, 20> row{};
    for (int a = 0; a < AminoAcid::kCount; ++a) {
      row[static_cast<std::size_t>(a)] =
          parse_double(fields[static_cast<std::size_t>(a) + 2], line_no, "score");
    }
    rows.push_back(row);
  }
  if (!header_seen) throw ParseError("missing score-matrix header", line_no);
  if (!std::is_sorted(out.positions.begin(), out.positions.end())) {
    throw ValidationError("score-matrix positions must be ascending");
  }
  out.scores.resize(static_cast<Eigen::Index>(rows.size()), AminoAcid::kCount);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int a = 0; a < AminoAcid::kCount; ++a) {
      out.scores(static_cast<Eigen::Index>(i), a) = rows[i][static_cast<std::size_t>(a)];
    }
  }
  return out;
}

std::string ranked_to_tsv(const std::vector<RankedMutation>& ranking) {
  std::string out = "rank\tposition\twt\tmut\tscore\tself_score\n";
  char buf[96];
  for (const auto& r : ranking) {
    std::snprintf(buf, sizeof(buf), "%d\t%d\t%c\t%c\t%.17g\t%.17g\n", r.rank, r.position,
                  r.wildtype.code(), r.mutant.code(), r.score, r.self_score);
    out += buf;
  }
  return out;
}

std::vector<RankedMutation> ranked_from_tsv(std::string_view tsv) {
  std::vector<RankedMutation> out;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < tsv.size()) {
    const std::size_t eol = tsv.find('\n', pos);
    std::string_view line =
        tsv.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? tsv.size() : eol + 1;
    ++line_no;
    line = trimmed(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "rank\tposition\twt\tmut\tscore\tself_score") {
        throw ParseError("bad ranking header", line_no);
      }
      header_seen = true;
      continue;
    }
    auto fields = split(line, '\t');
    if (fields.size() != 6) throw ParseError("expected 6 fields", line_no);
    RankedMutation r;
    r.rank = parse_int(fields[0], line_no, "rank");
    r.position = parse_int(fields[1], line_no, "position");
    r.wildtype = parse_aa(fields[2], line_no);
    r.mutant = parse_aa(fields[3], line_no);
    r.score = parse_double(fields[4], line_no, "score");
    r.self_score = parse_double(fields[5], line_no, "self_score");
    out.push_back(r);
  }
  if (!header_seen) throw ParseError("missing ranking header", line_no);
  return out;
}

}  // namespace varscore
