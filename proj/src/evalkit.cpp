#include "lmvr/evalkit.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include "lmvr/error.hpp"
#include "lmvr/log.hpp"
#include "lmvr/utf8.hpp"

namespace lmvr {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::string strip_markers(std::string_view piece) {
  if (piece.starts_with('+')) piece.remove_prefix(1);
  if (piece.ends_with("@@")) piece.remove_suffix(2);
  return std::string(piece);
}

OverlapReport vocab_overlap(const std::set<std::string>& a,
                            const std::set<std::string>& b,
                            bool normalize_markers) {
  std::set<std::string> na;
  std::set<std::string> nb;
  if (normalize_markers) {
    for (const auto& s : a) na.insert(strip_markers(s));
    for (const auto& s : b) nb.insert(strip_markers(s));
  }
  const auto& sa = normalize_markers ? na : a;
  const auto& sb = normalize_markers ? nb : b;

  OverlapReport r;
  r.size_a = sa.size();
  r.size_b = sb.size();
  std::vector<std::string> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                        std::back_inserter(common));
  r.intersection = common.size();
  r.jaccard = ratio(r.intersection, r.size_a + r.size_b - r.intersection);
  r.contained_in_a = ratio(r.intersection, r.size_a);
  r.contained_in_b = ratio(r.intersection, r.size_b);
  if (sa.empty() || sb.empty()) {
    warn("empty vocabulary in overlap; containment reported as 1.0");
  }
  return r;
}

void OverlapReport::write(std::ostream& out) const {
  out << "size_a\t" << size_a << '\n'
      << "size_b\t" << size_b << '\n'
      << "intersection\t" << intersection << '\n'
      << "jaccard\t" << jaccard << '\n'
      << "contained_in_a\t" << contained_in_a << '\n'
      << "contained_in_b\t" << contained_in_b << '\n'
      << "different_jaccard\t" << 1.0 - jaccard << '\n'
      << "different_in_a\t" << 1.0 - contained_in_a << '\n'
      << "different_in_b\t" << 1.0 - contained_in_b << '\n';
}

std::set<std::string> read_vocab(std::istream& in) {
  std::set<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    // Accept "piece<TAB>count" as produced by frequency listings.
    const std::size_t tab = line.find('\t');
    if (tab != std::string::npos) line.resize(tab);
    while (!line.empty() && is_space(line.back())) line.pop_back();
    if (!line.empty()) vocab.insert(line);
  }
  return vocab;
}

std::vector<std::vector<std::string>> parse_segmented_line(std::string_view line,
                                                           MarkerScheme scheme) {
  std::vector<std::vector<std::string>> words;
  bool open = false;  // previous atat piece expects a continuation
  for (const auto token : split_whitespace(line)) {
    if (scheme == MarkerScheme::kPlusPrefix) {
      if (token.starts_with('+')) {
        if (words.empty() || token.size() == 1) {
          throw DataError("malformed continuation '" + std::string(token) + "'");
        }
        words.back().emplace_back(token);
      } else {
        words.push_back({std::string(token)});
      }
    } else {
      if (token == "@@") throw DataError("empty piece before '@@'");
      if (open) {
        words.back().emplace_back(token);
      } else {
        words.push_back({std::string(token)});
      }
      open = token.ends_with("@@");
    }
  }
  if (open) throw DataError("dangling '@@' continuation at end of line");
  return words;
}

SegmentationReport segmentation_report(std::istream& in, MarkerScheme scheme,
                                       std::size_t top_k) {
  SegmentationReport r;
  std::map<std::string, std::int64_t> freq;
  std::int64_t whole = 0;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::vector<std::string>> words;
    try {
      words = parse_segmented_line(line, scheme);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at line " +
                      std::to_string(line_no));
    }
    for (const auto& pieces : words) {
      ++r.words;
      r.pieces += static_cast<std::int64_t>(pieces.size());
      if (pieces.size() == 1) ++whole;
      for (const auto& p : pieces) ++freq[p];
    }
  }
  r.piece_types = freq.size();
  if (r.words > 0) {
    r.mean_pieces_per_word =
        static_cast<double>(r.pieces) / static_cast<double>(r.words);
    r.fraction_whole = static_cast<double>(whole) / static_cast<double>(r.words);
  }
  std::vector<std::pair<std::string, std::int64_t>> sorted(freq.begin(), freq.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (sorted.size() > top_k) sorted.resize(top_k);
  r.top_pieces = std::move(sorted);
  for (const auto& [piece, n] : freq) r.vocab.insert(piece);
  return r;
}

void SegmentationReport::write(std::ostream& out) const {
  out << "words\t" << words << '\n'
      << "pieces\t" << pieces << '\n'
      << "piece_types\t" << piece_types << '\n'
      << "mean_pieces_per_word\t" << mean_pieces_per_word << '\n'
      << "fraction_whole\t" << fraction_whole << '\n';
  for (const auto& [piece, n] : top_pieces) out << "top\t" << piece << '\t' << n << '\n';
}

std::vector<std::size_t> boundaries_of(const std::vector<std::string>& pieces) {
  std::vector<std::size_t> bounds;
  std::size_t pos = 0;
  for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
    pos += utf8::char_count(pieces[i]);
    bounds.push_back(pos);
  }
  return bounds;
}

BoundaryScore boundary_score(std::span<const SegmentedWord> predicted,
                             std::span<const SegmentedWord> gold) {
  if (predicted.size() != gold.size()) {
    throw DataError("predicted and gold word lists differ in length");
  }
  double hits = 0.0;
  double n_pred = 0.0;
  double n_gold = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const SegmentedWord& p = predicted[i];
    const SegmentedWord& g = gold[i];
    if (p.word != g.word) {
      throw DataError("word mismatch at position " + std::to_string(i) + ": '" +
                      p.word + "' vs '" + g.word + "'");
    }
    std::vector<std::size_t> pb = p.boundaries;
    std::vector<std::size_t> gb = g.boundaries;
    std::sort(pb.begin(), pb.end());
    std::sort(gb.begin(), gb.end());
    std::vector<std::size_t> common;
    std::set_intersection(pb.begin(), pb.end(), gb.begin(), gb.end(),
                          std::back_inserter(common));
    const double w = static_cast<double>(g.count);
    hits += w * static_cast<double>(common.size());
    n_pred += w * static_cast<double>(pb.size());
    n_gold += w * static_cast<double>(gb.size());
  }
  BoundaryScore s;
  s.precision = n_pred > 0 ? hits / n_pred : (n_gold > 0 ? 0.0 : 1.0);
  s.recall = n_gold > 0 ? hits / n_gold : (n_pred > 0 ? 0.0 : 1.0);
  s.f1 = (s.precision > 0 && s.recall > 0)
             ? 2 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

}  // namespace lmvr
