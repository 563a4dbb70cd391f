#ifndef LMVR_EVALKIT_HPP
#define LMVR_EVALKIT_HPP

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lmvr/corpus_io.hpp"

namespace lmvr {

struct OverlapReport {
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  std::size_t intersection = 0;
  double jaccard = 0.0;
  double contained_in_a = 0.0;  // |A n B| / |A|
  double contained_in_b = 0.0;  // |A n B| / |B|

  void write(std::ostream& out) const;
};

/// Drops a leading '+' and a trailing "@@".
std::string strip_markers(std::string_view piece);

/// Set overlap of two vocabularies. With `normalize_markers` both sides are
/// compared after strip_markers. An empty side gets containment 1.0 and a
/// warning.
OverlapReport vocab_overlap(const std::set<std::string>& a,
                            const std::set<std::string>& b,
                            bool normalize_markers = false);

/// One vocabulary entry per non-empty line.
std::set<std::string> read_vocab(std::istream& in);

/// Groups the tokens of a segmented line into words. Pieces keep their
/// markers. Throws DataError on a continuation with nothing to attach to.
std::vector<std::vector<std::string>> parse_segmented_line(std::string_view line,
                                                           MarkerScheme scheme);

struct SegmentationReport {
  std::int64_t words = 0;
  std::int64_t pieces = 0;
  std::size_t piece_types = 0;
  double mean_pieces_per_word = 0.0;
  double fraction_whole = 0.0;
  std::vector<std::pair<std::string, std::int64_t>> top_pieces;
  std::set<std::string> vocab;

  void write(std::ostream& out) const;
};

SegmentationReport segmentation_report(std::istream& in, MarkerScheme scheme,
                                       std::size_t top_k = 10);

struct BoundaryScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// A word with its internal boundary positions (code-point offsets).
struct SegmentedWord {
  std::string word;
  std::int64_t count = 1;
  std::vector<std::size_t> boundaries;
};

/// Internal boundary offsets of the concatenation of `pieces`.
std::vector<std::size_t> boundaries_of(const std::vector<std::string>& pieces);

/// Micro-averaged, token-weighted boundary precision and recall. Both lists
/// must name the same words in the same order (DataError otherwise). A
/// metric with an empty denominator is 1 when the other side is empty too,
/// else 0.
BoundaryScore boundary_score(std::span<const SegmentedWord> predicted,
                             std::span<const SegmentedWord> gold);

}  // namespace lmvr

#endif  // LMVR_EVALKIT_HPP
