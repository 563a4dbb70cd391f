#ifndef LMVR_BPE_HPP
#define LMVR_BPE_HPP

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lmvr/corpus_io.hpp"

namespace lmvr {

struct MergeRule {
  std::string left;
  std::string right;

  friend bool operator==(const MergeRule&, const MergeRule&) = default;
  friend auto operator<=>(const MergeRule&, const MergeRule&) = default;
};

/// Ordered merge rules; position in the list is the application priority.
/// Immutable once constructed, so concurrent apply calls are safe.
class BpeModel {
 public:
  static constexpr std::string_view kMagic = "BPE1";
  /// Internal terminal symbol; never appears in segmented output.
  static constexpr std::string_view kEndOfWord = "</w>";

  BpeModel() = default;
  /// Throws DataError on a duplicate rule.
  explicit BpeModel(std::vector<MergeRule> merges);

  const std::vector<MergeRule>& merges() const { return merges_; }

  /// Pieces of one word, without continuation markers.
  std::vector<std::string> segment_word(std::string_view word) const;

  void save(std::ostream& out) const;
  static BpeModel load(std::istream& in);

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<std::string, std::string>& p) const;
  };

  std::vector<MergeRule> merges_;
  std::unordered_map<std::pair<std::string, std::string>, std::size_t, PairHash>
      rank_;
};

struct BpeLearnOptions {
  /// Learning stops once the best pair occurs fewer times than this.
  std::int64_t min_frequency = 2;
};

/// Greedy BPE over token-weighted counts. Each word starts as its characters
/// followed by </w>. Ties on count go to the lexicographically smallest
/// (left, right). If `merge_counts` is given it receives the count of each
/// chosen pair at the time it was merged. Throws DataError on empty counts.
BpeModel learn_bpe(const WordCounts& counts, std::size_t n_merges,
                   const BpeLearnOptions& options = {},
                   std::vector<std::int64_t>* merge_counts = nullptr);

/// Segments every token of `line` with "@@" continuation markers, keeping the
/// original whitespace.
std::string apply_bpe(std::string_view line, const BpeModel& model);

/// Distinct marker-annotated pieces produced on the word types of `counts`.
std::set<std::string> bpe_vocab(const BpeModel& model, const WordCounts& counts);

}  // namespace lmvr

#endif  // LMVR_BPE_HPP
