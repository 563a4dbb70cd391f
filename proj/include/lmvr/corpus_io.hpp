#ifndef LMVR_CORPUS_IO_HPP
#define LMVR_CORPUS_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lmvr {

/// Multiset of word types with token frequencies. Iteration is in byte order
/// of the word, which keeps everything downstream deterministic.
class WordCounts {
 public:
  using Map = std::map<std::string, std::int64_t, std::less<>>;

  /// Adds `count` (> 0) occurrences. The word must be non-empty and free of
  /// whitespace; reserved markers are checked by the loaders, not here.
  void add(std::string_view word, std::int64_t count = 1);

  std::int64_t count(std::string_view word) const;
  const Map& entries() const { return entries_; }
  std::int64_t total_tokens() const { return total_tokens_; }
  std::int64_t total_types() const {
    return static_cast<std::int64_t>(entries_.size());
  }
  bool empty() const { return entries_.empty(); }

  friend bool operator==(const WordCounts&, const WordCounts&) = default;

 private:
  Map entries_;
  std::int64_t total_tokens_ = 0;
};

struct CorpusStats {
  std::int64_t sentences = 0;
  std::int64_t tokens = 0;
  std::int64_t types = 0;
  double mean_word_length = 0.0;  // code points per token
};

enum class MarkerScheme { kPlusPrefix, kAtatSuffix };

/// "plus" or "atat"; throws DataError otherwise.
MarkerScheme parse_marker_scheme(std::string_view name);
std::string_view marker_scheme_name(MarkerScheme scheme);

enum class Dampening { kNone, kLog, kOnes };

Dampening parse_dampening(std::string_view name);
std::string_view dampening_name(Dampening mode);

/// c -> c, 1 + floor(ln c), or 1.
WordCounts dampen(const WordCounts& counts, Dampening mode);

bool is_space(char c);

/// Splits on ASCII whitespace, dropping empty tokens.
std::vector<std::string_view> split_whitespace(std::string_view line);

/// True if `token` starts with '+' or ends with "@@".
bool has_reserved_marker(std::string_view token);

/// Reads whitespace-separated tokens. Throws DataError on invalid UTF-8 or on
/// a token carrying a reserved marker, naming the token and 1-based line.
/// If `line_count` is given it receives the number of lines read.
WordCounts load_word_counts(std::istream& in,
                            std::int64_t* line_count = nullptr);

CorpusStats corpus_stats(const WordCounts& counts, std::int64_t sentence_count);

/// One line of `root+Tag+Tag` tokens to `root +Tag +Tag <EOW>` form.
std::string convert_morph_analyses_line(std::string_view line);
void convert_morph_analyses(std::istream& in, std::ostream& out);

inline constexpr std::string_view kEndOfWord = "<EOW>";

/// Renders one word's pieces with continuation markers. A single piece is
/// emitted bare.
std::string render_pieces(const std::vector<std::string>& pieces,
                          MarkerScheme scheme);

/// Inverse of render_pieces applied token-wise to a whole line. Whitespace
/// not introduced by segmentation is preserved byte for byte.
std::string detokenize(std::string_view segmented_line, MarkerScheme scheme);

/// Rewrites every whitespace-delimited token of `line` with `fn`, keeping the
/// separators exactly as they were.
template <typename Fn>
std::string map_tokens(std::string_view line, Fn&& fn) {
  std::string out;
  out.reserve(line.size() * 2);
  std::size_t i = 0;
  while (i < line.size()) {
    if (is_space(line[i])) {
      out.push_back(line[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    out += fn(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace lmvr

#endif  // LMVR_CORPUS_IO_HPP
