#include "lmvr/corpus_io.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "lmvr/error.hpp"
#include "lmvr/utf8.hpp"

namespace lmvr {

void WordCounts::add(std::string_view word, std::int64_t count) {
  if (word.empty()) throw PreconditionError("empty word");
  if (count <= 0) throw PreconditionError("non-positive word count");
  auto it = entries_.find(word);
  if (it == entries_.end()) {
    entries_.emplace(std::string(word), count);
  } else {
    it->second += count;
  }
  total_tokens_ += count;
}

std::int64_t WordCounts::count(std::string_view word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? 0 : it->second;
}

MarkerScheme parse_marker_scheme(std::string_view name) {
  if (name == "plus") return MarkerScheme::kPlusPrefix;
  if (name == "atat") return MarkerScheme::kAtatSuffix;
  throw DataError("unknown marker scheme '" + std::string(name) +
                  "' (expected plus or atat)");
}

std::string_view marker_scheme_name(MarkerScheme scheme) {
  return scheme == MarkerScheme::kPlusPrefix ? "plus" : "atat";
}

Dampening parse_dampening(std::string_view name) {
  if (name == "none") return Dampening::kNone;
  if (name == "log") return Dampening::kLog;
  if (name == "ones") return Dampening::kOnes;
  throw DataError("unknown dampening mode '" + std::string(name) +
                  "' (expected none, log or ones)");
}

std::string_view dampening_name(Dampening mode) {
  switch (mode) {
    case Dampening::kNone: return "none";
    case Dampening::kLog: return "log";
    case Dampening::kOnes: return "ones";
  }
  return "none";
}

WordCounts dampen(const WordCounts& counts, Dampening mode) {
  if (mode == Dampening::kNone) return counts;
  WordCounts out;
  for (const auto& [word, c] : counts.entries()) {
    const std::int64_t d =
        mode == Dampening::kOnes
            ? 1
            : 1 + static_cast<std::int64_t>(
                      std::floor(std::log(static_cast<double>(c))));
    out.add(word, d);
  }
  return out;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

bool has_reserved_marker(std::string_view token) {
  return token.starts_with('+') || token.ends_with("@@");
}

WordCounts load_word_counts(std::istream& in, std::int64_t* line_count) {
  WordCounts counts;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto bad = utf8::find_invalid(line)) {
      throw DataError("invalid UTF-8 at line " + std::to_string(line_no) +
                      ", byte " + std::to_string(*bad));
    }
    for (const auto token : split_whitespace(line)) {
      if (has_reserved_marker(token)) {
        throw DataError("reserved marker in token '" + std::string(token) +
                        "' at line " + std::to_string(line_no));
      }
      counts.add(token);
    }
  }
  if (line_count != nullptr) *line_count = line_no;
  return counts;
}

CorpusStats corpus_stats(const WordCounts& counts, std::int64_t sentence_count) {
  CorpusStats stats;
  stats.sentences = sentence_count;
  stats.tokens = counts.total_tokens();
  stats.types = counts.total_types();
  if (stats.tokens == 0) return stats;
  double chars = 0.0;
  for (const auto& [word, c] : counts.entries()) {
    chars += static_cast<double>(c) * static_cast<double>(utf8::char_count(word));
  }
  stats.mean_word_length = chars / static_cast<double>(stats.tokens);
  return stats;
}

std::string convert_morph_analyses_line(std::string_view line) {
  std::string out;
  for (const auto token : split_whitespace(line)) {
    if (token.starts_with('+')) {
      throw DataError("analysis '" + std::string(token) + "' has an empty root");
    }
    if (!out.empty()) out.push_back(' ');
    std::size_t start = 0;
    bool first = true;
    while (true) {
      const std::size_t plus = token.find('+', start);
      const std::string_view part = token.substr(
          start, plus == std::string_view::npos ? std::string_view::npos
                                                : plus - start);
      if (part.empty()) {
        throw DataError("analysis '" + std::string(token) +
                        "' has an empty tag");
      }
      if (!first) out += " +";
      out += part;
      first = false;
      if (plus == std::string_view::npos) break;
      start = plus + 1;
    }
    out += ' ';
    out += kEndOfWord;
  }
  return out;
}

void convert_morph_analyses(std::istream& in, std::ostream& out) {
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      out << convert_morph_analyses_line(line) << '\n';
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at line " +
                      std::to_string(line_no));
    }
  }
}

std::string render_pieces(const std::vector<std::string>& pieces,
                          MarkerScheme scheme) {
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i > 0) out.push_back(' ');
    if (scheme == MarkerScheme::kPlusPrefix) {
      if (i > 0) out.push_back('+');
      out += pieces[i];
    } else {
      out += pieces[i];
      if (i + 1 < pieces.size()) out += "@@";
    }
  }
  return out;
}

std::string detokenize(std::string_view line, MarkerScheme scheme) {
  std::string out;
  out.reserve(line.size());
  std::size_t i = 0;
  while (i < line.size()) {
    if (is_space(line[i])) {
      out.push_back(line[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    std::string_view token = line.substr(i, j - i);
    if (scheme == MarkerScheme::kPlusPrefix) {
      if (token.starts_with('+')) {
        if (i < 2 || line[i - 1] != ' ' || is_space(line[i - 2])) {
          throw DataError("continuation token '" + std::string(token) +
                          "' does not follow a word");
        }
        out.pop_back();
        token.remove_prefix(1);
      }
      out += token;
      i = j;
    } else {
      if (token.ends_with("@@")) {
        if (j + 1 >= line.size() || line[j] != ' ' || is_space(line[j + 1])) {
          throw DataError("dangling continuation '" + std::string(token) +
                          "' at end of word sequence");
        }
        token.remove_suffix(2);
        out += token;
        i = j + 1;  // swallow the joining space
      } else {
        out += token;
        i = j;
      }
    }
  }
  return out;
}

}  // namespace lmvr
