#ifndef LMVR_TESTS_SYNTHETIC_CORPUS_HPP
#define LMVR_TESTS_SYNTHETIC_CORPUS_HPP

// Generator for an agglutinative toy language: every word is one stem
// followed by one suffix, so the gold segmentation is known exactly.

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lmvr/corpus_io.hpp"
#include "lmvr/evalkit.hpp"

namespace lmvr::testing {

struct SyntheticWord {
  std::string stem;
  std::string suffix;
  std::string word() const { return stem + suffix; }
};

struct SyntheticCorpus {
  std::vector<std::string> stems;
  std::vector<std::string> suffixes;
  std::vector<SyntheticWord> words;       // one per type
  std::vector<std::int64_t> counts;       // parallel to words
  WordCounts word_counts;

  std::vector<SegmentedWord> gold() const {
    std::vector<SegmentedWord> out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      out.push_back({words[i].word(), counts[i], {words[i].stem.size()}});
    }
    return out;
  }
};

namespace detail {

inline std::string random_syllables(std::mt19937& rng, std::size_t length,
                                    bool start_with_vowel) {
  static const std::string consonants = "bcdfghjklmnprstvyz";
  static const std::string vowels = "aeiou";
  std::string s;
  bool vowel = start_with_vowel;
  for (std::size_t i = 0; i < length; ++i) {
    const std::string& pool = vowel ? vowels : consonants;
    s.push_back(pool[rng() % pool.size()]);
    vowel = !vowel;
  }
  return s;
}

}  // namespace detail

/// 50 stems x 30 suffixes = 1500 word types with Zipf-like token counts
/// totalling roughly 50k tokens.
inline SyntheticCorpus make_synthetic_corpus(std::uint32_t seed = 20170901,
                                             std::size_t n_stems = 50,
                                             std::size_t n_suffixes = 30,
                                             double target_tokens = 50000.0,
                                             double zipf_exponent = 1.0) {
  std::mt19937 rng(seed);
  SyntheticCorpus c;
  std::set<std::string> used;
  while (c.stems.size() < n_stems) {
    const std::size_t len = 4 + rng() % 4;  // 4..7
    std::string s = detail::random_syllables(rng, len, false);
    if (used.insert(s).second) c.stems.push_back(s);
  }
  while (c.suffixes.size() < n_suffixes) {
    const std::size_t len = 2 + rng() % 3;  // 2..4
    std::string s = detail::random_syllables(rng, len, rng() % 2 == 0);
    if (used.insert(s).second) c.suffixes.push_back(s);
  }

  double norm = 0.0;
  for (std::size_t i = 0; i < n_stems; ++i) {
    for (std::size_t j = 0; j < n_suffixes; ++j) {
      norm += 1.0 / std::pow((i + 1.0) * (j + 1.0), zipf_exponent);
    }
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < n_stems; ++i) {
    for (std::size_t j = 0; j < n_suffixes; ++j) {
      SyntheticWord w{c.stems[i], c.suffixes[j]};
      if (!seen.insert(w.word()).second) continue;  // accidental homograph
      const double weight = 1.0 / std::pow((i + 1.0) * (j + 1.0), zipf_exponent);
      const auto count = 1 + static_cast<std::int64_t>(target_tokens * weight / norm);
      c.words.push_back(w);
      c.counts.push_back(count);
      c.word_counts.add(w.word(), count);
    }
  }
  return c;
}

}  // namespace lmvr::testing

#endif  // LMVR_TESTS_SYNTHETIC_CORPUS_HPP
