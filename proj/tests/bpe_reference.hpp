#ifndef LMVR_TESTS_BPE_REFERENCE_HPP
#define LMVR_TESTS_BPE_REFERENCE_HPP

// Slow, obviously-correct BPE learner: recounts every adjacent pair from
// scratch at each step.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lmvr/bpe.hpp"
#include "lmvr/utf8.hpp"

namespace lmvr::testing {

struct ReferenceStep {
  MergeRule rule;
  std::int64_t count = 0;
  std::int64_t best_count = 0;  // maximum over all pairs at that step
};

inline std::vector<ReferenceStep> reference_bpe(const WordCounts& counts,
                                                std::size_t n_merges,
                                                std::int64_t min_frequency = 2) {
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> words;
  for (const auto& [word, c] : counts.entries()) {
    auto symbols = utf8::split_chars(word);
    symbols.emplace_back(BpeModel::kEndOfWord);
    words.emplace_back(std::move(symbols), c);
  }
  std::vector<ReferenceStep> steps;
  while (steps.size() < n_merges) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pairs;
    for (const auto& [symbols, c] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        pairs[{symbols[i], symbols[i + 1]}] += c;
      }
    }
    std::int64_t best = 0;
    std::pair<std::string, std::string> chosen;
    for (const auto& [pair, c] : pairs) {  // map order = lexicographic
      if (c > best) {
        best = c;
        chosen = pair;
      }
    }
    if (best < min_frequency) break;
    steps.push_back({{chosen.first, chosen.second}, best, best});
    for (auto& [symbols, c] : words) {
      std::vector<std::string> merged;
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == chosen.first &&
            symbols[i + 1] == chosen.second) {
          merged.push_back(symbols[i] + symbols[i + 1]);
          ++i;
        } else {
          merged.push_back(symbols[i]);
        }
      }
      symbols = std::move(merged);
    }
  }
  return steps;
}

/// Applies rules in order, each leftmost-first over the whole word.
inline std::vector<std::string> reference_apply(const std::vector<MergeRule>& merges,
                                                std::string_view word) {
  auto symbols = utf8::split_chars(word);
  symbols.emplace_back(BpeModel::kEndOfWord);
  for (const auto& rule : merges) {
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == rule.left &&
          symbols[i + 1] == rule.right) {
        merged.push_back(symbols[i] + symbols[i + 1]);
        ++i;
      } else {
        merged.push_back(symbols[i]);
      }
    }
    symbols = std::move(merged);
  }
  std::string& last = symbols.back();
  last.resize(last.size() - BpeModel::kEndOfWord.size());
  if (last.empty()) symbols.pop_back();
  return symbols;
}

}  // namespace lmvr::testing

#endif  // LMVR_TESTS_BPE_REFERENCE_HPP
