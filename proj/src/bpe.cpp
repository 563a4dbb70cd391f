#include "lmvr/bpe.hpp"

#include <algorithm>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <unordered_set>

#include "lmvr/error.hpp"
#include "lmvr/utf8.hpp"

namespace lmvr {

std::size_t BpeModel::PairHash::operator()(
    const std::pair<std::string, std::string>& p) const {
  const std::size_t h1 = std::hash<std::string>{}(p.first);
  const std::size_t h2 = std::hash<std::string>{}(p.second);
  return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
}

BpeModel::BpeModel(std::vector<MergeRule> merges) : merges_(std::move(merges)) {
  rank_.reserve(merges_.size());
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const auto [it, inserted] =
        rank_.emplace(std::make_pair(merges_[i].left, merges_[i].right), i);
    if (!inserted) {
      throw DataError("duplicate merge rule '" + merges_[i].left + "' '" +
                      merges_[i].right + "'");
    }
  }
}

std::vector<std::string> BpeModel::segment_word(std::string_view word) const {
  std::vector<std::string> symbols = utf8::split_chars(word);
  symbols.emplace_back(kEndOfWord);

  // Applying rules strictly in model order is equivalent to repeatedly
  // picking the lowest-ranked rule above the last one applied that still has
  // an occurrence: a skipped rule can never gain an occurrence later, since
  // only higher-ranked merges run after it.
  std::size_t floor = 0;
  std::pair<std::string, std::string> key;
  while (symbols.size() > 1) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      key.first = symbols[i];
      key.second = symbols[i + 1];
      auto it = rank_.find(key);
      if (it != rank_.end() && it->second >= floor && it->second < best) {
        best = it->second;
      }
    }
    if (best == std::numeric_limits<std::size_t>::max()) break;
    const MergeRule& rule = merges_[best];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == rule.left &&
          symbols[i + 1] == rule.right) {
        merged.push_back(rule.left + rule.right);
        i += 2;
      } else {
        merged.push_back(std::move(symbols[i]));
        ++i;
      }
    }
    symbols = std::move(merged);
    floor = best + 1;
  }

  // </w> is always the tail of the last symbol.
  std::string& last = symbols.back();
  last.resize(last.size() - kEndOfWord.size());
  if (last.empty()) symbols.pop_back();
  return symbols;
}

void BpeModel::save(std::ostream& out) const {
  out << kMagic << '\n';
  for (const auto& rule : merges_) out << rule.left << '\t' << rule.right << '\n';
}

BpeModel BpeModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw DataError("not a BPE model (missing BPE1 header)");
  }
  std::vector<MergeRule> merges;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw DataError("malformed merge rule at line " + std::to_string(line_no));
    }
    merges.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return BpeModel(std::move(merges));
}

namespace {

using SymbolId = std::uint32_t;
using PairKey = std::uint64_t;

PairKey make_key(SymbolId a, SymbolId b) {
  return (static_cast<PairKey>(a) << 32) | b;
}

class BpeLearner {
 public:
  explicit BpeLearner(const WordCounts& counts) {
    for (const auto& [word, c] : counts.entries()) {
      std::vector<SymbolId> symbols;
      for (const auto& ch : utf8::split_chars(word)) symbols.push_back(intern(ch));
      symbols.push_back(intern(std::string(BpeModel::kEndOfWord)));
      words_.push_back(std::move(symbols));
      freqs_.push_back(c);
    }
    std::unordered_map<PairKey, std::int64_t> delta;
    for (std::size_t w = 0; w < words_.size(); ++w) add_pairs(w, +1, delta);
    commit(delta);
  }

  // Returns false when no pair reaches min_frequency.
  bool step(std::int64_t min_frequency, MergeRule& rule, std::int64_t& count) {
    if (queue_.empty()) return false;
    const Entry top = *queue_.begin();
    if (top.count < min_frequency) return false;
    count = top.count;
    rule = {symbols_[top.left], symbols_[top.right]};
    const SymbolId merged = intern(rule.left + rule.right);

    const auto occ_it = occurrences_.find(make_key(top.left, top.right));
    std::vector<std::size_t> affected(occ_it->second.begin(),
                                      occ_it->second.end());
    std::sort(affected.begin(), affected.end());
    std::unordered_map<PairKey, std::int64_t> delta;
    for (const std::size_t w : affected) {
      auto& symbols = words_[w];
      bool present = false;
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        if (symbols[i] == top.left && symbols[i + 1] == top.right) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      add_pairs(w, -1, delta);
      std::vector<SymbolId> next;
      next.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size();) {
        if (i + 1 < symbols.size() && symbols[i] == top.left &&
            symbols[i + 1] == top.right) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(symbols[i++]);
        }
      }
      symbols = std::move(next);
      add_pairs(w, +1, delta);
    }
    commit(delta);
    return true;
  }

 private:
  struct Entry {
    std::int64_t count;
    SymbolId left;
    SymbolId right;
  };
  struct EntryOrder {
    const std::vector<std::string>* symbols;
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.count != b.count) return a.count > b.count;
      const auto& sa = *symbols;
      if (sa[a.left] != sa[b.left]) return sa[a.left] < sa[b.left];
      return sa[a.right] < sa[b.right];
    }
  };

  SymbolId intern(const std::string& s) {
    auto [it, inserted] =
        ids_.emplace(s, static_cast<SymbolId>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  void add_pairs(std::size_t w, int sign,
                 std::unordered_map<PairKey, std::int64_t>& delta) {
    const auto& symbols = words_[w];
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const PairKey key = make_key(symbols[i], symbols[i + 1]);
      delta[key] += sign * freqs_[w];
      if (sign > 0) occurrences_[key].insert(w);
    }
  }

  void commit(const std::unordered_map<PairKey, std::int64_t>& delta) {
    for (const auto& [key, d] : delta) {
      if (d == 0) continue;
      const auto left = static_cast<SymbolId>(key >> 32);
      const auto right = static_cast<SymbolId>(key & 0xffffffffu);
      std::int64_t& c = pair_counts_[key];
      if (c > 0) queue_.erase(Entry{c, left, right});
      c += d;
      if (c > 0) {
        queue_.insert(Entry{c, left, right});
      } else {
        pair_counts_.erase(key);
        occurrences_.erase(key);
      }
    }
  }

  std::vector<std::string> symbols_;
  std::unordered_map<std::string, SymbolId> ids_;
  std::vector<std::vector<SymbolId>> words_;
  std::vector<std::int64_t> freqs_;
  std::unordered_map<PairKey, std::int64_t> pair_counts_;
  std::unordered_map<PairKey, std::unordered_set<std::size_t>> occurrences_;
  std::set<Entry, EntryOrder> queue_{EntryOrder{&symbols_}};
};

}  // namespace

BpeModel learn_bpe(const WordCounts& counts, std::size_t n_merges,
                   const BpeLearnOptions& options,
                   std::vector<std::int64_t>* merge_counts) {
  if (counts.empty()) throw DataError("cannot learn BPE from an empty corpus");
  if (merge_counts != nullptr) merge_counts->clear();
  std::vector<MergeRule> merges;
  if (n_merges == 0) return BpeModel(std::move(merges));
  BpeLearner learner(counts);
  MergeRule rule;
  std::int64_t count = 0;
  while (merges.size() < n_merges &&
         learner.step(options.min_frequency, rule, count)) {
    merges.push_back(rule);
    if (merge_counts != nullptr) merge_counts->push_back(count);
  }
  return BpeModel(std::move(merges));
}

std::string apply_bpe(std::string_view line, const BpeModel& model) {
  return map_tokens(line, [&](std::string_view word) {
    return render_pieces(model.segment_word(word), MarkerScheme::kAtatSuffix);
  });
}

std::set<std::string> bpe_vocab(const BpeModel& model, const WordCounts& counts) {
  std::set<std::string> vocab;
  for (const auto& [word, c] : counts.entries()) {
    const auto pieces = model.segment_word(word);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      vocab.insert(i + 1 < pieces.size() ? pieces[i] + "@@" : pieces[i]);
    }
  }
  return vocab;
}

}  // namespace lmvr
