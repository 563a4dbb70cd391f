#include "lmvr/flatcat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "lmvr/error.hpp"
#include "lmvr/log.hpp"
#include "lmvr/utf8.hpp"

namespace lmvr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 / (1 + exp(-x))) without overflow or cancellation.
double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double log_sum_exp(const CategoryArray& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (const double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view text, std::size_t line_no) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw DataError("bad number '" + s + "' at line " + std::to_string(line_no));
  }
  return v;
}

std::int64_t parse_int(std::string_view text, std::size_t line_no) {
  const std::string s(text);
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw DataError("bad integer '" + s + "' at line " + std::to_string(line_no));
  }
  return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

MorphStats neutral_stats(std::string_view morph) {
  MorphStats stats;
  stats.length = utf8::char_count(morph);
  return stats;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view category_name(Category c) {
  switch (c) {
    case Category::kBoundary: return "B";
    case Category::kPrefix: return "PRE";
    case Category::kStem: return "STM";
    case Category::kSuffix: return "SUF";
    case Category::kNonMorpheme: return "ZZZ";
  }
  return "?";
}

Category parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kNumStates; ++i) {
    const auto c = static_cast<Category>(i);
    if (category_name(c) == name) return c;
  }
  throw DataError("unknown category '" + std::string(name) + "'");
}

TransitionTable TransitionTable::uniform() {
  TransitionCounts zero{};
  return estimate(zero, 1.0);
}

TransitionTable::TransitionTable() {
  for (auto& row : log_prob_) row.fill(-kInf);
}

TransitionTable TransitionTable::estimate(const TransitionCounts& counts,
                                          double kappa) {
  TransitionTable t;
  for (std::size_t f = 0; f < kNumStates; ++f) {
    const auto from = static_cast<Category>(f);
    double denom = 0.0;
    for (std::size_t to = 0; to < kNumStates; ++to) {
      if (transition_allowed(from, static_cast<Category>(to))) {
        denom += static_cast<double>(counts[f][to]) + kappa;
      }
    }
    for (std::size_t to = 0; to < kNumStates; ++to) {
      const bool ok = transition_allowed(from, static_cast<Category>(to));
      const double p =
          ok ? (static_cast<double>(counts[f][to]) + kappa) / denom : 0.0;
      t.prob_[f][to] = p;
      t.log_prob_[f][to] = p > 0 ? std::log(p) : -kInf;
    }
  }
  return t;
}

void TransitionTable::set(Category from, Category to, double p) {
  if (!transition_allowed(from, to) && p != 0.0) {
    throw DataError("forbidden transition " + std::string(category_name(from)) +
                    "->" + std::string(category_name(to)) +
                    " must have zero probability");
  }
  prob_[state_index(from)][state_index(to)] = p;
  log_prob_[state_index(from)][state_index(to)] = p > 0 ? std::log(p) : -kInf;
}

// ---------------------------------------------------------------------------

CategoryArray category_log_prior(const MorphStats& stats, const Hyperparams& hp) {
  const double prefix_x = hp.slope * (stats.right_perplexity - hp.ppl_threshold);
  const double suffix_x = hp.slope * (stats.left_perplexity - hp.ppl_threshold);
  const double stem_x =
      hp.slope * (static_cast<double>(stats.length) - hp.length_threshold);

  CategoryArray raw;
  raw[morph_index(Category::kPrefix)] =
      log_sigmoid(prefix_x) + log_sigmoid(-suffix_x);
  raw[morph_index(Category::kStem)] = log_sigmoid(stem_x);
  raw[morph_index(Category::kSuffix)] =
      log_sigmoid(suffix_x) + log_sigmoid(-prefix_x);
  raw[morph_index(Category::kNonMorpheme)] =
      log_sigmoid(-prefix_x) + log_sigmoid(-suffix_x) + log_sigmoid(-stem_x);
  const double norm = log_sum_exp(raw);
  for (double& x : raw) x -= norm;
  return raw;
}

CategoryArray category_prior(const MorphStats& stats, const Hyperparams& hp) {
  CategoryArray p = category_log_prior(stats, hp);
  for (double& x : p) x = std::exp(x);
  return p;
}

// ---------------------------------------------------------------------------

std::string join_morphs(const Analysis& analysis) {
  std::string out;
  for (const auto& item : analysis) out += item.morph;
  return out;
}

std::vector<std::string> morphs_of(const Analysis& analysis) {
  std::vector<std::string> out;
  out.reserve(analysis.size());
  for (const auto& item : analysis) out.push_back(item.morph);
  return out;
}

bool is_well_formed(const Analysis& analysis) {
  if (analysis.empty()) return false;
  Category prev = Category::kBoundary;
  bool any_morpheme = false;
  for (const auto& item : analysis) {
    if (item.morph.empty() || item.category == Category::kBoundary) return false;
    if (!transition_allowed(prev, item.category)) return false;
    if (item.category != Category::kNonMorpheme) any_morpheme = true;
    prev = item.category;
  }
  return any_morpheme && transition_allowed(prev, Category::kBoundary);
}

std::string to_string(const Analysis& analysis) {
  std::string out;
  for (const auto& item : analysis) {
    if (!out.empty()) out.push_back(' ');
    out += item.morph;
    out.push_back('/');
    out += category_name(item.category);
  }
  return out;
}

// ---------------------------------------------------------------------------

CharModel::CharModel(std::map<std::string, double, std::less<>> probs,
                     double mean_word_length, double unknown_prob)
    : probs_(std::move(probs)),
      mean_word_length_(mean_word_length),
      end_prob_(1.0 / (mean_word_length + 1.0)),
      unknown_prob_(unknown_prob) {}

CharModel CharModel::from_counts(const WordCounts& counts) {
  std::map<std::string, double, std::less<>> char_counts;
  double total = 0.0;
  for (const auto& [word, c] : counts.entries()) {
    for (auto& ch : utf8::split_chars(word)) {
      char_counts[std::move(ch)] += static_cast<double>(c);
      total += static_cast<double>(c);
    }
  }
  const double tokens = static_cast<double>(counts.total_tokens());
  const double mwl = tokens > 0 ? total / tokens : 0.0;
  const double p_char = 1.0 - 1.0 / (mwl + 1.0);
  for (auto& [ch, n] : char_counts) n = p_char * n / total;
  const double unknown =
      p_char / (total + static_cast<double>(char_counts.size()) + 1.0);
  return CharModel(std::move(char_counts), mwl, unknown);
}

double CharModel::char_prob(std::string_view ch) const {
  auto it = probs_.find(ch);
  return it == probs_.end() ? unknown_prob_ : it->second;
}

double form_cost(std::string_view morph, const CharModel& chars) {
  double cost = -std::log(chars.end_prob());
  const auto offsets = utf8::char_offsets(morph);
  for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
    cost -= std::log(
        chars.char_prob(morph.substr(offsets[k], offsets[k + 1] - offsets[k])));
  }
  return cost;
}

// ---------------------------------------------------------------------------

FlatCatModel::FlatCatModel(Hyperparams hp, CharModel chars,
                           TransitionTable transitions)
    : hp_(hp), chars_(std::move(chars)), transitions_(transitions) {}

void FlatCatModel::set_hyperparams(const Hyperparams& hp) {
  hp_ = hp;
  for (auto& [morph, entry] : lexicon_) {
    entry.log_prior = category_log_prior(entry.stats, hp_);
  }
  refresh_category_mass();
}

const FlatCatModel::Entry* FlatCatModel::find(std::string_view morph) const {
  auto it = lexicon_.find(morph);
  return it == lexicon_.end() ? nullptr : &it->second;
}

void FlatCatModel::add_count(std::string_view morph, std::int64_t delta) {
  if (delta == 0) return;
  auto it = lexicon_.find(morph);
  if (it == lexicon_.end()) {
    if (delta < 0 || morph.empty()) {
      throw PreconditionError("cannot remove unknown morph '" +
                              std::string(morph) + "'");
    }
    Entry entry;
    entry.stats = neutral_stats(morph);
    entry.log_prior = category_log_prior(entry.stats, hp_);
    max_morph_length_ = std::max(max_morph_length_, entry.stats.length);
    it = lexicon_.emplace(std::string(morph), entry).first;
  }
  Entry& entry = it->second;
  if (entry.stats.token_count + delta < 0) {
    throw PreconditionError("negative count for morph '" + std::string(morph) +
                            "'");
  }
  entry.stats.token_count += delta;
  nu_ += delta;
  for (std::size_t k = 0; k < kNumMorphCategories; ++k) {
    mass_[k] += std::exp(entry.log_prior[k]) * static_cast<double>(delta);
  }
  if (entry.stats.token_count == 0) lexicon_.erase(it);
}

void FlatCatModel::set_perplexities(std::string_view morph, double left,
                                    double right) {
  auto it = lexicon_.find(morph);
  if (it == lexicon_.end()) {
    throw PreconditionError("unknown morph '" + std::string(morph) + "'");
  }
  Entry& entry = it->second;
  const double c = static_cast<double>(entry.stats.token_count);
  for (std::size_t k = 0; k < kNumMorphCategories; ++k) {
    mass_[k] -= std::exp(entry.log_prior[k]) * c;
  }
  entry.stats.left_perplexity = left;
  entry.stats.right_perplexity = right;
  entry.log_prior = category_log_prior(entry.stats, hp_);
  for (std::size_t k = 0; k < kNumMorphCategories; ++k) {
    mass_[k] += std::exp(entry.log_prior[k]) * c;
  }
}

void FlatCatModel::refresh_category_mass() {
  // Summing in sorted order keeps the result independent of hash layout.
  std::vector<const std::pair<const std::string, Entry>*> sorted;
  sorted.reserve(lexicon_.size());
  for (const auto& kv : lexicon_) sorted.push_back(&kv);
  std::sort(sorted.begin(), sorted.end(),
            [](auto* a, auto* b) { return a->first < b->first; });
  mass_.fill(0.0);
  for (const auto* kv : sorted) {
    const Entry& entry = kv->second;
    for (std::size_t k = 0; k < kNumMorphCategories; ++k) {
      mass_[k] += std::exp(entry.log_prior[k]) *
                  static_cast<double>(entry.stats.token_count);
    }
  }
}

double FlatCatModel::emission_logprob(std::string_view morph, Category cat) const {
  if (cat == Category::kBoundary) {
    throw PreconditionError("boundary state has no emissions");
  }
  const Entry* entry = find(morph);
  if (entry == nullptr) {
    throw PreconditionError("morph '" + std::string(morph) +
                            "' is not in the lexicon");
  }
  const std::size_t k = morph_index(cat);
  if (!(mass_[k] > 0.0)) return -kInf;
  return entry->log_prior[k] +
         std::log(static_cast<double>(entry->stats.token_count)) -
         std::log(mass_[k]);
}

double FlatCatModel::oov_emission_logprob(std::string_view ch, Category cat) const {
  const double smoothed =
      -std::log(static_cast<double>(nu_) + static_cast<double>(lexicon_.size()) +
                (nu_ == 0 ? 1.0 : 0.0));
  return smoothed + category_log_prior(neutral_stats(ch), hp_)[morph_index(cat)];
}

double FlatCatModel::analysis_cost(const Analysis& analysis) const {
  if (analysis.empty()) return kInf;
  double cost = 0.0;
  Category prev = Category::kBoundary;
  bool any_morpheme = false;
  for (const auto& item : analysis) {
    if (item.category == Category::kBoundary) return kInf;
    const double lt = transitions_.log_prob(prev, item.category);
    if (lt == -kInf) return kInf;
    double le;
    if (find(item.morph) != nullptr) {
      le = emission_logprob(item.morph, item.category);
    } else if (utf8::char_count(item.morph) == 1) {
      le = oov_emission_logprob(item.morph, item.category);
    } else {
      throw PreconditionError("morph '" + item.morph +
                              "' is not in the lexicon");
    }
    cost -= lt + le;
    if (item.category != Category::kNonMorpheme) any_morpheme = true;
    prev = item.category;
  }
  const double lt_end = transitions_.log_prob(prev, Category::kBoundary);
  if (lt_end == -kInf || !any_morpheme) return kInf;
  return cost - lt_end;
}

Analysis FlatCatModel::viterbi_segment(std::string_view word) const {
  if (word.empty()) throw PreconditionError("cannot segment an empty word");
  const EmissionFn emission = [this](std::size_t begin, std::size_t end,
                                     std::string_view morph,
                                     CategoryArray& neg_log) {
    if (const Entry* entry = find(morph)) {
      const double log_count =
          std::log(static_cast<double>(entry->stats.token_count));
      for (std::size_t k = 0; k < kNumMorphCategories; ++k) {
        neg_log[k] = mass_[k] > 0.0
                         ? -(entry->log_prior[k] + log_count - std::log(mass_[k]))
                         : kInf;
      }
      return true;
    }
    if (end - begin != 1) return false;
    for (const Category cat : kMorphCategories) {
      neg_log[morph_index(cat)] = -oov_emission_logprob(morph, cat);
    }
    return true;
  };
  return viterbi_decode(word, transitions_, std::max<std::size_t>(max_morph_length_, 1),
                        emission);
}

// ---------------------------------------------------------------------------

Analysis viterbi_decode(std::string_view word, const TransitionTable& transitions,
                        std::size_t max_morph_length, const EmissionFn& emission) {
  // States: 0..2 = PRE, STM, SUF; 3 = ZZZ after a real morpheme; 4 = ZZZ with
  // only ZZZ so far. The start of the word is handled separately.
  constexpr std::size_t kDpStates = 5;
  struct Cell {
    double cost = kInf;
    std::size_t morphs = 0;
    std::vector<std::size_t> boundaries;  // internal boundaries, code points
    std::size_t prev_pos = 0;
    std::size_t prev_state = 0;  // kDpStates means "word start"
    bool reachable = false;
  };
  const auto category_of = [](std::size_t state) {
    return state < 3 ? static_cast<Category>(state + 1) : Category::kNonMorpheme;
  };
  const auto better = [](double cost, std::size_t morphs,
                         const std::vector<std::size_t>& bounds, const Cell& cell) {
    if (!cell.reachable) return true;
    if (cost != cell.cost) return cost < cell.cost;
    if (morphs != cell.morphs) return morphs < cell.morphs;
    return bounds < cell.boundaries;
  };

  const auto offsets = utf8::char_offsets(word);
  const std::size_t n = offsets.size() - 1;
  std::vector<std::array<Cell, kDpStates>> dp(n + 1);
  CategoryArray neg_log;

  for (std::size_t end = 1; end <= n; ++end) {
    const std::size_t first = end > max_morph_length ? end - max_morph_length : 0;
    for (std::size_t begin = first; begin < end; ++begin) {
      const std::string_view morph =
          word.substr(offsets[begin], offsets[end] - offsets[begin]);
      neg_log.fill(kInf);
      if (!emission(begin, end, morph, neg_log)) continue;

      const std::size_t n_prev = begin == 0 ? 1 : kDpStates;
      for (std::size_t ps = 0; ps < n_prev; ++ps) {
        const Cell* prev = begin == 0 ? nullptr : &dp[begin][ps];
        if (prev != nullptr && !prev->reachable) continue;
        const Category prev_cat = prev == nullptr ? Category::kBoundary : category_of(ps);
        const double prev_cost = prev == nullptr ? 0.0 : prev->cost;
        for (const Category cat : kMorphCategories) {
          const double e = neg_log[morph_index(cat)];
          if (!std::isfinite(e)) continue;
          const double lt = transitions.log_prob(prev_cat, cat);
          if (lt == -kInf) continue;
          std::size_t state;
          if (cat != Category::kNonMorpheme) {
            state = morph_index(cat);
          } else {
            const bool seen = prev != nullptr && ps != 4;
            state = seen ? 3 : 4;
          }
          const double cost = prev_cost - lt + e;
          const std::size_t morphs = (prev == nullptr ? 0 : prev->morphs) + 1;
          std::vector<std::size_t> bounds;
          if (prev != nullptr) {
            bounds = prev->boundaries;
            bounds.push_back(begin);
          }
          Cell& cell = dp[end][state];
          if (better(cost, morphs, bounds, cell)) {
            cell.cost = cost;
            cell.morphs = morphs;
            cell.boundaries = std::move(bounds);
            cell.prev_pos = begin;
            cell.prev_state = prev == nullptr ? kDpStates : ps;
            cell.reachable = true;
          }
        }
      }
    }
  }

  // Close with the transition into B; state 4 (all ZZZ) is not a valid end.
  Cell best;
  std::size_t best_state = kDpStates;
  for (std::size_t s = 0; s < 4; ++s) {
    const Cell& cell = dp[n][s];
    if (!cell.reachable) continue;
    const double lt = transitions.log_prob(category_of(s), Category::kBoundary);
    if (lt == -kInf) continue;
    const double cost = cell.cost - lt;
    if (better(cost, cell.morphs, cell.boundaries, best)) {
      best = cell;
      best.cost = cost;
      best_state = s;
    }
  }
  Analysis analysis;
  if (best_state == kDpStates) return analysis;
  std::size_t pos = n;
  std::size_t state = best_state;
  while (pos > 0) {
    const Cell& cell = dp[pos][state];
    analysis.push_back(
        {std::string(word.substr(offsets[cell.prev_pos],
                                 offsets[pos] - offsets[cell.prev_pos])),
         category_of(state)});
    pos = cell.prev_pos;
    state = cell.prev_state;
  }
  std::reverse(analysis.begin(), analysis.end());
  return analysis;
}

// ---------------------------------------------------------------------------

double compute_alpha(std::int64_t initial_vocab, std::int64_t target_vocab) {
  if (initial_vocab < 1 || target_vocab < 1) {
    throw PreconditionError("vocabulary sizes must be at least 1");
  }
  if (target_vocab > initial_vocab) {
    warn("target vocabulary " + std::to_string(target_vocab) +
         " exceeds the initial vocabulary " + std::to_string(initial_vocab) +
         "; alpha < 1 discourages splitting");
  }
  return static_cast<double>(initial_vocab) / static_cast<double>(target_vocab);
}

double frequency_cost(std::int64_t nu, std::int64_t m) {
  if (m <= 0) return 0.0;
  const double n = static_cast<double>(nu);
  const double k = static_cast<double>(m);
  return std::lgamma(n) - std::lgamma(k) - std::lgamma(n - k + 1.0);
}

double enumeration_cost(std::int64_t m) {
  return -std::lgamma(static_cast<double>(m) + 1.0);
}

double corpus_cost(const FlatCatModel& model, std::span<const AnalyzedWord> words) {
  double cost = 0.0;
  for (const auto& w : words) {
    cost += static_cast<double>(w.count) * model.analysis_cost(w.analysis);
  }
  return cost;
}

LexiconCost lexicon_cost(const FlatCatModel& model) {
  LexiconCost cost;
  const std::int64_t m = static_cast<std::int64_t>(model.lexicon_size());
  if (m == 0) return cost;
  std::vector<std::string_view> morphs;
  morphs.reserve(model.lexicon().size());
  for (const auto& kv : model.lexicon()) morphs.push_back(kv.first);
  std::sort(morphs.begin(), morphs.end());
  double forms = 0.0;
  for (const auto morph : morphs) forms += form_cost(morph, model.char_model());
  cost.weighted_prior_cost =
      model.hyperparams().alpha * (forms + enumeration_cost(m));
  cost.frequency_cost = frequency_cost(model.total_morph_tokens(), m);
  return cost;
}

CostBreakdown total_cost(const FlatCatModel& model,
                         std::span<const AnalyzedWord> words) {
  CostBreakdown b;
  b.corpus_cost = corpus_cost(model, words);
  const LexiconCost lex = lexicon_cost(model);
  b.weighted_prior_cost = lex.weighted_prior_cost;
  b.frequency_cost = lex.frequency_cost;
  b.total = b.corpus_cost + b.weighted_prior_cost + b.frequency_cost;
  return b;
}

std::map<std::string, MorphStats> update_usage_stats(
    std::span<const AnalyzedWord> words) {
  // The empty string stands for the word edge; morphs are never empty.
  using ContextCounts = std::map<std::string_view, std::int64_t>;
  std::map<std::string, MorphStats> stats;
  std::map<std::string_view, ContextCounts> left;
  std::map<std::string_view, ContextCounts> right;
  for (const auto& w : words) {
    const Analysis& a = w.analysis;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string_view morph = a[i].morph;
      MorphStats& s = stats[a[i].morph];
      s.token_count += w.count;
      s.length = utf8::char_count(morph);
      left[morph][i == 0 ? std::string_view() : a[i - 1].morph] += w.count;
      right[morph][i + 1 == a.size() ? std::string_view() : a[i + 1].morph] +=
          w.count;
    }
  }
  const auto perplexity = [](const ContextCounts& ctx) {
    double total = 0.0;
    double sum_nlogn = 0.0;
    for (const auto& [sym, n] : ctx) {
      const double x = static_cast<double>(n);
      total += x;
      sum_nlogn += x * std::log(x);
    }
    const double entropy = std::log(total) - sum_nlogn / total;
    return std::exp(std::max(entropy, 0.0));
  };
  for (auto& [morph, s] : stats) {
    s.left_perplexity = perplexity(left[morph]);
    s.right_perplexity = perplexity(right[morph]);
  }
  return stats;
}

TransitionCounts count_transitions(std::span<const AnalyzedWord> words) {
  TransitionCounts counts{};
  for (const auto& w : words) {
    Category prev = Category::kBoundary;
    for (const auto& item : w.analysis) {
      counts[state_index(prev)][state_index(item.category)] += w.count;
      prev = item.category;
    }
    counts[state_index(prev)][state_index(Category::kBoundary)] += w.count;
  }
  return counts;
}

// ---------------------------------------------------------------------------

void FlatCatModel::save(std::ostream& out) const {
  out << kMagic << '\n';
  out << "alpha\t" << format_double(hp_.alpha) << '\n';
  out << "ppl_threshold\t" << format_double(hp_.ppl_threshold) << '\n';
  out << "len_threshold\t" << format_double(hp_.length_threshold) << '\n';
  out << "slope\t" << format_double(hp_.slope) << '\n';
  out << "nu\t" << nu_ << '\n';
  out << "m\t" << lexicon_.size() << '\n';
  out << "mean_word_length\t" << format_double(chars_.mean_word_length()) << '\n';
  out << "char_unknown_prob\t" << format_double(chars_.unknown_prob()) << '\n';
  out << "[chars]\n";
  for (const auto& [ch, p] : chars_.probs()) {
    out << ch << '\t' << format_double(p) << '\n';
  }
  out << "[transitions]\n";
  for (std::size_t f = 0; f < kNumStates; ++f) {
    for (std::size_t t = 0; t < kNumStates; ++t) {
      const auto from = static_cast<Category>(f);
      const auto to = static_cast<Category>(t);
      if (!transition_allowed(from, to)) continue;
      out << category_name(from) << '\t' << category_name(to) << '\t'
          << format_double(transitions_.prob(from, to)) << '\n';
    }
  }
  out << "[lexicon]\n";
  std::vector<const std::pair<const std::string, Entry>*> sorted;
  sorted.reserve(lexicon_.size());
  for (const auto& kv : lexicon_) sorted.push_back(&kv);
  std::sort(sorted.begin(), sorted.end(),
            [](auto* a, auto* b) { return a->first < b->first; });
  for (const auto* kv : sorted) {
    const MorphStats& s = kv->second.stats;
    out << kv->first << '\t' << s.token_count << '\t'
        << format_double(s.left_perplexity) << '\t'
        << format_double(s.right_perplexity) << '\n';
  }
}

FlatCatModel FlatCatModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw DataError("not an LMVR model (missing LMVR1 header)");
  }
  std::map<std::string, std::string, std::less<>> header;
  std::map<std::string, double, std::less<>> char_probs;
  TransitionTable transitions;
  struct Row {
    std::string morph;
    std::int64_t count;
    double left;
    double right;
  };
  std::vector<Row> rows;
  std::string section;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.starts_with('[') && line.find('\t') == std::string::npos) {
      section = line;
      if (section != "[chars]" && section != "[transitions]" &&
          section != "[lexicon]") {
        throw DataError("unknown section " + section + " at line " +
                        std::to_string(line_no));
      }
      continue;
    }
    const auto fields = split_tabs(line);
    const auto expect = [&](std::size_t n) {
      if (fields.size() != n) {
        throw DataError("expected " + std::to_string(n) + " fields at line " +
                        std::to_string(line_no));
      }
    };
    if (section.empty()) {
      expect(2);
      header[std::string(fields[0])] = std::string(fields[1]);
    } else if (section == "[chars]") {
      expect(2);
      char_probs[std::string(fields[0])] = parse_double(fields[1], line_no);
    } else if (section == "[transitions]") {
      expect(3);
      transitions.set(parse_category(fields[0]), parse_category(fields[1]),
                      parse_double(fields[2], line_no));
    } else {
      expect(4);
      if (fields[0].empty()) {
        throw DataError("empty morph at line " + std::to_string(line_no));
      }
      rows.push_back({std::string(fields[0]), parse_int(fields[1], line_no),
                      parse_double(fields[2], line_no),
                      parse_double(fields[3], line_no)});
      if (rows.back().count <= 0) {
        throw DataError("non-positive morph count at line " +
                        std::to_string(line_no));
      }
    }
  }
  const auto get = [&](std::string_view key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) {
      throw DataError("model header lacks '" + std::string(key) + "'");
    }
    return it->second;
  };
  Hyperparams hp;
  hp.alpha = parse_double(get("alpha"), 0);
  hp.ppl_threshold = parse_double(get("ppl_threshold"), 0);
  hp.length_threshold = parse_double(get("len_threshold"), 0);
  hp.slope = parse_double(get("slope"), 0);
  const std::int64_t nu = parse_int(get("nu"), 0);
  const std::int64_t m = parse_int(get("m"), 0);
  CharModel chars(std::move(char_probs), parse_double(get("mean_word_length"), 0),
                  parse_double(get("char_unknown_prob"), 0));

  for (std::size_t f = 0; f < kNumStates; ++f) {
    double row = 0.0;
    for (std::size_t t = 0; t < kNumStates; ++t) {
      row += transitions.prob(static_cast<Category>(f), static_cast<Category>(t));
    }
    if (std::abs(row - 1.0) > 1e-9) {
      throw DataError("transition probabilities from " +
                      std::string(category_name(static_cast<Category>(f))) +
                      " do not sum to 1");
    }
  }
  FlatCatModel model(hp, std::move(chars), transitions);
  for (const Row& row : rows) {
    if (model.find(row.morph) != nullptr) {
      throw DataError("duplicate morph '" + row.morph + "'");
    }
    model.add_count(row.morph, row.count);
    model.set_perplexities(row.morph, row.left, row.right);
  }
  model.refresh_category_mass();
  if (model.total_morph_tokens() != nu ||
      static_cast<std::int64_t>(model.lexicon_size()) != m) {
    throw DataError("model header nu/m disagree with the lexicon block");
  }
  return model;
}

}  // namespace lmvr
