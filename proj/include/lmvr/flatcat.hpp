#ifndef LMVR_FLATCAT_HPP
#define LMVR_FLATCAT_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmvr/corpus_io.hpp"

namespace lmvr {

// ---------------------------------------------------------------------------
// Categories and transitions
// ---------------------------------------------------------------------------

/// HMM states. kBoundary only occurs at word edges; the other four tag morphs.
enum class Category : std::uint8_t {
  kBoundary = 0,
  kPrefix = 1,
  kStem = 2,
  kSuffix = 3,
  kNonMorpheme = 4,
};

inline constexpr std::size_t kNumStates = 5;
inline constexpr std::size_t kNumMorphCategories = 4;
inline constexpr std::array<Category, kNumMorphCategories> kMorphCategories = {
    Category::kPrefix, Category::kStem, Category::kSuffix,
    Category::kNonMorpheme};

constexpr std::size_t state_index(Category c) { return static_cast<std::size_t>(c); }
/// Index into a per-morph-category array (PRE=0 .. ZZZ=3).
constexpr std::size_t morph_index(Category c) { return state_index(c) - 1; }

std::string_view category_name(Category c);  // B, PRE, STM, SUF, ZZZ
Category parse_category(std::string_view name);

/// B->SUF, PRE->SUF, PRE->B and B->B are forbidden.
constexpr bool transition_allowed(Category from, Category to) {
  if (from == Category::kBoundary) {
    return to != Category::kSuffix && to != Category::kBoundary;
  }
  if (from == Category::kPrefix) {
    return to != Category::kSuffix && to != Category::kBoundary;
  }
  return true;
}

using TransitionCounts =
    std::array<std::array<std::int64_t, kNumStates>, kNumStates>;

/// P(to | from). Forbidden transitions hold exactly zero.
class TransitionTable {
 public:
  /// All transitions at probability zero.
  TransitionTable();
  /// Uniform over the allowed successors of each state.
  static TransitionTable uniform();
  /// Add-kappa smoothed maximum likelihood over allowed transitions.
  static TransitionTable estimate(const TransitionCounts& counts,
                                  double kappa = 0.5);

  double prob(Category from, Category to) const {
    return prob_[state_index(from)][state_index(to)];
  }
  /// Negative infinity for forbidden transitions.
  double log_prob(Category from, Category to) const {
    return log_prob_[state_index(from)][state_index(to)];
  }
  /// Throws DataError if the transition is forbidden and p != 0.
  void set(Category from, Category to, double p);

 private:
  std::array<std::array<double, kNumStates>, kNumStates> prob_{};
  std::array<std::array<double, kNumStates>, kNumStates> log_prob_{};
};

// ---------------------------------------------------------------------------
// Morph statistics and category priors
// ---------------------------------------------------------------------------

struct Hyperparams {
  double alpha = 1.0;
  double ppl_threshold = 10.0;
  double length_threshold = 5.0;
  double slope = 1.0;
};

struct MorphStats {
  std::int64_t token_count = 0;
  double right_perplexity = 1.0;
  double left_perplexity = 1.0;
  std::size_t length = 0;  // code points

  friend bool operator==(const MorphStats&, const MorphStats&) = default;
};

/// Indexed by morph_index(): PRE, STM, SUF, ZZZ.
using CategoryArray = std::array<double, kNumMorphCategories>;

/// log P(category | morph) from the sigmoid prefix/suffix/stem-likeness
/// scores. Computed in log space so that no category ever gets exactly zero
/// probability.
CategoryArray category_log_prior(const MorphStats& stats, const Hyperparams& hp);

/// exp(category_log_prior).
CategoryArray category_prior(const MorphStats& stats, const Hyperparams& hp);

// ---------------------------------------------------------------------------
// Analyses
// ---------------------------------------------------------------------------

struct AnalysisItem {
  std::string morph;
  Category category = Category::kStem;

  friend bool operator==(const AnalysisItem&, const AnalysisItem&) = default;
};

using Analysis = std::vector<AnalysisItem>;

std::string join_morphs(const Analysis& analysis);
std::vector<std::string> morphs_of(const Analysis& analysis);

/// Non-empty, no forbidden transition (with B at both ends), no boundary
/// category inside, and not entirely ZZZ.
bool is_well_formed(const Analysis& analysis);

/// "ev/STM ler/SUF" style rendering, for diagnostics and tests.
std::string to_string(const Analysis& analysis);

struct AnalyzedWord {
  std::string word;
  std::int64_t count = 0;
  Analysis analysis;
};

// ---------------------------------------------------------------------------
// Character model
// ---------------------------------------------------------------------------

/// Unigram spelling model frozen from the training corpus. p_end is
/// 1 / (mean_word_length + 1) and characters share the remaining mass in
/// proportion to their token-weighted corpus frequency.
class CharModel {
 public:
  CharModel() = default;
  CharModel(std::map<std::string, double, std::less<>> probs,
            double mean_word_length, double unknown_prob);

  static CharModel from_counts(const WordCounts& counts);

  double end_prob() const { return end_prob_; }
  double mean_word_length() const { return mean_word_length_; }
  /// Probability of an unseen character (add-one smoothed).
  double unknown_prob() const { return unknown_prob_; }
  double char_prob(std::string_view ch) const;
  const std::map<std::string, double, std::less<>>& probs() const {
    return probs_;
  }

 private:
  std::map<std::string, double, std::less<>> probs_;
  double mean_word_length_ = 0.0;
  double end_prob_ = 1.0;
  double unknown_prob_ = 0.0;
};

/// -sum log p(c_j) - log p_end, in nats.
double form_cost(std::string_view morph, const CharModel& chars);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const {
    return std::hash<std::string_view>{}(s);
  }
};

class FlatCatModel {
 public:
  static constexpr std::string_view kMagic = "LMVR1";

  struct Entry {
    MorphStats stats;
    CategoryArray log_prior{};
  };
  using Lexicon =
      std::unordered_map<std::string, Entry, StringHash, std::equal_to<>>;

  FlatCatModel() = default;
  FlatCatModel(Hyperparams hp, CharModel chars, TransitionTable transitions);

  const Hyperparams& hyperparams() const { return hp_; }
  /// Changing alpha only affects the weighted prior; other hyperparameters
  /// feed the category priors, which are recomputed.
  void set_hyperparams(const Hyperparams& hp);
  const CharModel& char_model() const { return chars_; }
  const TransitionTable& transitions() const { return transitions_; }
  void set_transitions(const TransitionTable& t) { transitions_ = t; }

  const Lexicon& lexicon() const { return lexicon_; }
  const Entry* find(std::string_view morph) const;
  std::size_t lexicon_size() const { return lexicon_.size(); }
  std::int64_t total_morph_tokens() const { return nu_; }
  /// Upper bound on the length (code points) of any lexicon morph.
  std::size_t max_morph_length() const { return max_morph_length_; }

  /// Adjusts a morph's token count. A morph entering the lexicon starts with
  /// unit perplexities; a morph whose count reaches zero is evicted.
  void add_count(std::string_view morph, std::int64_t delta);
  /// Replaces the stored perplexities (and recomputes the category prior).
  void set_perplexities(std::string_view morph, double left, double right);

  /// sum over the lexicon of P(cat | morph) * count(morph).
  const CategoryArray& category_mass() const { return mass_; }
  /// Recomputes category_mass from scratch, removing accumulated rounding.
  void refresh_category_mass();

  /// log P(morph | cat). Throws PreconditionError for a morph not in the
  /// lexicon; returns -inf when the category carries no mass.
  double emission_logprob(std::string_view morph, Category cat) const;
  /// Emission of a single out-of-lexicon character at inference time:
  /// log(1 / (nu + m)) + log P(cat | char).
  double oov_emission_logprob(std::string_view ch, Category cat) const;

  /// Cost of one analysis in nats. Morphs outside the lexicon are scored with
  /// the OOV fallback if they are single characters; otherwise this throws
  /// PreconditionError. Forbidden transitions and all-ZZZ give +inf.
  double analysis_cost(const Analysis& analysis) const;

  /// Minimum-cost analysis of a non-empty word over lexicon morphs plus
  /// single-character fallbacks.
  Analysis viterbi_segment(std::string_view word) const;

  void save(std::ostream& out) const;
  static FlatCatModel load(std::istream& in);

 private:
  Hyperparams hp_;
  CharModel chars_;
  TransitionTable transitions_ = TransitionTable::uniform();
  Lexicon lexicon_;
  CategoryArray mass_{};
  std::int64_t nu_ = 0;
  std::size_t max_morph_length_ = 0;
};

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// Fills `neg_log_emission` (indexed by morph_index) for the substring of the
/// word spanning code points [begin, end) and returns true, or returns false
/// if that substring is not a candidate morph.
using EmissionFn = std::function<bool(std::size_t begin, std::size_t end,
                                      std::string_view morph,
                                      CategoryArray& neg_log_emission)>;

/// Dynamic programme over (position, category, seen-non-ZZZ). Among equal
/// costs prefers fewer morphs, then the lexicographically smallest boundary
/// list. Returns an empty analysis when no path exists.
Analysis viterbi_decode(std::string_view word, const TransitionTable& transitions,
                        std::size_t max_morph_length, const EmissionFn& emission);

// ---------------------------------------------------------------------------
// Costs
// ---------------------------------------------------------------------------

struct CostBreakdown {
  double corpus_cost = 0.0;
  double weighted_prior_cost = 0.0;
  double frequency_cost = 0.0;
  double total = 0.0;
};

struct LexiconCost {
  double weighted_prior_cost = 0.0;
  double frequency_cost = 0.0;
};

/// m1 / m2. Warns when m2 > m1 (alpha < 1 discourages splitting).
double compute_alpha(std::int64_t initial_vocab, std::int64_t target_vocab);

/// log C(nu - 1, m - 1); zero for m == 0.
double frequency_cost(std::int64_t nu, std::int64_t m);

/// -log m!
double enumeration_cost(std::int64_t m);

double corpus_cost(const FlatCatModel& model, std::span<const AnalyzedWord> words);
LexiconCost lexicon_cost(const FlatCatModel& model);
CostBreakdown total_cost(const FlatCatModel& model,
                         std::span<const AnalyzedWord> words);

/// Token counts and left/right perplexities of every morph used in `words`.
/// Word edges count as a context symbol.
std::map<std::string, MorphStats> update_usage_stats(
    std::span<const AnalyzedWord> words);

TransitionCounts count_transitions(std::span<const AnalyzedWord> words);

}  // namespace lmvr

#endif  // LMVR_FLATCAT_HPP
