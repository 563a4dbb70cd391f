#include "lmvr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "lmvr/error.hpp"
#include "lmvr/log.hpp"
#include "lmvr/utf8.hpp"

namespace lmvr {

namespace {


double xlogx(std::int64_t n) {
  if (n <= 0) return 0.0;
  const double x = static_cast<double>(n);
  return x * std::log(x);
}

// Objective tracked from aggregate counts so that the cost of a candidate
// switch is exact under the current (frozen) category priors and transitions.
//
//   corpus = sum_trans n(f,t) * -log P(t|f)
//            - sum_tokens log P(cat|morph) - sum_morph c log c
//            + sum_cat N(cat) * log mass(cat)
//
// which is sum_tokens -log P(morph|cat) with
// P(morph|cat) = P(cat|morph) c(morph) / mass(cat).
class CostTracker {
 public:
  CostTracker(FlatCatModel& model, std::span<const AnalyzedWord> words)
      : model_(model) {
    for (const auto& [morph, entry] : model_.lexicon()) {
      clogc_ += xlogx(entry.stats.token_count);
      form_sum_ += form_of(morph);
    }
    for (const auto& w : words) {
      tally(w.analysis, w.count);
      for (const auto& item : w.analysis) {
        tag_prior_ += static_cast<double>(w.count) *
                      model_.find(item.morph)->log_prior[morph_index(item.category)];
      }
    }
  }

  // Adds (count > 0) or removes (count < 0) one word's analysis.
  void apply(const Analysis& analysis, std::int64_t count) {
    tally(analysis, count);
    for (const auto& item : analysis) {
      const FlatCatModel::Entry* entry = model_.find(item.morph);
      const std::int64_t before = entry == nullptr ? 0 : entry->stats.token_count;
      const std::int64_t after = before + count;
      // A removed morph leaves with the prior it was counted under.
      if (count < 0) {
        tag_prior_ += static_cast<double>(count) *
                      entry->log_prior[morph_index(item.category)];
        if (after == 0) {
          evicted_[item.morph] = {entry->stats.left_perplexity,
                                  entry->stats.right_perplexity};
        }
      }
      model_.add_count(item.morph, count);
      if (count > 0) {
        // A morph re-entering within the epoch keeps its last perplexities,
        // so that undoing a switch restores the previous state exactly.
        if (before == 0) {
          auto it = evicted_.find(item.morph);
          if (it != evicted_.end()) {
            model_.set_perplexities(item.morph, it->second.first, it->second.second);
          }
        }
        tag_prior_ += static_cast<double>(count) *
                      model_.find(item.morph)->log_prior[morph_index(item.category)];
      }
      clogc_ += xlogx(after) - xlogx(before);
      if (before == 0) form_sum_ += form_of(item.morph);
      if (after == 0) form_sum_ -= form_of(item.morph);
    }
  }

  double total() const {
    const TransitionTable& t = model_.transitions();
    double corpus = 0.0;
    for (std::size_t f = 0; f < kNumStates; ++f) {
      for (std::size_t to = 0; to < kNumStates; ++to) {
        if (trans_[f][to] == 0) continue;
        corpus -= static_cast<double>(trans_[f][to]) *
                  t.log_prob(static_cast<Category>(f), static_cast<Category>(to));
      }
    }
    corpus -= tag_prior_;
    corpus -= clogc_;
    const CategoryArray& mass = model_.category_mass();
    for (std::size_t k = 0; k < kNumMorphCategories; ++k) {
      if (n_cat_[k] == 0) continue;
      corpus += static_cast<double>(n_cat_[k]) * std::log(mass[k]);
    }
    const auto m = static_cast<std::int64_t>(model_.lexicon_size());
    const double weighted =
        m == 0 ? 0.0
               : model_.hyperparams().alpha * (form_sum_ + enumeration_cost(m));
    return corpus + weighted + frequency_cost(model_.total_morph_tokens(), m);
  }

  double form_of(std::string_view morph) {
    auto it = form_cache_.find(morph);
    if (it != form_cache_.end()) return it->second;
    const double fc = form_cost(morph, model_.char_model());
    form_cache_.emplace(std::string(morph), fc);
    return fc;
  }

 private:
  // Transition and category counts; tag priors are handled in apply() since
  // they depend on lexicon membership at the moment of the update.
  void tally(const Analysis& analysis, std::int64_t count) {
    Category prev = Category::kBoundary;
    for (const auto& item : analysis) {
      trans_[state_index(prev)][state_index(item.category)] += count;
      n_cat_[morph_index(item.category)] += count;
      prev = item.category;
    }
    trans_[state_index(prev)][state_index(Category::kBoundary)] += count;
  }

  FlatCatModel& model_;
  TransitionCounts trans_{};
  std::array<std::int64_t, kNumMorphCategories> n_cat_{};
  double tag_prior_ = 0.0;
  double clogc_ = 0.0;
  double form_sum_ = 0.0;
  std::unordered_map<std::string, double, StringHash, std::equal_to<>>
      form_cache_;
  std::unordered_map<std::string, std::pair<double, double>, StringHash,
                     std::equal_to<>>
      evicted_;
};

// Training-time proposal. Every substring of the word is a candidate; one
// that is not in the lexicon (after the word's own analysis was removed) is
// charged its emission as if it had the word's count, plus the lexicon cost
// of adding it amortised over the word's tokens. The caller evaluates the
// exact cost of the proposal before accepting it.
//
// With `forced` set, the substring [forced->first, forced->second) (code
// points) must be one of the morphs.
Analysis propose(std::string_view word, std::int64_t count,
                 const FlatCatModel& model, CostTracker& tracker,
                 std::optional<std::pair<std::size_t, std::size_t>> forced = {}) {
  const double cw = static_cast<double>(count);
  const auto m = static_cast<std::int64_t>(model.lexicon_size());
  const std::int64_t nu = model.total_morph_tokens() + count;
  const double alpha = model.hyperparams().alpha;
  const double new_morph_overhead =
      alpha * (enumeration_cost(m + 1) - enumeration_cost(m)) +
      frequency_cost(nu, m + 1) - frequency_cost(nu, m);
  const CategoryArray& mass = model.category_mass();
  const double log_cw = std::log(cw);

  const EmissionFn emission = [&](std::size_t begin, std::size_t end,
                                  std::string_view morph, CategoryArray& neg_log) {
    if (forced) {
      const auto [a, b] = *forced;
      const bool straddles = (begin < a && a < end) || (begin < b && b < end);
      if (straddles || (begin == a && end != b) || (end == b && begin != a)) {
        return false;
      }
    }
    const FlatCatModel::Entry* entry = model.find(morph);
    double extra = 0.0;
    double log_count = log_cw;
    CategoryArray log_prior;
    if (entry != nullptr) {
      log_prior = entry->log_prior;
      log_count = std::log(static_cast<double>(entry->stats.token_count) + cw);
    } else {
      MorphStats neutral;
      neutral.length = utf8::char_count(morph);
      log_prior = category_log_prior(neutral, model.hyperparams());
      extra = (alpha * tracker.form_of(morph) + new_morph_overhead) / cw;
    }
    for (std::size_t k = 0; k < kNumMorphCategories; ++k) {
      const double p = std::exp(log_prior[k]);
      const double mass_after = mass[k] + p * cw;
      neg_log[k] = -(log_prior[k] + log_count - std::log(mass_after)) + extra;
    }
    return true;
  };
  return viterbi_decode(word, model.transitions(), utf8::char_count(word),
                        emission);
}

// Bookkeeping for an accepted switch.
void record_switch(TrainState& state, EpochResult& result, double delta) {
  state.max_accepted_delta = state.accepted_switches == 0
                                 ? delta
                                 : std::max(state.max_accepted_delta, delta);
  ++state.accepted_switches;
  ++result.switches;
}

// One greedy pass: each word may switch to its proposal.
double word_pass(TrainState& state, CostTracker& tracker, EpochResult& result) {
  double gained = 0.0;
  for (auto& w : state.words) {
    const double before = tracker.total();
    tracker.apply(w.analysis, -w.count);
    Analysis proposal = propose(w.word, w.count, state.model, tracker);
    if (proposal.empty() || proposal == w.analysis) {
      tracker.apply(w.analysis, w.count);
      continue;
    }
    tracker.apply(proposal, w.count);
    const double after = tracker.total();
    if (after < before) {
      gained += after - before;
      record_switch(state, result, after - before);
      w.analysis = std::move(proposal);
    } else {
      tracker.apply(proposal, -w.count);
      tracker.apply(w.analysis, w.count);
    }
  }
  return gained;
}

bool contains_morph(const Analysis& analysis, std::string_view morph) {
  return std::any_of(analysis.begin(), analysis.end(),
                     [&](const AnalysisItem& item) { return item.morph == morph; });
}

// Joint move per lexicon morph: every word that contains the morph as a
// substring but not as a unit is re-analysed around its first occurrence,
// and the whole group switches only if the exact total drops. A frequent
// inflected form rarely pays for splitting on its own while its siblings are
// still whole; moving the siblings together removes that barrier.
double morph_pass(TrainState& state, CostTracker& tracker, EpochResult& result) {
  // Candidates: every lexicon morph, plus every proper prefix or suffix
  // shared by at least two lexicon morphs (a stem or affix that so far only
  // occurs inside whole-word morphs). Ranked by the token mass behind them.
  std::map<std::string, std::pair<std::int64_t, int>, std::less<>> edges;
  for (const auto& [morph, entry] : state.model.lexicon()) {
    const std::vector<std::size_t> offsets = utf8::char_offsets(morph);
    for (std::size_t k = 1; k + 1 < offsets.size(); ++k) {
      for (const std::string_view part :
           {std::string_view(morph).substr(0, offsets[k]),
            std::string_view(morph).substr(offsets[k])}) {
        auto& [mass, morphs] = edges[std::string(part)];
        mass += entry.stats.token_count;
        ++morphs;
      }
    }
  }
  std::vector<std::pair<std::int64_t, std::string>> candidates;
  for (const auto& [morph, entry] : state.model.lexicon()) {
    auto it = edges.find(morph);
    const std::int64_t extra = it == edges.end() ? 0 : it->second.first;
    candidates.emplace_back(entry.stats.token_count + extra, morph);
    if (it != edges.end()) it->second.second = 0;
  }
  for (const auto& [part, info] : edges) {
    if (info.second >= 2) candidates.emplace_back(info.first, part);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  double gained = 0.0;
  std::vector<std::size_t> group;
  std::vector<Analysis> proposals;
  for (const auto& [ignored, morph] : candidates) {
    group.clear();
    for (std::size_t i = 0; i < state.words.size(); ++i) {
      const AnalyzedWord& w = state.words[i];
      if (w.word.size() > morph.size() &&
          w.word.find(morph) != std::string::npos &&
          !contains_morph(w.analysis, morph)) {
        group.push_back(i);
      }
    }
    if (group.empty()) continue;

    const double before = tracker.total();
    for (const std::size_t i : group) {
      tracker.apply(state.words[i].analysis, -state.words[i].count);
    }
    proposals.clear();
    for (const std::size_t i : group) {
      const AnalyzedWord& w = state.words[i];
      const std::size_t byte = w.word.find(morph);
      const std::size_t a = utf8::char_count(std::string_view(w.word).substr(0, byte));
      const std::size_t b = a + utf8::char_count(morph);
      Analysis proposal = propose(w.word, w.count, state.model, tracker,
                                  std::make_pair(a, b));
      if (proposal.empty()) proposal = w.analysis;
      tracker.apply(proposal, w.count);
      proposals.push_back(std::move(proposal));
    }
    const double after = tracker.total();
    if (after < before) {
      gained += after - before;
      record_switch(state, result, after - before);
      for (std::size_t k = 0; k < group.size(); ++k) {
        state.words[group[k]].analysis = std::move(proposals[k]);
      }
    } else {
      for (std::size_t k = 0; k < group.size(); ++k) {
        const AnalyzedWord& w = state.words[group[k]];
        tracker.apply(proposals[k], -w.count);
      }
      for (const std::size_t i : group) {
        tracker.apply(state.words[i].analysis, state.words[i].count);
      }
    }
  }
  return gained;
}

// Best category sequence for a fixed segmentation.
void retag(Analysis& analysis, const FlatCatModel& model) {
  std::vector<std::size_t> ends;
  std::string word;
  for (const auto& item : analysis) {
    word += item.morph;
    ends.push_back(utf8::char_count(word));
  }
  const EmissionFn emission = [&](std::size_t begin, std::size_t end,
                                  std::string_view morph, CategoryArray& neg_log) {
    const auto it = std::lower_bound(ends.begin(), ends.end(), end);
    if (it == ends.end() || *it != end) return false;
    const std::size_t index = static_cast<std::size_t>(it - ends.begin());
    if ((index == 0 ? 0 : ends[index - 1]) != begin) return false;
    for (std::size_t k = 0; k < kNumMorphCategories; ++k) {
      neg_log[k] = -model.emission_logprob(morph, kMorphCategories[k]);
    }
    return true;
  };
  Analysis tagged = viterbi_decode(word, model.transitions(), utf8::char_count(word),
                                   emission);
  if (!tagged.empty()) analysis = std::move(tagged);
}

void reestimate(TrainState& state) {
  const auto stats = update_usage_stats(state.words);
  if (stats.size() != state.model.lexicon_size()) {
    throw std::logic_error("lexicon size diverged from the analyses");
  }
  for (const auto& [morph, s] : stats) {
    const FlatCatModel::Entry* entry = state.model.find(morph);
    if (entry == nullptr || entry->stats.token_count != s.token_count) {
      throw std::logic_error("lexicon count for '" + morph +
                             "' diverged from the analyses");
    }
    state.model.set_perplexities(morph, s.left_perplexity, s.right_perplexity);
  }
  state.model.refresh_category_mass();
  // Tags chosen under the old priors are re-decided before the transitions
  // are re-estimated from them.
  for (int round = 0; round < 2; ++round) {
    for (auto& w : state.words) retag(w.analysis, state.model);
    state.model.set_transitions(
        TransitionTable::estimate(count_transitions(state.words), 0.5));
  }
}

}  // namespace

void TrainParams::validate() const {
  if (target_lexicon_size < 1) throw PreconditionError("target size must be >= 1");
  if (!(ppl_threshold > 0) || !(length_threshold > 0)) {
    throw PreconditionError("thresholds must be positive");
  }
  if (!(slope > 0)) throw PreconditionError("slope must be positive");
  if (max_epochs < 1) throw PreconditionError("max_epochs must be >= 1");
  if (!(size_tolerance >= 0 && size_tolerance < 1)) {
    throw PreconditionError("size tolerance must lie in [0, 1)");
  }
  if (alpha_override && !(*alpha_override > 0)) {
    throw PreconditionError("alpha must be positive");
  }
}

std::string_view stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::kTargetReached: return "target_reached";
    case StopReason::kCostConverged: return "cost_converged";
    case StopReason::kMaxEpochs: return "max_epochs";
  }
  return "max_epochs";
}

TrainState init_state(const WordCounts& raw_counts, const TrainParams& params) {
  params.validate();
  if (raw_counts.empty()) throw DataError("cannot train on an empty corpus");
  const WordCounts counts = dampen(raw_counts, params.dampening);

  TrainState state;
  state.params = params;
  state.initial_vocab = counts.total_types();

  Hyperparams hp;
  hp.alpha = params.alpha_override
                 ? *params.alpha_override
                 : compute_alpha(state.initial_vocab, params.target_lexicon_size);
  hp.ppl_threshold = params.ppl_threshold;
  hp.length_threshold = params.length_threshold;
  hp.slope = params.slope;
  // Uniform transitions to start: estimated from the all-stem state they
  // would make every multi-morph analysis prohibitively expensive.
  state.model = FlatCatModel(hp, CharModel::from_counts(raw_counts),
                             TransitionTable::uniform());

  for (const auto& [word, c] : counts.entries()) {
    state.words.push_back({word, c, {{word, Category::kStem}}});
    state.model.add_count(word, c);
  }
  std::stable_sort(state.words.begin(), state.words.end(),
                   [](const AnalyzedWord& a, const AnalyzedWord& b) {
                     return a.count > b.count;
                   });
  for (const auto& [morph, s] : update_usage_stats(state.words)) {
    state.model.set_perplexities(morph, s.left_perplexity, s.right_perplexity);
  }
  state.model.refresh_category_mass();
  state.cost_history.push_back(total_cost(state.model, state.words));
  return state;
}

EpochResult train_epoch(TrainState& state) {
  FlatCatModel& model = state.model;
  const double start_total = state.cost_history.back().total;

  CostTracker tracker(model, state.words);
  double running = start_total;
  EpochResult result;

  running += word_pass(state, tracker, result);
  running += morph_pass(state, tracker, result);

  model.refresh_category_mass();
  const CostBreakdown scratch = total_cost(model, state.words);
  const double drift =
      std::abs(running - scratch.total) / std::max(1.0, std::abs(scratch.total));
  state.max_relative_drift = std::max(state.max_relative_drift, drift);

  reestimate(state);
  const CostBreakdown fresh = total_cost(model, state.words);
  state.cost_history.push_back(fresh);
  ++state.epoch;

  result.cost_delta = fresh.total - start_total;
  result.lexicon_size = model.lexicon_size();
  return result;
}

void TrainReport::write(std::ostream& out, bool timestamp) const {
  const auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "epochs\t" << epochs << '\n';
  out << "stop_reason\t" << stop_reason_name(stop_reason) << '\n';
  out << "final_lexicon_size\t" << final_lexicon_size << '\n';
  out << "alpha\t" << num(alpha) << '\n';
  out << "corpus_cost\t" << num(final_cost.corpus_cost) << '\n';
  out << "weighted_prior_cost\t" << num(final_cost.weighted_prior_cost) << '\n';
  out << "frequency_cost\t" << num(final_cost.frequency_cost) << '\n';
  out << "total_cost\t" << num(final_cost.total) << '\n';
  out << "initial_lexicon_size\t" << initial_lexicon_size << '\n';
  out << "target_lexicon_size\t" << target_lexicon_size << '\n';
  if (target_missed) out << "warning\ttarget_missed\n";
  if (timestamp) {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "timestamp\t" << buf << '\n';
  }
}

TrainResult train(const WordCounts& counts, const TrainParams& params) {
  TrainState state = init_state(counts, params);
  TrainReport report;
  report.stop_reason = StopReason::kMaxEpochs;
  while (state.epoch < params.max_epochs) {
    const double before = state.cost_history.back().total;
    const EpochResult epoch = train_epoch(state);
    if (params.stop_on_target &&
        static_cast<std::int64_t>(epoch.lexicon_size) <= params.target_lexicon_size) {
      report.stop_reason = StopReason::kTargetReached;
      break;
    }
    const double improvement = -epoch.cost_delta / std::max(1.0, std::abs(before));
    if (improvement < params.rel_cost_epsilon) {
      report.stop_reason = StopReason::kCostConverged;
      break;
    }
  }
  report.epochs = state.epoch;
  report.final_lexicon_size = state.model.lexicon_size();
  report.initial_lexicon_size = state.initial_vocab;
  report.target_lexicon_size = params.target_lexicon_size;
  report.alpha = state.model.hyperparams().alpha;
  report.final_cost = state.cost_history.back();
  report.accepted_switches = state.accepted_switches;
  report.max_accepted_delta = state.max_accepted_delta;
  report.max_relative_drift = state.max_relative_drift;
  if (params.stop_on_target &&
      static_cast<double>(report.final_lexicon_size) >
          static_cast<double>(params.target_lexicon_size) *
              (1.0 + params.size_tolerance)) {
    report.target_missed = true;
    warn("final lexicon size " + std::to_string(report.final_lexicon_size) +
         " misses the target " + std::to_string(params.target_lexicon_size));
  }
  return {std::move(state.model), report};
}

std::string segment_line(std::string_view line, const FlatCatModel& model,
                         MarkerScheme scheme) {
  return map_tokens(line, [&](std::string_view word) {
    if (has_reserved_marker(word)) {
      throw DataError("reserved marker in token '" + std::string(word) + "'");
    }
    return render_pieces(morphs_of(model.viterbi_segment(word)), scheme);
  });
}

void segment_corpus(std::istream& in, std::ostream& out, const FlatCatModel& model,
                    MarkerScheme scheme, unsigned threads) {
  transform_lines(in, out, threads, [&](const std::string& line) {
    if (utf8::find_invalid(line)) throw DataError("invalid UTF-8");
    return segment_line(line, model, scheme);
  });
}

}  // namespace lmvr
