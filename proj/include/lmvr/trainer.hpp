#ifndef LMVR_TRAINER_HPP
#define LMVR_TRAINER_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmvr/corpus_io.hpp"
#include "lmvr/flatcat.hpp"

namespace lmvr {

struct TrainParams {
  std::int64_t target_lexicon_size = 1;  // m2
  double ppl_threshold = 10.0;
  double length_threshold = 5.0;
  double slope = 1.0;
  int max_epochs = 15;
  double rel_cost_epsilon = 1e-4;
  Dampening dampening = Dampening::kNone;
  double size_tolerance = 0.10;
  /// Fixes alpha instead of deriving it from m1 / m2.
  std::optional<double> alpha_override;
  /// When false the lexicon-size stop rule is skipped (fixed-alpha runs).
  bool stop_on_target = true;

  /// Throws PreconditionError on out-of-range values.
  void validate() const;
};

enum class StopReason { kTargetReached, kCostConverged, kMaxEpochs };
std::string_view stop_reason_name(StopReason reason);

/// Mutable training state. `words` is kept in visit order: descending count,
/// ties by byte order of the word.
struct TrainState {
  TrainParams params;
  FlatCatModel model;
  std::vector<AnalyzedWord> words;
  int epoch = 0;
  /// From-scratch cost after initialisation and after each epoch's
  /// re-estimation.
  std::vector<CostBreakdown> cost_history;
  std::int64_t initial_vocab = 0;  // m1

  // Bookkeeping checked by the acceptance suite.
  std::size_t accepted_switches = 0;
  /// Largest cost delta of any accepted switch (<= 0 by construction).
  double max_accepted_delta = 0.0;
  /// Largest relative gap between the incrementally tracked total and the
  /// from-scratch total, measured at each epoch end before re-estimation.
  double max_relative_drift = 0.0;
};

/// Every word type becomes a single STM morph, alpha is fixed, the character
/// model is frozen and the first cost is recorded. Throws DataError on an
/// empty corpus.
TrainState init_state(const WordCounts& counts, const TrainParams& params);

struct EpochResult {
  double cost_delta = 0.0;
  std::size_t lexicon_size = 0;
  std::size_t switches = 0;
};

/// One greedy pass over the corpus followed by parameter re-estimation.
EpochResult train_epoch(TrainState& state);

struct TrainReport {
  int epochs = 0;
  StopReason stop_reason = StopReason::kMaxEpochs;
  std::size_t final_lexicon_size = 0;
  std::int64_t initial_lexicon_size = 0;
  std::int64_t target_lexicon_size = 0;
  double alpha = 0.0;
  CostBreakdown final_cost;
  bool target_missed = false;
  std::size_t accepted_switches = 0;
  double max_accepted_delta = 0.0;
  double max_relative_drift = 0.0;

  /// key<TAB>value lines. `timestamp` adds a wall-clock line.
  void write(std::ostream& out, bool timestamp) const;
};

struct TrainResult {
  FlatCatModel model;
  TrainReport report;
};

TrainResult train(const WordCounts& counts, const TrainParams& params);

/// Segments every token of one line, preserving whitespace. Throws DataError
/// if a token carries a reserved marker.
std::string segment_line(std::string_view line, const FlatCatModel& model,
                         MarkerScheme scheme);

/// Line-by-line segmentation; with threads > 1 lines are processed by a
/// worker pool and written back in input order.
void segment_corpus(std::istream& in, std::ostream& out, const FlatCatModel& model,
                    MarkerScheme scheme, unsigned threads = 1);

/// Runs `fn(line)` over all lines of `in` with `threads` workers and writes
/// results in input order. Errors are rethrown with the 1-based line number.
template <typename Fn>
void transform_lines(std::istream& in, std::ostream& out, unsigned threads,
                     Fn&& fn);

}  // namespace lmvr

#include "lmvr/detail/transform_lines.hpp"

#endif  // LMVR_TRAINER_HPP
