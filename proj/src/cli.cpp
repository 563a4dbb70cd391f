#include "lmvr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <unistd.h>

#include "lmvr/bpe.hpp"
#include "lmvr/corpus_io.hpp"
#include "lmvr/error.hpp"
#include "lmvr/evalkit.hpp"
#include "lmvr/flatcat.hpp"
#include "lmvr/trainer.hpp"
#include "lmvr/utf8.hpp"

namespace lmvr::cli {

namespace {

namespace fs = std::filesystem;

// Writes to "<path>.tmp.<pid>" and renames on commit; an uncommitted
// output is removed on destruction.
class AtomicOutput {
 public:
  AtomicOutput(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
      return;
    }
    target_ = path;
    temp_ = path + ".tmp." + std::to_string(::getpid());
    file_ = std::make_unique<std::ofstream>(temp_, std::ios::binary);
    if (!*file_) throw DataError("cannot open '" + temp_ + "' for writing");
    stream_ = file_.get();
  }
  AtomicOutput(const AtomicOutput&) = delete;
  AtomicOutput& operator=(const AtomicOutput&) = delete;
  ~AtomicOutput() {
    if (file_ && !committed_) {
      file_->close();
      std::error_code ec;
      fs::remove(temp_, ec);
    }
  }

  std::ostream& stream() { return *stream_; }

  void commit() {
    stream_->flush();
    if (!*stream_) throw DataError("write failed");
    if (!file_) return;
    file_->close();
    if (!*file_) throw DataError("cannot finish writing '" + temp_ + "'");
    fs::rename(temp_, target_);
    committed_ = true;
  }

 private:
  std::ostream* stream_ = nullptr;
  std::unique_ptr<std::ofstream> file_;
  std::string target_;
  std::string temp_;
  bool committed_ = false;
};

class Input {
 public:
  Input(const std::string& path, std::istream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file_) throw DataError("cannot open '" + path + "'");
    stream_ = file_.get();
  }
  std::istream& stream() { return *stream_; }

 private:
  std::istream* stream_ = nullptr;
  std::unique_ptr<std::ifstream> file_;
};

const std::vector<std::string> kMarkers = {"plus", "atat"};
const std::vector<std::string> kDampenings = {"none", "log", "ones"};

struct Options {
  std::string input = "-";
  std::string output = "-";
  std::string model;
  std::string report = "-";
  std::string marker = "plus";
  std::string dampening = "none";
  std::int64_t target_vocab = 0;
  double ppl_threshold = 10.0;
  double len_threshold = 5.0;
  double slope = 1.0;
  int max_epochs = 15;
  double epsilon = 1e-4;
  double size_tolerance = 0.10;
  std::optional<double> alpha;
  bool ignore_target = false;
  bool no_timestamp = false;
  unsigned threads = 1;
  std::size_t merges = 0;
  std::int64_t min_frequency = 2;
  std::string vocab_a;
  std::string vocab_b;
  bool strip = false;
  std::size_t top_k = 10;
  std::string vocab_out;
};

int cmd_train(const Options& o, std::istream& in, std::ostream& out) {
  TrainParams params;
  params.target_lexicon_size = o.target_vocab;
  params.ppl_threshold = o.ppl_threshold;
  params.length_threshold = o.len_threshold;
  params.slope = o.slope;
  params.max_epochs = o.max_epochs;
  params.rel_cost_epsilon = o.epsilon;
  params.size_tolerance = o.size_tolerance;
  params.dampening = parse_dampening(o.dampening);
  params.alpha_override = o.alpha;
  params.stop_on_target = !o.ignore_target;
  params.validate();

  Input input(o.input, in);
  const WordCounts counts = load_word_counts(input.stream());
  const TrainResult result = train(counts, params);

  AtomicOutput model_out(o.model, out);
  result.model.save(model_out.stream());
  model_out.commit();
  AtomicOutput report_out(o.report, out);
  result.report.write(report_out.stream(), !o.no_timestamp);
  report_out.commit();
  return result.report.target_missed ? kTargetMissed : kOk;
}

FlatCatModel read_flatcat(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open model '" + path + "'");
  return FlatCatModel::load(f);
}

BpeModel read_bpe(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open model '" + path + "'");
  return BpeModel::load(f);
}

int cmd_segment(const Options& o, std::istream& in, std::ostream& out) {
  const MarkerScheme scheme = parse_marker_scheme(o.marker);
  const FlatCatModel model = read_flatcat(o.model);
  Input input(o.input, in);
  AtomicOutput output(o.output, out);
  segment_corpus(input.stream(), output.stream(), model, scheme, o.threads);
  output.commit();
  return kOk;
}

int cmd_bpe_train(const Options& o, std::istream& in, std::ostream& out) {
  const Dampening damp = parse_dampening(o.dampening);
  Input input(o.input, in);
  const WordCounts counts = dampen(load_word_counts(input.stream()), damp);
  BpeLearnOptions options;
  options.min_frequency = o.min_frequency;
  const BpeModel model = learn_bpe(counts, o.merges, options);

  AtomicOutput model_out(o.model, out);
  model.save(model_out.stream());
  model_out.commit();
  AtomicOutput report_out(o.report, out);
  report_out.stream() << "merges_requested\t" << o.merges << '\n'
                      << "merges_learned\t" << model.merges().size() << '\n'
                      << "vocab_types\t" << bpe_vocab(model, counts).size() << '\n';
  report_out.commit();
  return kOk;
}

int cmd_bpe_apply(const Options& o, std::istream& in, std::ostream& out) {
  const BpeModel model = read_bpe(o.model);
  Input input(o.input, in);
  AtomicOutput output(o.output, out);
  transform_lines(input.stream(), output.stream(), o.threads,
                  [&](const std::string& line) {
                    if (!utf8::is_valid(line)) throw DataError("invalid UTF-8");
                    return map_tokens(line, [&](std::string_view word) {
                      if (has_reserved_marker(word)) {
                        throw DataError("reserved marker in token '" +
                                        std::string(word) + "'");
                      }
                      return render_pieces(model.segment_word(word),
                                           MarkerScheme::kAtatSuffix);
                    });
                  });
  output.commit();
  return kOk;
}

int cmd_detok(const Options& o, std::istream& in, std::ostream& out) {
  const MarkerScheme scheme = parse_marker_scheme(o.marker);
  Input input(o.input, in);
  AtomicOutput output(o.output, out);
  transform_lines(input.stream(), output.stream(), 1,
                  [&](const std::string& line) { return detokenize(line, scheme); });
  output.commit();
  return kOk;
}

int cmd_stats(const Options& o, std::istream& in, std::ostream& out) {
  Input input(o.input, in);
  std::int64_t lines = 0;
  const WordCounts counts = load_word_counts(input.stream(), &lines);
  const CorpusStats s = corpus_stats(counts, lines);
  AtomicOutput output(o.output, out);
  output.stream() << "sentences\t" << s.sentences << '\n'
                  << "tokens\t" << s.tokens << '\n'
                  << "types\t" << s.types << '\n'
                  << "mean_word_length\t" << s.mean_word_length << '\n';
  output.commit();
  return kOk;
}

int cmd_overlap(const Options& o, std::istream& in, std::ostream& out) {
  Input a(o.vocab_a, in);
  const auto va = read_vocab(a.stream());
  Input b(o.vocab_b, in);
  const auto vb = read_vocab(b.stream());
  AtomicOutput output(o.output, out);
  vocab_overlap(va, vb, o.strip).write(output.stream());
  output.commit();
  return kOk;
}

int cmd_convert(const Options& o, std::istream& in, std::ostream& out) {
  Input input(o.input, in);
  AtomicOutput output(o.output, out);
  convert_morph_analyses(input.stream(), output.stream());
  output.commit();
  return kOk;
}

int cmd_report(const Options& o, std::istream& in, std::ostream& out) {
  const MarkerScheme scheme = parse_marker_scheme(o.marker);
  Input input(o.input, in);
  const SegmentationReport r = segmentation_report(input.stream(), scheme, o.top_k);
  if (!o.vocab_out.empty()) {
    AtomicOutput vocab(o.vocab_out, out);
    for (const auto& piece : r.vocab) vocab.stream() << piece << '\n';
    vocab.commit();
  }
  AtomicOutput output(o.output, out);
  r.write(output.stream());
  output.commit();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Morphology-aware subword segmentation with a BPE baseline", "lmvr"};
  app.require_subcommand(1, 1);

  auto add_io = [&](CLI::App* sub, bool with_output) {
    sub->add_option("-i,--input", o.input, "Input file, '-' for stdin")
        ->capture_default_str();
    if (with_output) {
      sub->add_option("-o,--output", o.output, "Output file, '-' for stdout")
          ->capture_default_str();
    }
  };

  auto* train = app.add_subcommand("train", "Learn an LMVR segmentation model");
  add_io(train, false);
  train->add_option("--target-vocab", o.target_vocab,
                    "Target output lexicon size (m2)")
      ->required()
      ->check(CLI::PositiveNumber);
  train->add_option("--ppl-threshold", o.ppl_threshold,
                    "Perplexity threshold for prefix/suffix likeness")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--len-threshold", o.len_threshold,
                    "Length threshold for stem likeness")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--slope", o.slope, "Sigmoid slope of the category priors")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--max-epochs", o.max_epochs, "Maximum training epochs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--epsilon", o.epsilon,
                    "Stop when relative cost improvement falls below this")
      ->capture_default_str();
  train->add_option("--size-tolerance", o.size_tolerance,
                    "Allowed overshoot of the target before exit code 3")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  train->add_option("--alpha", o.alpha,
                    "Fix the prior weight instead of initial/target size")
      ->check(CLI::PositiveNumber);
  train->add_flag("--ignore-target", o.ignore_target,
                  "Do not stop when the lexicon reaches the target size");
  train->add_option("--dampening", o.dampening, "Count transform before training")
      ->capture_default_str()
      ->check(CLI::IsMember(kDampenings));
  train->add_option("-m,--model", o.model, "Model output path")->required();
  train->add_option("--report", o.report, "Training report path, '-' for stdout")
      ->capture_default_str();
  train->add_flag("--no-timestamp", o.no_timestamp,
                  "Omit the wall-clock line from the report");

  auto* segment = app.add_subcommand("segment", "Segment text with an LMVR model");
  add_io(segment, true);
  segment->add_option("-m,--model", o.model, "LMVR model")->required();
  segment->add_option("--marker", o.marker, "Marker scheme: plus or atat")
      ->capture_default_str()
      ->check(CLI::IsMember(kMarkers));
  segment->add_option("--threads", o.threads, "Worker threads")
      ->capture_default_str()
      ->check(CLI::Range(1u, 256u));

  auto* bpe_train = app.add_subcommand("bpe-train", "Learn BPE merge rules");
  add_io(bpe_train, false);
  bpe_train->add_option("--merges", o.merges, "Number of merge operations")
      ->required();
  bpe_train->add_option("--min-frequency", o.min_frequency,
                        "Stop when the best pair is rarer than this")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bpe_train->add_option("--dampening", o.dampening, "Count transform before learning")
      ->capture_default_str()
      ->check(CLI::IsMember(kDampenings));
  bpe_train->add_option("-m,--model", o.model, "Model output path")->required();
  bpe_train->add_option("--report", o.report, "Summary output, '-' for stdout")
      ->capture_default_str();

  auto* bpe_apply = app.add_subcommand("bpe-apply", "Apply BPE merge rules");
  add_io(bpe_apply, true);
  bpe_apply->add_option("-m,--model", o.model, "BPE model")->required();
  bpe_apply->add_option("--threads", o.threads, "Worker threads")
      ->capture_default_str()
      ->check(CLI::Range(1u, 256u));

  auto* detok = app.add_subcommand("detok", "Undo segmentation markers");
  add_io(detok, true);
  detok->add_option("--marker", o.marker, "Marker scheme: plus or atat")
      ->capture_default_str()
      ->check(CLI::IsMember(kMarkers));

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  add_io(stats, true);

  auto* overlap = app.add_subcommand("overlap", "Compare two vocabularies");
  overlap->add_option("--a", o.vocab_a, "First vocabulary, one type per line")
      ->required();
  overlap->add_option("--b", o.vocab_b, "Second vocabulary, one type per line")
      ->required();
  overlap->add_flag("--strip-markers", o.strip,
                    "Compare types after removing '+' and '@@' markers");
  overlap->add_option("-o,--output", o.output, "Output file, '-' for stdout")
      ->capture_default_str();

  auto* convert = app.add_subcommand(
      "convert-analyses", "Turn root+Tag+Tag analyses into root +Tag +Tag <EOW>");
  add_io(convert, true);

  auto* report = app.add_subcommand("report", "Statistics of a segmented text");
  add_io(report, true);
  report->add_option("--marker", o.marker, "Marker scheme: plus or atat")
      ->capture_default_str()
      ->check(CLI::IsMember(kMarkers));
  report->add_option("--top-k", o.top_k, "Most frequent pieces to list")
      ->capture_default_str();
  report->add_option("--vocab-out", o.vocab_out,
                     "Also write the piece vocabulary to this file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*train) return cmd_train(o, in, out);
    if (*segment) return cmd_segment(o, in, out);
    if (*bpe_train) return cmd_bpe_train(o, in, out);
    if (*bpe_apply) return cmd_bpe_apply(o, in, out);
    if (*detok) return cmd_detok(o, in, out);
    if (*stats) return cmd_stats(o, in, out);
    if (*overlap) return cmd_overlap(o, in, out);
    if (*convert) return cmd_convert(o, in, out);
    if (*report) return cmd_report(o, in, out);
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace lmvr::cli
