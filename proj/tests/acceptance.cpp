// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. argv[1] is the path of the lmvr CLI binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "bpe_reference.hpp"
#include "flatcat_oracle.hpp"
#include "lmvr/bpe.hpp"
#include "lmvr/corpus_io.hpp"
#include "lmvr/evalkit.hpp"
#include "lmvr/flatcat.hpp"
#include "lmvr/log.hpp"
#include "lmvr/trainer.hpp"
#include "random_text.hpp"
#include "synthetic_corpus.hpp"

namespace fs = std::filesystem;
using namespace lmvr;

namespace {

constexpr double kDriftTolerance = 1e-6;
constexpr double kViterbiTolerance = 1e-9;
constexpr double kTransitionTolerance = 1e-9;
constexpr double kEmissionTolerance = 1e-6;
constexpr double kMinF1 = 0.70;
constexpr double kTrainSeconds = 60.0;
constexpr double kViterbiSeconds = 30.0;
constexpr std::int64_t kTargetVocab = 120;
constexpr std::size_t kFuzzLines = 10000;

int failures = 0;
std::string cli_path;
fs::path work_dir;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

void check(const std::string& name, const std::function<std::string(bool&)>& body) {
  bool ok = false;
  std::string detail;
  try {
    detail = body(ok);
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  report(name, ok, detail);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream(path, std::ios::binary) << content;
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + cli_path + "\" " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

std::map<std::string, std::string> parse_report(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab != std::string::npos) out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

std::string synthetic_text(const testing::SyntheticCorpus& c) {
  std::string text;
  for (std::size_t i = 0; i < c.words.size(); ++i) {
    const std::string w = c.words[i].word();
    for (std::int64_t k = 0; k < c.counts[i]; ++k) {
      text += w;
      text += (k % 20 == 19) ? '\n' : ' ';
    }
    text += '\n';
  }
  return text;
}

std::string fuzz_text() {
  std::string text;
  for (const auto& line : testing::random_lines(90210, kFuzzLines)) text += line + "\n";
  return text;
}

std::vector<FlatCatModel> trained_fleet;

std::string check_normalization(const FlatCatModel& model, bool& ok) {
  double worst_t = 0.0, worst_e = 0.0;
  for (std::size_t from = 0; from < kNumStates; ++from) {
    double row = 0.0;
    for (std::size_t to = 0; to < kNumStates; ++to) {
      row += model.transitions().prob(static_cast<Category>(from), static_cast<Category>(to));
    }
    worst_t = std::max(worst_t, std::abs(row - 1.0));
  }
  for (const Category cat : kMorphCategories) {
    if (!(model.category_mass()[morph_index(cat)] > 0.0)) continue;
    double sum = 0.0;
    for (const auto& [morph, entry] : model.lexicon()) {
      sum += std::exp(model.emission_logprob(morph, cat));
    }
    worst_e = std::max(worst_e, std::abs(sum - 1.0));
  }
  ok = worst_t <= kTransitionTolerance && worst_e <= kEmissionTolerance;
  std::ostringstream s;
  s << "max |row-1| " << worst_t << ", max |emission sum-1| " << worst_e;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: lmvr_acceptance <path-to-lmvr-cli>\n";
    return 2;
  }
  cli_path = argv[1];
  work_dir = fs::temp_directory_path() / ("lmvr_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work_dir);
  set_warning_sink([](std::string_view) {});

  check("alpha rule", [](bool& ok) {
    const double a = compute_alpha(170000, 40000);
    const double b = compute_alpha(270000, 30000);
    ok = a == 4.25 && b == 9.0;
    std::ostringstream s;
    s << "170000/40000 = " << a << ", 270000/30000 = " << b;
    return s.str();
  });

  const testing::SyntheticCorpus corpus = testing::make_synthetic_corpus();
  const fs::path corpus_path = work_dir / "synthetic.txt";
  write_file(corpus_path, synthetic_text(corpus));
  const fs::path model_path = work_dir / "synthetic.lmvr";
  const fs::path report_path = work_dir / "synthetic.report";

  check("vocabulary budget control", [&](bool& ok) {
    const auto t0 = std::chrono::steady_clock::now();
    const int code = run_cli("train -i " + quoted(corpus_path) + " --target-vocab " +
                             std::to_string(kTargetVocab) + " -m " + quoted(model_path) +
                             " --report " + quoted(report_path) + " --no-timestamp");
    const double secs = seconds_since(t0);
    auto rep = parse_report(slurp(report_path));
    const long long size = rep.count("final_lexicon_size") ? std::stoll(rep["final_lexicon_size"]) : -1;
    const long long limit = kTargetVocab + kTargetVocab / 10 + (kTargetVocab % 10 ? 1 : 0);
    ok = code == 0 && rep["stop_reason"] == "target_reached" && size >= 0 && size <= limit &&
         secs <= kTrainSeconds;
    std::ostringstream s;
    s << "exit " << code << ", stop_reason " << rep["stop_reason"] << ", lexicon " << size
      << " (limit " << limit << "), " << secs << " s";
    return s.str();
  });

  check("morphology recovery", [&](bool& ok) {
    std::ifstream in(model_path, std::ios::binary);
    const FlatCatModel model = FlatCatModel::load(in);
    trained_fleet.push_back(model);
    std::vector<SegmentedWord> predicted;
    for (std::size_t i = 0; i < corpus.words.size(); ++i) {
      const std::string w = corpus.words[i].word();
      predicted.push_back({w, corpus.counts[i], boundaries_of(morphs_of(model.viterbi_segment(w)))});
    }
    const BoundaryScore score = boundary_score(predicted, corpus.gold());
    ok = score.f1 >= kMinF1;
    std::ostringstream s;
    s << "P " << score.precision << " R " << score.recall << " F1 " << score.f1
      << " (threshold " << kMinF1 << ")";
    return s.str();
  });

  check("cost monotonicity", [&](bool& ok) {
    TrainParams params;
    params.target_lexicon_size = kTargetVocab;
    const TrainResult r = train(corpus.word_counts, params);
    trained_fleet.push_back(r.model);
    ok = r.report.max_accepted_delta <= 0.0 && r.report.max_relative_drift <= kDriftTolerance &&
         r.report.accepted_switches > 0;
    std::ostringstream s;
    s << r.report.accepted_switches << " accepted switches, max delta "
      << r.report.max_accepted_delta << ", max relative drift " << r.report.max_relative_drift;
    return s.str();
  });

  check("viterbi oracle", [](bool& ok) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(777);
    double worst = 0.0;
    std::size_t words = 0;
    bool all_ok = true;
    for (int trial = 0; trial < 200; ++trial) {
      const bool wide = trial % 4 == 0;
      const std::string alphabet = wide ? "abc" : "ab";
      const FlatCatModel model = testing::random_toy_model(rng, alphabet, 8);
      const testing::OracleScorer oracle(model);
      for (const auto& word : testing::all_words(alphabet, wide ? 5 : 6)) {
        const Analysis a = model.viterbi_segment(word);
        const double got = testing::oracle_analysis_cost(oracle, a);
        const double want = testing::brute_force_min_cost(oracle, word);
        ++words;
        if (join_morphs(a) != word || !std::isfinite(got) ||
            !testing::close_relative(got, want, kViterbiTolerance)) {
          all_ok = false;
        } else if (got != want) {
          worst = std::max(worst, std::abs(got - want) / std::max(std::abs(got), std::abs(want)));
        }
      }
    }
    const double secs = seconds_since(t0);
    ok = all_ok && secs <= kViterbiSeconds;
    std::ostringstream s;
    s << "200 models, " << words << " words, max relative gap " << worst << ", " << secs << " s";
    return s.str();
  });

  check("alpha monotonicity", [&](bool& ok) {
    std::vector<std::size_t> sizes;
    for (const double alpha : {1.0, 4.25, 9.0}) {
      TrainParams params;
      params.target_lexicon_size = kTargetVocab;
      params.alpha_override = alpha;
      params.stop_on_target = false;
      params.rel_cost_epsilon = -1.0;
      params.max_epochs = 15;
      const TrainResult r = train(corpus.word_counts, params);
      sizes.push_back(r.report.final_lexicon_size);
      trained_fleet.push_back(r.model);
    }
    ok = sizes[0] >= sizes[1] && sizes[1] >= sizes[2];
    std::ostringstream s;
    s << "lexicon sizes " << sizes[0] << " >= " << sizes[1] << " >= " << sizes[2];
    return s.str();
  });

  check("normalization", [&](bool& ok) {
    std::string worst;
    ok = !trained_fleet.empty();
    for (const auto& model : trained_fleet) {
      bool model_ok = false;
      const std::string detail = check_normalization(model, model_ok);
      if (!model_ok || worst.empty()) worst = detail;
      ok = ok && model_ok;
    }
    return std::to_string(trained_fleet.size()) + " models, " + worst;
  });

  const std::string fuzz = fuzz_text();
  const fs::path fuzz_path = work_dir / "fuzz.txt";
  write_file(fuzz_path, fuzz);

  check("bpe correctness", [&](bool& ok) {
    auto counts_of = [](std::initializer_list<std::pair<const char*, std::int64_t>> items) {
      WordCounts c;
      for (const auto& [w, n] : items) c.add(w, n);
      return c;
    };
    const BpeModel aaa = learn_bpe(counts_of({{"aaa", 4}}), 1);
    const BpeModel abcb = learn_bpe(counts_of({{"ab", 3}, {"cb", 2}}), 1);
    const bool first = aaa.merges().size() == 1 && aaa.merges()[0] == MergeRule{"a", "a"} &&
                       abcb.merges().size() == 1 &&
                       abcb.merges()[0] == MergeRule{"b", std::string(BpeModel::kEndOfWord)};

    std::mt19937 rng(4242);
    bool selection = true;
    for (int trial = 0; trial < 20; ++trial) {
      WordCounts counts;
      const std::size_t types = 5 + rng() % 20;
      for (std::size_t i = 0; i < types; ++i) {
        std::string w;
        const std::size_t len = 1 + rng() % 6;
        for (std::size_t k = 0; k < len; ++k) w.push_back("abcd"[rng() % 4]);
        counts.add(w, 1 + static_cast<std::int64_t>(rng() % 9));
      }
      std::vector<std::int64_t> merge_counts;
      const BpeModel m = learn_bpe(counts, 40, {}, &merge_counts);
      const auto ref = testing::reference_bpe(counts, 40);
      if (ref.size() != m.merges().size()) selection = false;
      for (std::size_t i = 0; selection && i < ref.size(); ++i) {
        selection = ref[i].rule == m.merges()[i] && merge_counts[i] == ref[i].best_count;
      }
    }

    std::istringstream in(fuzz);
    const WordCounts fuzz_counts = load_word_counts(in);
    const BpeModel model = learn_bpe(fuzz_counts, 2000);
    std::istringstream lines(fuzz);
    std::string line;
    std::size_t mismatches = 0;
    while (std::getline(lines, line)) {
      if (detokenize(apply_bpe(line, model), MarkerScheme::kAtatSuffix) != line) ++mismatches;
    }
    ok = first && selection && mismatches == 0;
    std::ostringstream s;
    s << "first merges " << (first ? "ok" : "wrong") << ", 20 random corpora "
      << (selection ? "match" : "differ") << ", fuzz round trip mismatches " << mismatches << "/"
      << kFuzzLines;
    return s.str();
  });

  check("lmvr round trip", [&](bool& ok) {
    std::istringstream in(fuzz);
    const WordCounts counts = load_word_counts(in);
    TrainParams params;
    params.target_lexicon_size = static_cast<std::int64_t>(counts.total_types()) / 2;
    params.max_epochs = 2;
    const FlatCatModel model = train(counts, params).model;
    std::size_t mismatches = 0;
    for (const MarkerScheme scheme : {MarkerScheme::kPlusPrefix, MarkerScheme::kAtatSuffix}) {
      std::istringstream lines(fuzz);
      std::string line;
      while (std::getline(lines, line)) {
        if (detokenize(segment_line(line, model, scheme), scheme) != line) ++mismatches;
      }
    }
    ok = mismatches == 0;
    return "mismatches " + std::to_string(mismatches) + "/" + std::to_string(2 * kFuzzLines) +
           " lines over both marker schemes";
  });

  check("determinism", [&](bool& ok) {
    std::vector<std::string> differing;
    auto twice = [&](const std::string& name, const std::function<std::string(int)>& make_cmd,
                     const std::function<std::string(int)>& output) {
      const int a = run_cli(make_cmd(1));
      const int b = run_cli(make_cmd(2));
      if (a != b || output(1) != output(2) || output(1).empty()) differing.push_back(name);
    };
    const fs::path seg_model = work_dir / "det.lmvr";
    auto path = [&](const std::string& stem, int run) { return work_dir / (stem + std::to_string(run)); };
    twice("train",
          [&](int r) {
            return "train -i " + quoted(corpus_path) + " --target-vocab 120 -m " +
                   quoted(path("train.m", r)) + " --report " + quoted(path("train.r", r)) +
                   " --no-timestamp";
          },
          [&](int r) { return slurp(path("train.m", r)) + slurp(path("train.r", r)); });
    twice("bpe-train",
          [&](int r) {
            return "bpe-train -i " + quoted(fuzz_path) + " --merges 500 -m " +
                   quoted(path("bpe.m", r)) + " --report " + quoted(path("bpe.r", r));
          },
          [&](int r) { return slurp(path("bpe.m", r)) + slurp(path("bpe.r", r)); });
    twice("segment",
          [&](int r) {
            return "segment -m " + quoted(model_path) + " -i " + quoted(fuzz_path) + " -o " +
                   quoted(path("seg.o", r)) + (r == 2 ? " --threads 4" : "");
          },
          [&](int r) { return slurp(path("seg.o", r)); });
    ok = differing.empty();
    std::string detail = ok ? "train, bpe-train and segment byte-identical across runs"
                            : "differing outputs:";
    for (const auto& d : differing) detail += " " + d;
    return detail;
  });

  check("format conversion", [](bool& ok) {
    const std::string got = convert_morph_analyses_line("a\xc4\x9f+Noun+A3pl");
    const std::string want = "a\xc4\x9f +Noun +A3pl <EOW>";
    ok = got == want;
    return "\"" + got + "\"";
  });

  std::error_code ec;
  fs::remove_all(work_dir, ec);
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
