#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lmvr/corpus_io.hpp"
#include "lmvr/error.hpp"

using namespace lmvr;

namespace {

WordCounts load(const std::string& text, std::int64_t* lines = nullptr) {
  std::istringstream in(text);
  return load_word_counts(in, lines);
}

}  // namespace

TEST_CASE("load_word_counts counts tokens") {
  const WordCounts c = load("a b a\n");
  CHECK(c.count("a") == 2);
  CHECK(c.count("b") == 1);
  CHECK(c.total_tokens() == 3);
  CHECK(c.total_types() == 2);

  std::int64_t lines = -1;
  const WordCounts empty = load("", &lines);
  CHECK(empty.empty());
  CHECK(empty.total_tokens() == 0);
  CHECK(lines == 0);

  const WordCounts twice = load("x y\nx y\n", &lines);
  CHECK(twice.count("x") == 2);
  CHECK(twice.count("y") == 2);
  CHECK(lines == 2);

  const WordCounts spaced = load("  a\t\tb  \r\n\n  a ");
  CHECK(spaced.count("a") == 2);
  CHECK(spaced.count("b") == 1);
  CHECK(spaced.total_types() == 2);
}

TEST_CASE("load_word_counts is insensitive to line order") {
  std::vector<std::string> lines = {"ev evler", "kitap ev", "a b c a", "evler"};
  std::string joined;
  for (const auto& l : lines) joined += l + "\n";
  const WordCounts reference = load(joined);
  std::mt19937 rng(7);
  for (int round = 0; round < 5; ++round) {
    std::shuffle(lines.begin(), lines.end(), rng);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    CHECK(load(text) == reference);
  }
}

TEST_CASE("load_word_counts rejects bad input") {
  CHECK_THROWS_AS(load("ok\n\xff\n"), DataError);
  try {
    load("fine\nab +ler\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("+ler") != std::string::npos);
    CHECK(what.find('2') != std::string::npos);
  }
  CHECK_THROWS_AS(load("ev@@ ler\n"), DataError);
  CHECK_NOTHROW(load("a+b c@@d\n"));
}

TEST_CASE("corpus_stats") {
  WordCounts c;
  c.add("ab");
  c.add("c");
  CorpusStats s = corpus_stats(c, 1);
  CHECK(s.tokens == 2);
  CHECK(s.types == 2);
  CHECK(s.sentences == 1);
  CHECK(s.mean_word_length == doctest::Approx(1.5));

  WordCounts a;
  a.add("a", 4);
  CHECK(corpus_stats(a, 1).mean_word_length == doctest::Approx(1.0));

  WordCounts d;
  d.add("abc", 2);
  d.add("de", 1);
  CHECK(corpus_stats(d, 1).mean_word_length == doctest::Approx(8.0 / 3.0));

  WordCounts u;
  u.add("\xc4\x9f\xc4\x9f");  // two code points, four bytes
  CHECK(corpus_stats(u, 1).mean_word_length == doctest::Approx(2.0));

  CHECK(corpus_stats(WordCounts{}, 0).mean_word_length == 0.0);
}

TEST_CASE("dampening") {
  WordCounts c;
  c.add("a", 1);
  c.add("b", 3);
  c.add("c", 100);
  CHECK(dampen(c, Dampening::kNone) == c);
  const WordCounts log = dampen(c, Dampening::kLog);
  CHECK(log.count("a") == 1);
  CHECK(log.count("b") == 2);  // 1 + floor(ln 3)
  CHECK(log.count("c") == 5);  // 1 + floor(ln 100)
  const WordCounts ones = dampen(c, Dampening::kOnes);
  CHECK(ones.total_tokens() == 3);
  CHECK(parse_dampening("log") == Dampening::kLog);
  CHECK(dampening_name(Dampening::kOnes) == "ones");
  CHECK_THROWS_AS(parse_dampening("sqrt"), DataError);
}

TEST_CASE("convert_morph_analyses") {
  CHECK(convert_morph_analyses_line("a\xc4\x9f+Noun+A3pl") ==
        "a\xc4\x9f +Noun +A3pl <EOW>");
  CHECK(convert_morph_analyses_line("ev") == "ev <EOW>");
  CHECK(convert_morph_analyses_line("a\xc4\x9fla+Neg+Fut+A3sg") ==
        "a\xc4\x9fla +Neg +Fut +A3sg <EOW>");
  CHECK(convert_morph_analyses_line("ev+Noun kitap+Noun+A3pl") ==
        "ev +Noun <EOW> kitap +Noun +A3pl <EOW>");
  CHECK_THROWS_AS(convert_morph_analyses_line("+Noun"), DataError);

  std::istringstream in("ev+Noun ev\n\nkitap\n");
  std::ostringstream out;
  convert_morph_analyses(in, out);
  CHECK(out.str() == "ev +Noun <EOW> ev <EOW>\n\nkitap <EOW>\n");
  const std::string text = out.str();
  std::size_t eows = 0;
  for (std::size_t p = text.find("<EOW>"); p != std::string::npos;
       p = text.find("<EOW>", p + 1)) {
    ++eows;
  }
  CHECK(eows == 3);
}

TEST_CASE("render_pieces and detokenize") {
  CHECK(render_pieces({"a\xc4\x9f", "lar\xc4\xb1n\xc4\xb1"}, MarkerScheme::kPlusPrefix) ==
        "a\xc4\x9f +lar\xc4\xb1n\xc4\xb1");
  CHECK(render_pieces({"a\xc4\x9f", "lar\xc4\xb1n\xc4\xb1"}, MarkerScheme::kAtatSuffix) ==
        "a\xc4\x9f@@ lar\xc4\xb1n\xc4\xb1");
  CHECK(render_pieces({"ev"}, MarkerScheme::kPlusPrefix) == "ev");
  CHECK(render_pieces({"a", "b", "c"}, MarkerScheme::kAtatSuffix) == "a@@ b@@ c");

  CHECK(detokenize("a\xc4\x9f +lar\xc4\xb1n\xc4\xb1", MarkerScheme::kPlusPrefix) ==
        "a\xc4\x9flar\xc4\xb1n\xc4\xb1");
  CHECK(detokenize("a\xc4\x9f@@ lar\xc4\xb1n\xc4\xb1", MarkerScheme::kAtatSuffix) ==
        "a\xc4\x9flar\xc4\xb1n\xc4\xb1");
  for (const auto scheme : {MarkerScheme::kPlusPrefix, MarkerScheme::kAtatSuffix}) {
    CHECK(detokenize("hello world", scheme) == "hello world");
    CHECK(detokenize("", scheme) == "");
    CHECK(detokenize("  a \t b  ", scheme) == "  a \t b  ");
  }
  CHECK(detokenize("x  ev +ler +de  y", MarkerScheme::kPlusPrefix) == "x  evlerde  y");
  CHECK_THROWS_AS(detokenize("ev\t+de", MarkerScheme::kPlusPrefix), DataError);
  CHECK_THROWS_AS(detokenize("ev  +de", MarkerScheme::kPlusPrefix), DataError);
  CHECK_THROWS_AS(detokenize("ev@@  de", MarkerScheme::kAtatSuffix), DataError);
  CHECK_THROWS_AS(detokenize("ev@@", MarkerScheme::kAtatSuffix), DataError);
  CHECK_THROWS_AS(detokenize("+ler", MarkerScheme::kPlusPrefix), DataError);

  CHECK(parse_marker_scheme("plus") == MarkerScheme::kPlusPrefix);
  CHECK(parse_marker_scheme("atat") == MarkerScheme::kAtatSuffix);
  CHECK(marker_scheme_name(MarkerScheme::kAtatSuffix) == "atat");
  CHECK_THROWS_AS(parse_marker_scheme("hash"), DataError);
}

TEST_CASE("token helpers") {
  CHECK(has_reserved_marker("+x"));
  CHECK(has_reserved_marker("x@@"));
  CHECK_FALSE(has_reserved_marker("x+y"));
  CHECK_FALSE(has_reserved_marker("@"));
  const auto tokens = split_whitespace("  a b\t\tc ");
  REQUIRE(tokens.size() == 3);
  CHECK(tokens[2] == "c");
  CHECK(map_tokens(" a  bc ", [](std::string_view t) { return std::string(t) + "!"; }) ==
        " a!  bc! ");
}
