#include <doctest.h>

#include <random>
#include <set>

#include "citenav/analyzer.hpp"
#include "citenav/text.hpp"

using namespace citenav;

namespace {

std::vector<std::string> toks(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

}  // namespace

TEST_CASE("split_words keeps alphanumeric runs") {
  CHECK(split_words("Deep Learning, for NLP!", false) == toks({"Deep", "Learning", "for", "NLP"}));
  CHECK(split_words("pre-training x2 3d", true) == toks({"pre", "training", "x2", "3d"}));
  CHECK(split_words("", true).empty());
  CHECK(split_words("  ...  ", true).empty());
}

TEST_CASE("split_words lowercases non-ASCII letters and treats them as word characters") {
  CHECK(split_words("Über Ärger", true) == toks({"über", "ärger"}));
  CHECK(split_words("ΣΟΦΙΑ", true) == toks({"σοφια"}));
  CHECK(split_words("naïve café", true) == toks({"naïve", "café"}));
}

TEST_CASE("split_words survives truncated UTF-8") {
  const std::string broken = std::string("ab") + static_cast<char>(0xC3);
  const auto words = split_words(broken, true);
  REQUIRE_FALSE(words.empty());
  CHECK(words.front().starts_with("ab"));
}

TEST_CASE("analyze examples") {
  AnalyzerConfig plain{true, false, false};
  CHECK(analyze("Deep Learning, for NLP!", plain) == toks({"deep", "learning", "for", "nlp"}));
  AnalyzerConfig stop{true, true, false};
  CHECK(analyze("Deep Learning, for NLP!", stop) == toks({"deep", "learning", "nlp"}));
  CHECK(analyze("", AnalyzerConfig{}).empty());
  CHECK(analyze("Learning Networks", AnalyzerConfig{}) == toks({"learn", "network"}));
}

TEST_CASE("case is kept when lowercasing is off, and stopwords then match exactly") {
  AnalyzerConfig cased{false, true, false};
  CHECK(analyze("The the", cased) == toks({"The"}));
}

TEST_CASE("analysis is a pure function of config and text") {
  std::mt19937_64 rng(3);
  const char* pool[] = {"running", "The", "graphs", "of", "citation", "Ranking", "and", "relational", "x"};
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    for (int i = 0; i < 12; ++i) text += std::string(pool[rng() % 9]) + (rng() % 2 ? " " : ", ");
    for (int mask = 0; mask < 8; ++mask) {
      AnalyzerConfig c{bool(mask & 1), bool(mask & 2), bool(mask & 4)};
      CHECK(analyze(text, c) == analyze(text, c));
    }
  }
}

TEST_CASE("shipped stopword list") {
  const auto list = stopword_list();
  CHECK(list.size() == 33);
  CHECK(is_stopword("the"));
  CHECK(is_stopword("for"));
  CHECK_FALSE(is_stopword("network"));
}

TEST_CASE("analyzer fingerprint distinguishes every switch") {
  std::set<std::string> seen;
  for (int mask = 0; mask < 8; ++mask) seen.insert(analyzer_fingerprint({bool(mask & 1), bool(mask & 2), bool(mask & 4)}));
  CHECK(seen.size() == 8);
}

TEST_CASE("Porter stemmer reference vocabulary") {
  const std::pair<const char*, const char*> cases[] = {
      {"caresses", "caress"},   {"ponies", "poni"},       {"ties", "ti"},
      {"caress", "caress"},     {"cats", "cat"},          {"feed", "feed"},
      {"agreed", "agre"},       {"plastered", "plaster"}, {"bled", "bled"},
      {"motoring", "motor"},    {"sing", "sing"},         {"conflated", "conflat"},
      {"troubled", "troubl"},   {"sized", "size"},        {"hopping", "hop"},
      {"tanned", "tan"},        {"falling", "fall"},      {"hissing", "hiss"},
      {"fizzed", "fizz"},       {"failing", "fail"},      {"filing", "file"},
      {"happy", "happi"},       {"sky", "sky"},           {"relational", "relat"},
      {"conditional", "condit"}, {"rational", "ration"},  {"valenci", "valenc"},
      {"digitizer", "digit"},   {"conformabli", "conform"}, {"radicalli", "radic"},
      {"differentli", "differ"}, {"vileli", "vile"},      {"analogousli", "analog"},
      {"vietnamization", "vietnam"}, {"predication", "predic"}, {"operator", "oper"},
      {"feudalism", "feudal"},  {"decisiveness", "decis"}, {"hopefulness", "hope"},
      {"callousness", "callous"}, {"formaliti", "formal"}, {"sensitiviti", "sensit"},
      {"sensibiliti", "sensibl"}, {"triplicate", "triplic"}, {"formative", "form"},
      {"formalize", "formal"},  {"electriciti", "electr"}, {"electrical", "electr"},
      {"hopeful", "hope"},      {"goodness", "good"},     {"revival", "reviv"},
      {"allowance", "allow"},   {"inference", "infer"},   {"airliner", "airlin"},
      {"gyroscopic", "gyroscop"}, {"adjustable", "adjust"}, {"defensible", "defens"},
      {"irritant", "irrit"},    {"replacement", "replac"}, {"adjustment", "adjust"},
      {"dependent", "depend"},  {"adoption", "adopt"},    {"homologou", "homolog"},
      {"communism", "commun"},  {"activate", "activ"},    {"angulariti", "angular"},
      {"homologous", "homolog"}, {"effective", "effect"}, {"bowdlerize", "bowdler"},
      {"probate", "probat"},    {"rate", "rate"},         {"cease", "ceas"},
      {"controll", "control"},  {"roll", "roll"},         {"generalizations", "gener"},
      {"oscillators", "oscil"}, {"knightly", "knightli"}, {"generously", "gener"},
  };
  for (const auto& [in, out] : cases) {
    CAPTURE(in);
    CHECK(porter_stem(in) == out);
  }
}

TEST_CASE("Porter leaves short and non-alphabetic words alone") {
  CHECK(porter_stem("as") == "as");
  CHECK(porter_stem("a") == "a");
  CHECK(porter_stem("") == "");
  CHECK(porter_stem("x2") == "x2");
  CHECK(porter_stem("café") == "café");
}

TEST_CASE("Porter is idempotent on its reference outputs for consonant-only words") {
  for (const char* w : {"qbcd", "qzzz", "qxtr"}) CHECK(porter_stem(w) == w);
}

TEST_CASE("fnv1a64 and to_hex") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(to_hex(0xabcULL) == "0000000000000abc");
}

TEST_CASE("utf8_length counts code points") {
  CHECK(utf8_length("abc") == 3);
  CHECK(utf8_length("über") == 4);
  CHECK(utf8_length("") == 0);
}

TEST_CASE("uniform_below stays in range and is reproducible") {
  std::mt19937_64 a(11), b(11);
  for (int i = 0; i < 1000; ++i) {
    const auto x = uniform_below(a, 7);
    CHECK(x < 7);
    CHECK(x == uniform_below(b, 7));
  }
}
