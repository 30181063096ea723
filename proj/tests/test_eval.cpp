#include "doctest.h"

#include <cmath>
#include <fstream>

#include "xltt/eval.hpp"
#include "xltt/rng.hpp"

using namespace xltt;

namespace {

std::string random_string(Rng& rng) {
  static const char* pieces[] = {"the",  "a",    "an",   "Cat",   "sat",  "mat.",
                                 "don't", "--",  "  ",   "WHO?",  "42",   "naïve",
                                 "“quoted”", "—dash—", "é",
                                 "。", "！", "tab\t", "\n", "...", "(x)",
                                 "café", "¿qué?", " "};
  const std::size_t n = rng.index(8);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += pieces[rng.index(sizeof(pieces) / sizeof(pieces[0]))];
  }
  return s;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("normalize_answer examples") {
  CHECK(normalize_answer("The Cat.") == "cat");
  CHECK(normalize_answer("") == "");
  CHECK(normalize_answer("  a  an  the  ") == "");
  CHECK(normalize_answer("An Apple, a day!") == "apple day");
  CHECK(normalize_answer("don't") == "dont");
  CHECK(normalize_answer("tabs\tand\nnewlines") == "tabs and newlines");
  // Unicode punctuation stripped, non-ASCII letters preserved
  CHECK(normalize_answer("“café” — ok！") == "café ok");
  CHECK(normalize_answer("theory") == "theory");  // only standalone articles drop
}

TEST_CASE("normalize_answer idempotent over fuzz corpus") {
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = random_string(rng);
    const std::string once = normalize_answer(s);
    CHECK(normalize_answer(once) == once);
  }
}

TEST_CASE("em examples") {
  CHECK(em("The Cat.", "the cat") == 1);
  CHECK(em("cat", "dog") == 0);
  CHECK(em("", "cat") == 0);
  CHECK(em("", "") == 1);
}

TEST_CASE("f1 examples") {
  CHECK(f1("exact match here", "exact match here") == doctest::Approx(1.0));
  CHECK(std::abs(f1("cat sat", "the cat") - 2.0 / 3.0) < 1e-12);
  CHECK(f1("dog", "cat") == doctest::Approx(0.0));
  CHECK(f1("", "") == doctest::Approx(1.0));
  CHECK(f1("cat", "") == doctest::Approx(0.0));
  CHECK(f1("", "cat") == doctest::Approx(0.0));
}

TEST_CASE("metric properties on fuzz pairs") {
  Rng rng(47);
  for (int i = 0; i < 300; ++i) {
    const std::string p = random_string(rng);
    const std::string g = random_string(rng);
    // em implies f1 = 1
    if (em(p, g) == 1) CHECK(f1(p, g) == doctest::Approx(1.0));
    // f1 symmetric
    CHECK(f1(p, g) == doctest::Approx(f1(g, p)));
    // invariance under pre-normalized inputs
    CHECK(em(normalize_answer(p), normalize_answer(g)) == em(p, g));
    CHECK(f1(normalize_answer(p), normalize_answer(g)) == doctest::Approx(f1(p, g)));
  }
}

TEST_CASE("evaluate aggregates per language") {
  std::map<std::string, GoldEntry> gold{
      {"q1", {"en", {"the cat"}}},
      {"q2", {"en", {"dog", "a dog"}}},
      {"q3", {"xx", {"blue"}}},
      {"q4", {"xx", {"red"}}},
  };

  SUBCASE("all exact") {
    std::map<std::string, std::string> preds{
        {"q1", "The Cat."}, {"q2", "Dog"}, {"q3", "blue"}, {"q4", "red"}};
    auto rep = evaluate(preds, gold);
    CHECK(rep.per_language.at("en").em == doctest::Approx(100.0));
    CHECK(rep.per_language.at("en").f1 == doctest::Approx(100.0));
    CHECK(rep.per_language.at("xx").em == doctest::Approx(100.0));
    CHECK(rep.macro_em == doctest::Approx(100.0));
    CHECK(rep.scored == 4);
    CHECK(rep.missing_predictions == 0);
    CHECK(rep.per_language.at("en").count + rep.per_language.at("xx").count == rep.scored);
  }

  SUBCASE("f1 {1, 0} averages to 50") {
    std::map<std::string, std::string> preds{
        {"q1", "the cat"}, {"q2", "fish"}, {"q3", "blue"}, {"q4", "red"}};
    auto rep = evaluate(preds, gold);
    CHECK(rep.per_language.at("en").f1 == doctest::Approx(50.0));
    CHECK(rep.per_language.at("en").em == doctest::Approx(50.0));
  }

  SUBCASE("max over alternatives") {
    std::map<std::string, std::string> preds{
        {"q1", "cat"}, {"q2", "a dog"}, {"q3", "blue"}, {"q4", "red"}};
    auto rep = evaluate(preds, gold);
    CHECK(rep.per_language.at("en").em == doctest::Approx(100.0));
  }

  SUBCASE("missing prediction scores 0 and is counted") {
    std::map<std::string, std::string> preds{{"q1", "the cat"}, {"q3", "blue"}, {"q4", "red"}};
    auto rep = evaluate(preds, gold);
    CHECK(rep.missing_predictions == 1);
    CHECK(rep.per_language.at("en").em == doctest::Approx(50.0));
    CHECK(rep.scored == 4);
  }

  SUBCASE("unknown prediction id is an error") {
    std::map<std::string, std::string> preds{{"nope", "x"}};
    CHECK_THROWS_AS(evaluate(preds, gold), EvalError);
  }
}

TEST_CASE("gold loader on a squad-shaped fixture") {
  const char* fixture = R"({
    "data": [{"title": "t", "paragraphs": [{"context": "c", "qas": [
      {"id": "i1", "question": "q1", "answers": [{"text": "one", "answer_start": 0},
                                                  {"text": "One", "answer_start": 0}]},
      {"id": "i2", "question": "q2", "answers": [{"text": "two", "answer_start": 0}]}
    ]}]}]
  })";
  const std::string path = "gold_fixture.json";
  { std::ofstream(path) << fixture; }
  auto gold = load_gold_squad(path, "en");
  CHECK(gold.size() == 2);
  CHECK(gold.at("i1").answers.size() == 2);
  CHECK(gold.at("i1").language == "en");
  CHECK(gold.at("i2").answers.at(0) == "two");
  CHECK_THROWS_AS(load_gold_squad("no_such_file.json", "en"), EvalError);
}

TEST_CASE("gold loader reports 11590 on the official english test file") {
  const std::string path = "data/mlqa/test-context-en-question-en.json";
  if (!std::ifstream(path)) {
    MESSAGE("official gold file absent; skipping");
    return;
  }
  auto gold = load_gold_squad(path, "en");
  CHECK(gold.size() == 11590);
}

TEST_CASE("report serialization") {
  std::map<std::string, GoldEntry> gold{{"q1", {"en", {"cat"}}}};
  std::map<std::string, std::string> preds{{"q1", "cat"}};
  auto rep = evaluate(preds, gold);
  const std::string j = report_to_json(rep);
  CHECK(j.find("\"per_language\"") != std::string::npos);
  CHECK(j.find("\"en\"") != std::string::npos);
  const std::string t = report_to_table(rep);
  CHECK(t.find("en") != std::string::npos);
  CHECK(t.find("macro") != std::string::npos);
}

}  // TEST_SUITE
