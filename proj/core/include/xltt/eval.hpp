#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace xltt {

struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

// Lowercase, strip Unicode punctuation, drop standalone articles a/an/the,
// collapse whitespace runs, trim. Idempotent.
std::string normalize_answer(const std::string& text);

// 1 iff normalized strings are equal.
int em(const std::string& pred, const std::string& gold);

// Token-bag overlap after normalization; harmonic mean of precision and
// recall. 1 when both bags are empty, 0 when exactly one is.
double f1(const std::string& pred, const std::string& gold);

struct GoldEntry {
  std::string language;
  std::vector<std::string> answers;  // alternatives; score keeps the max
};

struct LanguageScore {
  double em = 0.0;  // [0, 100]
  double f1 = 0.0;  // [0, 100]
  std::size_t count = 0;
};

struct EvalReport {
  std::map<std::string, LanguageScore> per_language;
  double macro_em = 0.0;
  double macro_f1 = 0.0;
  std::size_t scored = 0;
  std::size_t missing_predictions = 0;  // gold ids with no prediction, counted as 0
  bool not_zero_shot = false;           // sanity-mode flag set by run_xlg
};

// Per instance, max over gold alternatives; averaged within language and
// scaled to [0,100]. Prediction ids absent from gold are an error; gold ids
// with no prediction score 0 and are counted.
EvalReport evaluate(const std::map<std::string, std::string>& predictions,
                    const std::map<std::string, GoldEntry>& gold);

// MLQA/SQuAD-shaped gold file: every qa contributes its answer alternatives.
std::map<std::string, GoldEntry> load_gold_squad(const std::string& path,
                                                 const std::string& language);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace xltt
