#include "xltt/synthetic.hpp"

#include <stdexcept>

namespace xltt {

std::vector<std::string> synthetic_word_pool(std::size_t count, const std::string& marker) {
  static const char* syllables[] = {"ba", "de", "fi", "go", "hu", "ka", "le", "mi",
                                    "no", "pu", "ra", "se", "ti", "vo", "wu", "ya"};
  constexpr std::size_t n = sizeof(syllables) / sizeof(syllables[0]);
  std::vector<std::string> pool;
  pool.reserve(count);
  for (std::size_t i = 0; pool.size() < count; ++i) {
    if (i >= n * n) throw std::invalid_argument("synthetic_word_pool: pool exhausted");
    std::string word = std::string(syllables[i / n]) + syllables[i % n];
    if (word != marker) pool.push_back(std::move(word));
  }
  return pool;
}

std::vector<QAInstance> make_synthetic_dataset(Rng& rng, const SyntheticSpec& spec) {
  if (spec.context_min < 2 || spec.context_max < spec.context_min)
    throw std::invalid_argument("make_synthetic_dataset: bad context bounds");
  if (spec.answer_max < 1)
    throw std::invalid_argument("make_synthetic_dataset: answer_max must be >= 1");
  const std::vector<std::string> pool =
      synthetic_word_pool(spec.vocab_words, spec.marker);
  if (pool.size() < spec.context_max)
    throw std::invalid_argument("make_synthetic_dataset: pool smaller than a context");

  if (spec.answer_words >= pool.size())
    throw std::invalid_argument("make_synthetic_dataset: answer_words exhausts the pool");
  const std::size_t context_words = pool.size() - spec.answer_words;
  if (context_words < spec.context_max)
    throw std::invalid_argument("make_synthetic_dataset: context pool smaller than a context");

  std::vector<QAInstance> out;
  out.reserve(spec.num_instances);
  for (std::size_t k = 0; k < spec.num_instances; ++k) {
    const std::size_t len =
        spec.context_min + rng.index(spec.context_max - spec.context_min + 1);
    const std::size_t answer_len =
        1 + rng.index(std::min(spec.answer_max, len - 1));
    const std::size_t answer_at = rng.index(len - answer_len + 1);

    // distinct word draw; answer positions use the reserved tail when set
    std::vector<std::size_t> picks;
    while (picks.size() < len) {
      const bool in_answer = spec.answer_words > 0 && picks.size() >= answer_at &&
                             picks.size() < answer_at + answer_len;
      const std::size_t w = in_answer ? context_words + rng.index(spec.answer_words)
                                      : rng.index(context_words);
      bool seen = false;
      for (std::size_t p : picks) seen = seen || p == w;
      if (!seen) picks.push_back(w);
    }

    std::string context, answer;
    std::size_t answer_start = 0;
    for (std::size_t i = 0; i < len; ++i) {
      if (i == answer_at) {
        if (!context.empty()) context += ' ';
        context += spec.marker;
      }
      if (!context.empty()) context += ' ';
      if (i == answer_at) answer_start = context.size();
      if (i >= answer_at && i < answer_at + answer_len) {
        if (i > answer_at) answer += ' ';
        answer += pool[picks[i]];
      }
      context += pool[picks[i]];
      if (i + 1 == answer_at + answer_len) {
        context += ' ';
        context += spec.marker;
      }
    }

    QAInstance inst;
    inst.id = spec.dataset_id + "-" + std::to_string(k);
    inst.question = spec.question_base;
    if (!spec.question_flavors.empty())
      inst.question += ' ' + spec.question_flavors[rng.index(spec.question_flavors.size())];
    inst.context = std::move(context);
    inst.answer_text = std::move(answer);
    inst.answer_char_start = answer_start;
    inst.language = spec.language;
    inst.source_dataset = spec.dataset_id;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace xltt
