#pragma once

#include <string>
#include <vector>

#include "xltt/corpus.hpp"
#include "xltt/rng.hpp"

namespace xltt {

// Marker-span extraction task: each context is a run of distinct pseudo-words
// with the answer span enclosed by a marker word, so the task is learnable
// from token identity and position alone. Word draws are distinct within a
// context, which keeps every answer string unique in its context.
struct SyntheticSpec {
  std::string dataset_id = "synth";
  std::string language = "src";
  std::size_t num_instances = 200;
  std::size_t vocab_words = 48;
  std::size_t context_min = 8;
  std::size_t context_max = 12;
  std::size_t answer_max = 2;  // answer length drawn from [1, answer_max]
  // When nonzero, the last answer_words entries of the pool are reserved for
  // answer positions and never appear elsewhere, so spans are also detectable
  // from token identity.
  std::size_t answer_words = 0;
  std::string marker = "zq";
  std::string question_base = "find the marked words";
  std::vector<std::string> question_flavors;  // optional dataset-specific terms
};

// Deterministic pseudo-word list of the requested size; no collisions with
// the marker.
std::vector<std::string> synthetic_word_pool(std::size_t count, const std::string& marker);

std::vector<QAInstance> make_synthetic_dataset(Rng& rng, const SyntheticSpec& spec);

}  // namespace xltt
