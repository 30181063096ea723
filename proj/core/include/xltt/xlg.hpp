#pragma once

#include <set>
#include <string>
#include <vector>

#include "xltt/eval.hpp"
#include "xltt/model.hpp"

namespace xltt {

// Cross-lingual generalization run: decodes answer spans for a target-pivot
// parallel corpus and scores them against the raw answers. The target corpus
// must be disjoint from training by dataset id unless sanity mode is on, in
// which case the report carries the not_zero_shot flag.
EvalReport run_xlg(const Model& model, const std::vector<ParallelInstance>& target,
                   const std::vector<RawParallelInstance>& raw,
                   const std::set<std::string>& training_datasets,
                   std::size_t max_answer_len, bool sanity = false);

// Raw decoded answer strings keyed by instance id (one per target instance).
std::map<std::string, std::string> predict_answers(const Model& model,
                                                   const std::vector<ParallelInstance>& target,
                                                   const std::vector<RawParallelInstance>& raw,
                                                   std::size_t max_answer_len);

}  // namespace xltt
