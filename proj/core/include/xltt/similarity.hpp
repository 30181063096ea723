#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xltt/corpus.hpp"

namespace xltt {

struct SimilarityError : std::runtime_error {
  explicit SimilarityError(const std::string& what) : std::runtime_error(what) {}
};

// Bag of question tokens over a whole dataset; questions only, no contexts.
struct QuestionDocument {
  std::string dataset_id;
  std::map<std::string, std::size_t> counts;
};

struct TfidfVector {
  std::string dataset_id;
  std::map<std::string, double> weights;  // sparse over the shared term space
};

// Per-dataset normalized task-similarity weights; sums to 1.
struct WeightTable {
  std::map<std::string, double> weights;
  double at(const std::string& dataset_id) const;
  bool has(const std::string& dataset_id) const { return weights.count(dataset_id) > 0; }
};

QuestionDocument build_question_document(const std::string& dataset_id,
                                         const std::vector<QAInstance>& dataset);

// Same, from the pivot questions of a parallel corpus.
QuestionDocument question_document_from_corpus(const std::string& dataset_id,
                                               const std::vector<RawParallelInstance>& corpus);

// weight(term, doc) = tf_raw * (ln((1+N)/(1+df)) + 1), N = documents.size().
std::vector<TfidfVector> tfidf(const std::vector<QuestionDocument>& documents);

// Cosine over the union of terms; zero vector gives 0.
double raw_weight(const TfidfVector& a, const TfidfVector& b);

// Divides by the sum; all-zero input throws a SimilarityError instructing the
// uniform-weight fallback flag.
WeightTable normalize_weights(const std::map<std::string, double>& raw);

WeightTable uniform_weights(const std::vector<std::string>& dataset_ids);

struct SimilarityReport {
  std::map<std::string, double> raw;
  WeightTable normalized;
};

// Full task-level weighting: TF-IDF over training documents plus the target
// (the target participates in df counting), cosine to the target, normalize.
SimilarityReport task_similarity(const std::vector<QuestionDocument>& training_docs,
                                 const QuestionDocument& target_doc);

}  // namespace xltt
