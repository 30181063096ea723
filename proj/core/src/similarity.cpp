#include "xltt/similarity.hpp"

#include <cmath>

namespace xltt {

double WeightTable::at(const std::string& dataset_id) const {
  auto it = weights.find(dataset_id);
  if (it == weights.end())
    throw SimilarityError("no weight for dataset '" + dataset_id + "'");
  return it->second;
}

QuestionDocument build_question_document(const std::string& dataset_id,
                                         const std::vector<QAInstance>& dataset) {
  if (dataset.empty())
    throw SimilarityError("build_question_document: empty dataset '" + dataset_id + "'");
  QuestionDocument doc;
  doc.dataset_id = dataset_id;
  for (const QAInstance& inst : dataset)
    for (const Token& t : tokenize_text(inst.question)) ++doc.counts[t.text];
  if (doc.counts.empty())
    throw SimilarityError("build_question_document: dataset '" + dataset_id +
                          "' has no question tokens");
  return doc;
}

QuestionDocument question_document_from_corpus(const std::string& dataset_id,
                                               const std::vector<RawParallelInstance>& corpus) {
  if (corpus.empty())
    throw SimilarityError("question_document_from_corpus: empty corpus '" + dataset_id + "'");
  QuestionDocument doc;
  doc.dataset_id = dataset_id;
  for (const RawParallelInstance& inst : corpus)
    for (const Token& t : tokenize_text(inst.members.at(0).question)) ++doc.counts[t.text];
  if (doc.counts.empty())
    throw SimilarityError("question_document_from_corpus: corpus '" + dataset_id +
                          "' has no question tokens");
  return doc;
}

std::vector<TfidfVector> tfidf(const std::vector<QuestionDocument>& documents) {
  if (documents.empty()) throw SimilarityError("tfidf: no documents");
  const double n = static_cast<double>(documents.size());

  std::map<std::string, std::size_t> df;
  for (const QuestionDocument& doc : documents)
    for (const auto& [term, count] : doc.counts) {
      (void)count;
      ++df[term];
    }

  std::vector<TfidfVector> vectors;
  vectors.reserve(documents.size());
  for (const QuestionDocument& doc : documents) {
    TfidfVector v;
    v.dataset_id = doc.dataset_id;
    for (const auto& [term, count] : doc.counts) {
      const double idf = std::log((1.0 + n) / (1.0 + static_cast<double>(df[term]))) + 1.0;
      v.weights[term] = static_cast<double>(count) * idf;
    }
    vectors.push_back(std::move(v));
  }
  return vectors;
}

double raw_weight(const TfidfVector& a, const TfidfVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [term, w] : a.weights) {
    na += w * w;
    auto it = b.weights.find(term);
    if (it != b.weights.end()) dot += w * it->second;
  }
  for (const auto& [term, w] : b.weights) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

WeightTable normalize_weights(const std::map<std::string, double>& raw) {
  double sum = 0.0;
  for (const auto& [id, w] : raw) {
    if (w < 0.0)
      throw SimilarityError("normalize_weights: negative weight for '" + id + "'");
    sum += w;
  }
  if (sum <= 0.0)
    throw SimilarityError(
        "normalize_weights: all raw weights are zero; rerun with the uniform-weight "
        "fallback flag");
  WeightTable table;
  for (const auto& [id, w] : raw) table.weights[id] = w / sum;
  return table;
}

WeightTable uniform_weights(const std::vector<std::string>& dataset_ids) {
  if (dataset_ids.empty()) throw SimilarityError("uniform_weights: no datasets");
  WeightTable table;
  for (const std::string& id : dataset_ids)
    table.weights[id] = 1.0 / static_cast<double>(dataset_ids.size());
  return table;
}

SimilarityReport task_similarity(const std::vector<QuestionDocument>& training_docs,
                                 const QuestionDocument& target_doc) {
  std::vector<QuestionDocument> all = training_docs;
  all.push_back(target_doc);
  std::vector<TfidfVector> vectors = tfidf(all);
  const TfidfVector& target = vectors.back();

  SimilarityReport report;
  for (std::size_t i = 0; i < training_docs.size(); ++i)
    report.raw[training_docs[i].dataset_id] = raw_weight(vectors[i], target);
  report.normalized = normalize_weights(report.raw);
  return report;
}

}  // namespace xltt
