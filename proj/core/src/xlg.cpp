#include "xltt/xlg.hpp"

#include "xltt/objective.hpp"

namespace xltt {

std::map<std::string, std::string> predict_answers(const Model& model,
                                                   const std::vector<ParallelInstance>& target,
                                                   const std::vector<RawParallelInstance>& raw,
                                                   std::size_t max_answer_len) {
  std::map<std::string, const RawParallelInstance*> raw_by_id;
  for (const RawParallelInstance& r : raw) raw_by_id[r.id] = &r;

  std::map<std::string, std::string> predictions;
  for (const ParallelInstance& inst : target) {
    auto rit = raw_by_id.find(inst.id);
    if (rit == raw_by_id.end())
      throw EvalError("predict_answers: no raw text for instance '" + inst.id + "'");

    Tape tape;
    SpanForward fwd = model_forward(tape, inst, model, 0);
    SpanPrediction span = decode_span(fwd.p_start, fwd.p_end, inst.pivot.passage_first,
                                      inst.pivot.passage_last, max_answer_len);

    const auto& offsets = inst.pivot.char_offsets;
    const std::string& context = rit->second->members.at(0).context;
    const std::size_t begin = offsets.at(span.start).first;
    const std::size_t end = offsets.at(span.end).second;
    predictions[inst.id] =
        begin < end && end <= context.size() ? context.substr(begin, end - begin) : "";
  }
  return predictions;
}

EvalReport run_xlg(const Model& model, const std::vector<ParallelInstance>& target,
                   const std::vector<RawParallelInstance>& raw,
                   const std::set<std::string>& training_datasets,
                   std::size_t max_answer_len, bool sanity) {
  if (target.empty()) throw EvalError("run_xlg: empty target corpus");
  for (const ParallelInstance& inst : target)
    if (!sanity && training_datasets.count(inst.source_dataset) > 0)
      throw EvalError("run_xlg: target dataset '" + inst.source_dataset +
                      "' appeared in training; refusing a zero-shot claim (use sanity "
                      "mode for held-out slices of the training distribution)");

  std::map<std::string, GoldEntry> gold;
  for (const RawParallelInstance& r : raw) {
    GoldEntry entry;
    entry.language = r.members.at(0).language;
    entry.answers.push_back(r.members.at(0).answer_text);
    gold[r.id] = std::move(entry);
  }
  // score only what we predict against
  std::map<std::string, GoldEntry> scoped;
  for (const ParallelInstance& inst : target) {
    auto it = gold.find(inst.id);
    if (it == gold.end())
      throw EvalError("run_xlg: no gold for instance '" + inst.id + "'");
    scoped[inst.id] = it->second;
  }

  EvalReport report =
      evaluate(predict_answers(model, target, raw, max_answer_len), scoped);
  report.not_zero_shot = sanity;
  return report;
}

}  // namespace xltt
