#include "xltt/model.hpp"

#include <stdexcept>

namespace xltt {

Model Model::init(const EncoderConfig& config, std::size_t vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  Model m;
  m.config = config;
  m.encoder = EncoderParams::init(config, vocab_size, rng);
  m.maa = MaaParams::init(config.hidden, rng);
  m.heads = SpanHeads::init(config.hidden, rng);
  return m;
}

std::vector<std::pair<std::string, Tensor>> Model::named() const {
  std::vector<std::pair<std::string, Tensor>> out = encoder.named();
  if (use_maa)
    for (auto& p : maa.named()) out.push_back(std::move(p));
  for (auto& p : heads.named()) out.push_back(std::move(p));
  return out;
}

namespace {

const TokenizedInstance& member_at(const ParallelInstance& inst, std::size_t index) {
  if (index == 0) return inst.pivot;
  if (index - 1 >= inst.auxiliaries.size())
    throw std::out_of_range("model_forward: member index " + std::to_string(index) +
                            " of instance '" + inst.id + "'");
  return inst.auxiliaries[index - 1];
}

}  // namespace

SpanForward model_forward(Tape& tape, const ParallelInstance& inst, const Model& model,
                          std::size_t pivot_index) {
  if (inst.auxiliaries.size() != 2)
    throw std::invalid_argument("model_forward: instance '" + inst.id + "' has " +
                                std::to_string(inst.auxiliaries.size()) +
                                " auxiliaries, expected 2");

  SpanForward out;
  out.b_pivot = encode(tape, member_at(inst, pivot_index), model.encoder);
  if (model.use_maa) {
    std::vector<Tensor> aux;
    for (std::size_t i = 0; i < 3; ++i)
      if (i != pivot_index) aux.push_back(encode(tape, member_at(inst, i), model.encoder));
    out.g = maa_forward(tape, out.b_pivot, aux[0], aux[1], model.maa, model.maa_config);
  } else {
    out.g = tape.concat_cols(out.b_pivot, out.b_pivot);
  }
  std::tie(out.p_start, out.p_end) = span_distributions(tape, out.g, model.heads);
  return out;
}

BatchObjective batch_objective(Tape& tape, const std::vector<const ParallelInstance*>& batch,
                               const Model& model, const WeightTable& weights) {
  if (batch.empty()) throw std::invalid_argument("batch_objective: empty batch");

  std::map<std::string, std::vector<Tensor>> source_losses;
  std::map<std::string, std::vector<Tensor>> aux_losses;
  std::map<std::string, std::vector<double>> alphas;

  for (const ParallelInstance* inst : batch) {
    SpanForward pivot_fwd = model_forward(tape, *inst, model, 0);
    source_losses[inst->source_dataset].push_back(instance_loss(
        tape, pivot_fwd.p_start, pivot_fwd.p_end, inst->pivot.answer_span));
    const Tensor h_s =
        span_representation(tape, pivot_fwd.b_pivot, inst->pivot.answer_span);

    for (std::size_t r = 0; r < inst->auxiliaries.size(); ++r) {
      const TokenizedInstance& member = inst->auxiliaries[r];
      SpanForward aux_fwd = model_forward(tape, *inst, model, r + 1);
      const Tensor h_r = span_representation(tape, aux_fwd.b_pivot, member.answer_span);
      alphas[member.language].push_back(alpha(h_s, h_r));
      aux_losses[member.language].push_back(
          instance_loss(tape, aux_fwd.p_start, aux_fwd.p_end, member.answer_span));
    }
  }

  BatchObjective result;
  const Tensor source = weighted_source_loss(tape, source_losses, weights);
  result.source_loss = source.item();

  std::map<std::string, std::pair<double, Tensor>> aux_terms;
  for (const auto& [language, losses] : aux_losses) {
    Tensor mean;
    for (const Tensor& loss : losses)
      mean = mean.defined() ? tape.add(mean, loss) : loss;
    mean = tape.scale(mean, 1.0 / static_cast<double>(losses.size()));

    double a = 0.0;
    for (double v : alphas[language]) a += v;
    a /= static_cast<double>(alphas[language].size());

    result.alpha[language] = a;
    result.aux_loss[language] = mean.item();
    aux_terms[language] = {a, mean};
  }
  result.total = total_objective(tape, source, aux_terms);
  return result;
}

}  // namespace xltt
