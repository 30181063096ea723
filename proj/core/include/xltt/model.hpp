#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xltt/corpus.hpp"
#include "xltt/encoder.hpp"
#include "xltt/maa.hpp"
#include "xltt/objective.hpp"
#include "xltt/similarity.hpp"

namespace xltt {

// Shared encoder, fusion layer and span heads. With use_maa off the heads
// read concat[B, B] instead of the fused representation, keeping head width
// fixed while removing the cross-lingual channel (ablation switch).
struct Model {
  EncoderConfig config;
  MaaConfig maa_config;
  bool use_maa = true;

  EncoderParams encoder;
  MaaParams maa;
  SpanHeads heads;

  static Model init(const EncoderConfig& config, std::size_t vocab_size,
                    std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor>> named() const;
};

struct SpanForward {
  Tensor b_pivot;  // L x h encoding of the member acting as pivot
  Tensor g;        // L x 2h head input
  Tensor p_start;  // 1 x L
  Tensor p_end;    // 1 x L
};

// Runs encoder + fusion + heads with member pivot_index acting as pivot
// (0 = the instance's pivot, 1.. = auxiliaries) and the remaining members as
// auxiliaries. Shared parameters throughout.
SpanForward model_forward(Tape& tape, const ParallelInstance& inst, const Model& model,
                          std::size_t pivot_index = 0);

struct BatchObjective {
  Tensor total;  // 1x1, differentiable
  double source_loss = 0.0;
  std::map<std::string, double> alpha;     // batch-mean coefficient per aux language
  std::map<std::string, double> aux_loss;  // batch-mean value per aux language
};

// Weighted source loss over the batch plus alpha-weighted auxiliary losses,
// each auxiliary re-run with its language as pivot. Alphas never carry
// gradient.
BatchObjective batch_objective(Tape& tape, const std::vector<const ParallelInstance*>& batch,
                               const Model& model, const WeightTable& weights);

}  // namespace xltt
