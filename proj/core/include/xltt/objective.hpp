#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xltt/rng.hpp"
#include "xltt/similarity.hpp"
#include "xltt/tensor.hpp"

namespace xltt {

struct SpanHeads {
  Tensor w_start;  // 2h x 1
  Tensor b_start;  // 1 x 1
  Tensor w_end;    // 2h x 1
  Tensor b_end;    // 1 x 1

  static SpanHeads init(std::size_t hidden, Rng& rng);
  std::vector<std::pair<std::string, Tensor>> named() const;
};

// Position scores g*w + b softmaxed over the sequence; both results are
// 1 x L distributions.
std::pair<Tensor, Tensor> span_distributions(Tape& tape, const Tensor& g,
                                             const SpanHeads& heads);

// Negative log-likelihood of the gold start plus the gold end.
Tensor instance_loss(Tape& tape, const Tensor& p_start, const Tensor& p_end,
                     std::pair<std::size_t, std::size_t> gold);

// Sum over datasets of weight_i times the mean of that dataset's batch
// losses. Every dataset present must carry a weight.
Tensor weighted_source_loss(Tape& tape,
                            const std::map<std::string, std::vector<Tensor>>& batch_losses,
                            const WeightTable& weights);

// Mean of the gold-span rows of an encoding; 1 x h.
Tensor span_representation(Tape& tape, const Tensor& b,
                           std::pair<std::size_t, std::size_t> span);

// max(0, cosine) of two span representations, read as plain values so no
// gradient flows through the coefficient.
double alpha(const Tensor& h_s, const Tensor& h_r);

// total = source + sum_R alpha_R * loss_R with every alpha treated constant.
Tensor total_objective(Tape& tape, const Tensor& source_loss,
                       const std::map<std::string, std::pair<double, Tensor>>& aux);

struct SpanPrediction {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;
};

// Constrained argmax of p_start[s]*p_end[e] over passage positions with
// s <= e and e - s < max_answer_len; ties prefer smaller s, then smaller e.
SpanPrediction decode_span(const Tensor& p_start, const Tensor& p_end,
                           std::size_t passage_first, std::size_t passage_last,
                           std::size_t max_answer_len);

}  // namespace xltt
