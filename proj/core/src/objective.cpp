#include "xltt/objective.hpp"

#include <deque>
#include <stdexcept>

namespace xltt {

SpanHeads SpanHeads::init(std::size_t hidden, Rng& rng) {
  if (hidden == 0) throw std::invalid_argument("SpanHeads::init: hidden must be positive");
  SpanHeads h;
  h.w_start = Tensor(2 * hidden, 1, true);
  h.w_end = Tensor(2 * hidden, 1, true);
  rng.fill_normal(h.w_start, 0.0, 0.02);
  rng.fill_normal(h.w_end, 0.0, 0.02);
  h.b_start = Tensor::zeros(1, 1, true);
  h.b_end = Tensor::zeros(1, 1, true);
  return h;
}

std::vector<std::pair<std::string, Tensor>> SpanHeads::named() const {
  return {{"heads.w_start", w_start},
          {"heads.b_start", b_start},
          {"heads.w_end", w_end},
          {"heads.b_end", b_end}};
}

std::pair<Tensor, Tensor> span_distributions(Tape& tape, const Tensor& g,
                                             const SpanHeads& heads) {
  if (g.cols() != heads.w_start.rows())
    throw ShapeError("span_distributions: " + g.shape_str() + " vs head " +
                     heads.w_start.shape_str());
  const Tensor start_logits =
      tape.add_scalar(tape.transpose(tape.matmul(g, heads.w_start)), heads.b_start);
  const Tensor end_logits =
      tape.add_scalar(tape.transpose(tape.matmul(g, heads.w_end)), heads.b_end);
  return {tape.row_softmax(start_logits), tape.row_softmax(end_logits)};
}

Tensor instance_loss(Tape& tape, const Tensor& p_start, const Tensor& p_end,
                     std::pair<std::size_t, std::size_t> gold) {
  if (gold.first > gold.second)
    throw std::invalid_argument("instance_loss: gold start after gold end");
  return tape.add(tape.nll_of_index(p_start, gold.first),
                  tape.nll_of_index(p_end, gold.second));
}

Tensor weighted_source_loss(Tape& tape,
                            const std::map<std::string, std::vector<Tensor>>& batch_losses,
                            const WeightTable& weights) {
  if (batch_losses.empty())
    throw std::invalid_argument("weighted_source_loss: empty batch");
  Tensor total;
  for (const auto& [dataset, losses] : batch_losses) {
    if (losses.empty())
      throw std::invalid_argument("weighted_source_loss: dataset '" + dataset +
                                  "' has no losses");
    const double w = weights.at(dataset);  // throws on missing weight
    Tensor mean;
    for (const Tensor& loss : losses)
      mean = mean.defined() ? tape.add(mean, loss) : loss;
    mean = tape.scale(mean, w / static_cast<double>(losses.size()));
    total = total.defined() ? tape.add(total, mean) : mean;
  }
  return total;
}

Tensor span_representation(Tape& tape, const Tensor& b,
                           std::pair<std::size_t, std::size_t> span) {
  if (span.first > span.second || span.second >= b.rows())
    throw std::invalid_argument("span_representation: span [" +
                                std::to_string(span.first) + "," +
                                std::to_string(span.second) + "] outside " +
                                b.shape_str());
  return tape.mean_rows(b, span.first, span.second);
}

double alpha(const Tensor& h_s, const Tensor& h_r) {
  const double c = cosine(h_s, h_r);
  if (c <= 0.0) return 0.0;
  return c < 1.0 ? c : 1.0;  // rounding can push cosine a few ulp past 1
}

Tensor total_objective(Tape& tape, const Tensor& source_loss,
                       const std::map<std::string, std::pair<double, Tensor>>& aux) {
  Tensor total = source_loss;
  for (const auto& [language, term] : aux) {
    const auto& [a, loss] = term;
    if (a < 0.0 || a > 1.0)
      throw std::invalid_argument("total_objective: alpha for '" + language +
                                  "' outside [0,1]");
    if (a == 0.0) continue;
    total = tape.add(total, tape.scale(loss, a));
  }
  return total;
}

SpanPrediction decode_span(const Tensor& p_start, const Tensor& p_end,
                           std::size_t passage_first, std::size_t passage_last,
                           std::size_t max_answer_len) {
  if (p_start.rows() != 1 || p_end.rows() != 1 || p_start.cols() != p_end.cols())
    throw ShapeError("decode_span: " + p_start.shape_str() + " vs " + p_end.shape_str());
  if (max_answer_len < 1)
    throw std::invalid_argument("decode_span: max_answer_len must be >= 1");
  if (passage_first > passage_last || passage_last >= p_start.cols())
    throw std::invalid_argument("decode_span: empty or out-of-range passage segment");

  // Sliding-window maximum over start probabilities: for each end position the
  // candidate starts are a window of max_answer_len positions; the deque keeps
  // indices with strictly decreasing probability so its front is always the
  // earliest maximal start in the window.
  std::deque<std::size_t> window;
  SpanPrediction best;
  bool found = false;
  for (std::size_t e = passage_first; e <= passage_last; ++e) {
    while (!window.empty() && p_start.at(0, window.back()) < p_start.at(0, e))
      window.pop_back();
    window.push_back(e);
    if (window.front() + max_answer_len <= e) window.pop_front();
    const std::size_t s = window.front();
    const double score = p_start.at(0, s) * p_end.at(0, e);
    if (!found || score > best.score || (score == best.score && s < best.start)) {
      best = {s, e, score};
      found = true;
    }
  }
  return best;
}

}  // namespace xltt
