#include "xltt/maa.hpp"

#include <cmath>
#include <stdexcept>

namespace xltt {

MaaParams MaaParams::init(std::size_t hidden, Rng& rng) {
  if (hidden == 0) throw std::invalid_argument("MaaParams::init: hidden must be positive");
  MaaParams p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(2 * hidden));
  p.w_c = Tensor(2 * hidden, hidden, true);
  rng.fill_uniform(p.w_c, -bound, bound);
  p.b_c = Tensor::zeros(1, hidden, true);
  p.ln_gain = Tensor::full(1, hidden, 1.0, true);
  p.ln_bias = Tensor::zeros(1, hidden, true);
  return p;
}

std::vector<std::pair<std::string, Tensor>> MaaParams::named() const {
  return {{"maa.w_c", w_c},
          {"maa.b_c", b_c},
          {"maa.ln_gain", ln_gain},
          {"maa.ln_bias", ln_bias}};
}

Tensor intra_attention(Tape& tape, const Tensor& b) {
  return tape.row_softmax(tape.matmul_nt(b, b));
}

Tensor inter_attention(Tape& tape, const Tensor& b_s, const Tensor& b_x,
                       std::size_t num_heads) {
  if (b_s.cols() != b_x.cols())
    throw ShapeError("inter_attention: hidden mismatch " + b_s.shape_str() + " vs " +
                     b_x.shape_str());
  if (num_heads == 0 || b_s.cols() % num_heads != 0)
    throw ShapeError("inter_attention: hidden " + std::to_string(b_s.cols()) +
                     " not divisible by " + std::to_string(num_heads) + " heads");
  if (num_heads == 1) return tape.matmul_nt(b_s, b_x);

  const std::size_t dh = b_s.cols() / num_heads;
  Tensor acc;
  for (std::size_t head = 0; head < num_heads; ++head) {
    const std::size_t lo = head * dh, hi = lo + dh;
    const Tensor part =
        tape.matmul_nt(tape.slice_cols(b_s, lo, hi), tape.slice_cols(b_x, lo, hi));
    acc = head == 0 ? part : tape.add(acc, part);
  }
  return tape.scale(acc, 1.0 / static_cast<double>(num_heads));
}

Tensor adaptive_attention(Tape& tape, const Tensor& a_s, const Tensor& a_sx,
                          const Tensor& a_x) {
  return tape.matmul_nt(tape.matmul(a_s, a_sx), a_x);
}

Tensor attend(Tape& tape, const Tensor& adaptive, const Tensor& b_x) {
  return tape.matmul(tape.row_softmax(adaptive), b_x);
}

Tensor multilingual_fuse(Tape& tape, const Tensor& b_s, const Tensor& c_m,
                         const Tensor& c_n, const MaaParams& params) {
  const Tensor c_prime = tape.concat_cols(c_m, c_n);
  const Tensor c = tape.linear(c_prime, params.w_c, params.b_c);
  const Tensor fused = tape.layer_norm(tape.add(b_s, c), params.ln_gain, params.ln_bias);
  return tape.concat_cols(b_s, fused);
}

Tensor maa_forward(Tape& tape, const Tensor& b_s, const Tensor& b_m, const Tensor& b_n,
                   const MaaParams& params, const MaaConfig& config) {
  const Tensor a_s = intra_attention(tape, b_s);
  const Tensor a_m = intra_attention(tape, b_m);
  const Tensor a_n = intra_attention(tape, b_n);

  const Tensor a_sm = inter_attention(tape, b_s, b_m, config.num_heads);
  const Tensor a_sn = inter_attention(tape, b_s, b_n, config.num_heads);

  const Tensor c_m = attend(tape, adaptive_attention(tape, a_s, a_sm, a_m), b_m);
  const Tensor c_n = attend(tape, adaptive_attention(tape, a_s, a_sn, a_n), b_n);

  return multilingual_fuse(tape, b_s, c_m, c_n, params);
}

}  // namespace xltt
