#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xltt/rng.hpp"
#include "xltt/tensor.hpp"

namespace xltt {

struct MaaConfig {
  std::size_t num_heads = 1;  // inter-attention head count; 1 reproduces the plain form
};

struct MaaParams {
  Tensor w_c;      // 2h x h
  Tensor b_c;      // 1 x h
  Tensor ln_gain;  // 1 x h
  Tensor ln_bias;  // 1 x h

  static MaaParams init(std::size_t hidden, Rng& rng);
  std::vector<std::pair<std::string, Tensor>> named() const;
};

// row_softmax(b b^T): how much each pivot token attends to its own sequence.
Tensor intra_attention(Tape& tape, const Tensor& b);

// Raw cross-lingual affinities b_s b_x^T; no normalization here. With more
// than one head the hidden dimension is split into column slices and the
// per-slice affinities are averaged.
Tensor inter_attention(Tape& tape, const Tensor& b_s, const Tensor& b_x,
                       std::size_t num_heads = 1);

// a_s * a_sx * a_x^T: cross-lingual affinity re-weighted by both sides'
// within-sequence attention.
Tensor adaptive_attention(Tape& tape, const Tensor& a_s, const Tensor& a_sx,
                          const Tensor& a_x);

// row_softmax(adaptive) * b_x: each pivot token's convex combination of
// auxiliary token vectors.
Tensor attend(Tape& tape, const Tensor& adaptive, const Tensor& b_x);

// C' = [c_m ; c_n] columns, C = C' W_c + b_c, G = [b_s ; LayerNorm(b_s + C)].
Tensor multilingual_fuse(Tape& tape, const Tensor& b_s, const Tensor& c_m,
                         const Tensor& c_n, const MaaParams& params);

// Full pipeline over pivot b_s and two auxiliary encodings; output L_S x 2h.
Tensor maa_forward(Tape& tape, const Tensor& b_s, const Tensor& b_m, const Tensor& b_n,
                   const MaaParams& params, const MaaConfig& config = {});

}  // namespace xltt
