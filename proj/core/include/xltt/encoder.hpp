#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xltt/corpus.hpp"
#include "xltt/rng.hpp"
#include "xltt/tensor.hpp"

namespace xltt {

struct EncoderConfig {
  std::size_t hidden = 32;
  std::size_t num_layers = 2;
  std::size_t max_len = 128;
  std::size_t num_heads = 1;
};

// Pre-norm transformer block parameters.
struct EncoderLayer {
  Tensor wq, wk, wv, wo;      // h x h
  Tensor ffn_w1, ffn_b1;      // h x 4h, 1 x 4h
  Tensor ffn_w2, ffn_b2;      // 4h x h, 1 x h
  Tensor ln1_gain, ln1_bias;  // 1 x h
  Tensor ln2_gain, ln2_bias;  // 1 x h
};

struct EncoderParams {
  EncoderConfig config;
  std::size_t vocab_size = 0;
  Tensor token_emb;    // |V| x h
  Tensor position_emb; // Lmax x h
  Tensor segment_emb;  // 2 x h

  std::vector<EncoderLayer> layers;

  static EncoderParams init(const EncoderConfig& config, std::size_t vocab_size, Rng& rng);

  // Stable name -> tensor view over every parameter, for the optimizer,
  // checkpointing and gradcheck.
  std::vector<std::pair<std::string, Tensor>> named() const;
};

// Token + position + segment embedding sum followed by num_layers pre-norm
// self-attention blocks. Language tags never enter; the encoder is shared.
Tensor encode(Tape& tape, const TokenizedInstance& x, const EncoderParams& params);

// Same forward over raw id/segment vectors (used by synthetic harnesses).
Tensor encode_ids(Tape& tape, const std::vector<int>& input_ids,
                  const std::vector<int>& token_types, const EncoderParams& params);

}  // namespace xltt
