#include "xltt/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace xltt {

namespace {

Tensor param_normal(Rng& rng, std::size_t rows, std::size_t cols, double std_dev) {
  Tensor t(rows, cols, true);
  rng.fill_normal(t, 0.0, std_dev);
  return t;
}

Tensor param_const(std::size_t rows, std::size_t cols, double value) {
  Tensor t = Tensor::full(rows, cols, value, true);
  return t;
}

Tensor self_attention(Tape& tape, const Tensor& x, const EncoderLayer& layer,
                      std::size_t num_heads) {
  const std::size_t h = x.cols();
  const Tensor q = tape.matmul(x, layer.wq);
  const Tensor k = tape.matmul(x, layer.wk);
  const Tensor v = tape.matmul(x, layer.wv);

  const std::size_t dh = h / num_heads;
  Tensor mixed;
  for (std::size_t head = 0; head < num_heads; ++head) {
    const std::size_t b = head * dh, e = b + dh;
    const Tensor qh = num_heads == 1 ? q : tape.slice_cols(q, b, e);
    const Tensor kh = num_heads == 1 ? k : tape.slice_cols(k, b, e);
    const Tensor vh = num_heads == 1 ? v : tape.slice_cols(v, b, e);
    const Tensor logits = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
    const Tensor out = tape.matmul(tape.row_softmax(logits), vh);
    mixed = head == 0 ? out : tape.concat_cols(mixed, out);
  }
  return tape.matmul(mixed, layer.wo);
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& config, std::size_t vocab_size,
                                  Rng& rng) {
  if (config.hidden == 0 || config.num_layers > 64 || config.max_len == 0)
    throw std::invalid_argument("EncoderParams::init: bad config");
  if (config.num_heads == 0 || config.hidden % config.num_heads != 0)
    throw std::invalid_argument("EncoderParams::init: hidden not divisible by num_heads");
  if (vocab_size == 0) throw std::invalid_argument("EncoderParams::init: empty vocabulary");

  const std::size_t h = config.hidden;
  const double std_dev = 0.02;

  EncoderParams p;
  p.config = config;
  p.vocab_size = vocab_size;
  p.token_emb = param_normal(rng, vocab_size, h, std_dev);
  p.position_emb = param_normal(rng, config.max_len, h, std_dev);
  p.segment_emb = param_normal(rng, 2, h, std_dev);

  for (std::size_t l = 0; l < config.num_layers; ++l) {
    EncoderLayer layer;
    layer.wq = param_normal(rng, h, h, std_dev);
    layer.wk = param_normal(rng, h, h, std_dev);
    layer.wv = param_normal(rng, h, h, std_dev);
    layer.wo = param_normal(rng, h, h, std_dev);
    layer.ffn_w1 = param_normal(rng, h, 4 * h, std_dev);
    layer.ffn_b1 = param_const(1, 4 * h, 0.0);
    layer.ffn_w2 = param_normal(rng, 4 * h, h, std_dev);
    layer.ffn_b2 = param_const(1, h, 0.0);
    layer.ln1_gain = param_const(1, h, 1.0);
    layer.ln1_bias = param_const(1, h, 0.0);
    layer.ln2_gain = param_const(1, h, 1.0);
    layer.ln2_bias = param_const(1, h, 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("encoder.token_emb", token_emb);
  out.emplace_back("encoder.position_emb", position_emb);
  out.emplace_back("encoder.segment_emb", segment_emb);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l) + ".";
    const EncoderLayer& layer = layers[l];
    out.emplace_back(prefix + "wq", layer.wq);
    out.emplace_back(prefix + "wk", layer.wk);
    out.emplace_back(prefix + "wv", layer.wv);
    out.emplace_back(prefix + "wo", layer.wo);
    out.emplace_back(prefix + "ffn_w1", layer.ffn_w1);
    out.emplace_back(prefix + "ffn_b1", layer.ffn_b1);
    out.emplace_back(prefix + "ffn_w2", layer.ffn_w2);
    out.emplace_back(prefix + "ffn_b2", layer.ffn_b2);
    out.emplace_back(prefix + "ln1_gain", layer.ln1_gain);
    out.emplace_back(prefix + "ln1_bias", layer.ln1_bias);
    out.emplace_back(prefix + "ln2_gain", layer.ln2_gain);
    out.emplace_back(prefix + "ln2_bias", layer.ln2_bias);
  }
  return out;
}

Tensor encode_ids(Tape& tape, const std::vector<int>& input_ids,
                  const std::vector<int>& token_types, const EncoderParams& params) {
  const std::size_t length = input_ids.size();
  if (length == 0) throw std::invalid_argument("encode: empty input");
  if (length > params.config.max_len)
    throw std::invalid_argument("encode: length " + std::to_string(length) +
                                " exceeds max_len " +
                                std::to_string(params.config.max_len));
  if (token_types.size() != length)
    throw std::invalid_argument("encode: token_types length mismatch");
  std::vector<int> positions(length);
  for (std::size_t i = 0; i < length; ++i) {
    if (input_ids[i] < 0 || static_cast<std::size_t>(input_ids[i]) >= params.vocab_size)
      throw std::invalid_argument("encode: token id " + std::to_string(input_ids[i]) +
                                  " outside vocabulary of " +
                                  std::to_string(params.vocab_size));
    if (token_types[i] < 0 || token_types[i] > 1)
      throw std::invalid_argument("encode: token type must be 0 or 1");
    positions[i] = static_cast<int>(i);
  }

  Tensor x = tape.add(tape.gather_rows(params.token_emb, input_ids),
                      tape.add(tape.gather_rows(params.position_emb, positions),
                               tape.gather_rows(params.segment_emb, token_types)));

  for (const EncoderLayer& layer : params.layers) {
    const Tensor normed1 = tape.layer_norm(x, layer.ln1_gain, layer.ln1_bias);
    x = tape.add(x, self_attention(tape, normed1, layer, params.config.num_heads));
    const Tensor normed2 = tape.layer_norm(x, layer.ln2_gain, layer.ln2_bias);
    const Tensor hidden = tape.gelu(tape.linear(normed2, layer.ffn_w1, layer.ffn_b1));
    x = tape.add(x, tape.linear(hidden, layer.ffn_w2, layer.ffn_b2));
  }
  return x;
}

Tensor encode(Tape& tape, const TokenizedInstance& x, const EncoderParams& params) {
  return encode_ids(tape, x.input_ids, x.token_types, params);
}

}  // namespace xltt
