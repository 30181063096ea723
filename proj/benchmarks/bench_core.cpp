// Microbenchmarks for the hot forward paths: raw matmul, row softmax, one
// encoder layer, the fusion stack and a full objective step with backward.
#include <benchmark/benchmark.h>

#include "xltt/encoder.hpp"
#include "xltt/maa.hpp"
#include "xltt/model.hpp"
#include "xltt/objective.hpp"
#include "xltt/rng.hpp"

using namespace xltt;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  rng.fill_uniform(t, -1.0, 1.0);
  return t;
}

void bm_matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

void bm_row_softmax(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor a = random_matrix(n, n, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.row_softmax(a));
  }
}
BENCHMARK(bm_row_softmax)->Arg(32)->Arg(128);

void bm_encoder_forward(benchmark::State& state) {
  const std::size_t len = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  EncoderConfig config{32, 2, 128, 1};
  EncoderParams params = EncoderParams::init(config, 64, rng);
  std::vector<int> ids(len), types(len, 0);
  for (std::size_t i = 0; i < len; ++i) ids[i] = static_cast<int>(rng.index(64));
  for (std::size_t i = len / 2; i < len; ++i) types[i] = 1;
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(encode_ids(tape, ids, types, params));
  }
}
BENCHMARK(bm_encoder_forward)->Arg(32)->Arg(64)->Arg(128);

void bm_maa_forward(benchmark::State& state) {
  const std::size_t len = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const std::size_t h = 32;
  Tensor b_s = random_matrix(len, h, rng), b_m = random_matrix(len, h, rng),
         b_n = random_matrix(len, h, rng);
  MaaParams params = MaaParams::init(h, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(maa_forward(tape, b_s, b_m, b_n, params));
  }
}
BENCHMARK(bm_maa_forward)->Arg(16)->Arg(32)->Arg(64);

TokenizedInstance random_member(Rng& rng, std::size_t len, const std::string& language) {
  TokenizedInstance t;
  t.language = language;
  t.input_ids.resize(len);
  t.token_types.assign(len, 0);
  for (std::size_t i = 0; i < len; ++i) t.input_ids[i] = static_cast<int>(rng.index(64));
  for (std::size_t i = len / 2; i < len; ++i) t.token_types[i] = 1;
  t.passage_first = len / 2;
  t.passage_last = len - 2;
  t.answer_span = {len / 2 + 2, len / 2 + 3};
  return t;
}

void bm_forward_backward(benchmark::State& state) {
  Rng rng(5);
  Model model = Model::init({16, 1, 64, 1}, 64, 5);
  ParallelInstance inst;
  inst.pivot = random_member(rng, 24, "src");
  inst.auxiliaries = {random_member(rng, 24, "mm"), random_member(rng, 24, "nn")};

  for (auto _ : state) {
    Tape tape;
    SpanForward fwd = model_forward(tape, inst, model);
    Tensor loss = instance_loss(tape, fwd.p_start, fwd.p_end, inst.pivot.answer_span);
    tape.backward(loss);
    tape.zero_grads();
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(bm_forward_backward);

}  // namespace

BENCHMARK_MAIN();
