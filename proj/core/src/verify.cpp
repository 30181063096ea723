#include "xltt/verify.hpp"

#include <stdexcept>

#include "xltt/model.hpp"
#include "xltt/rng.hpp"

namespace xltt {

namespace {

constexpr double kThreshold = 1e-4;

Tensor random_param(std::size_t rows, std::size_t cols, Rng& rng, double scale = 0.5) {
  Tensor t = Tensor::zeros(rows, cols, true);
  rng.fill_uniform(t, -scale, scale);
  return t;
}

// Every op appears in at least one of these closures.
ComponentCheck check_ops(std::uint64_t seed, bool corrupt) {
  Rng rng(seed);
  Tensor x = random_param(3, 4, rng);
  Tensor y = random_param(3, 4, rng);
  Tensor w = random_param(4, 4, rng);
  Tensor b = random_param(1, 4, rng);
  Tensor gain = random_param(1, 4, rng, 0.3);
  Tensor bias = random_param(1, 4, rng, 0.3);
  Tensor s = random_param(1, 1, rng);
  std::vector<std::pair<std::string, Tensor>> params{
      {"x", x}, {"y", y}, {"w", w}, {"b", b}, {"gain", gain}, {"bias", bias}, {"s", s}};

  auto f = [&](Tape& tape) {
    Tensor h = tape.gelu(tape.linear(x, w, b));                       // 3x4
    Tensor ln = tape.layer_norm(tape.add(h, y), gain, bias);          // 3x4
    Tensor att = tape.row_softmax(tape.scale(tape.matmul_nt(ln, x), 0.7));  // 3x3
    Tensor mixed = tape.matmul(att, tape.mul(ln, y));                 // 3x4
    Tensor wide = tape.concat_cols(mixed, tape.add_rowvec(h, b));     // 3x8
    Tensor sliced = tape.slice_cols(wide, 1, 7);                      // 3x6
    Tensor gathered = tape.gather_rows(tape.transpose(sliced), {0, 3, 5, 3});  // 4x3
    Tensor pooled = tape.mean_rows(tape.add_scalar(gathered, s), 1, 3);        // 1x3
    Tensor nll = tape.nll_of_index(tape.row_softmax(pooled), 2);
    return tape.add(nll, tape.sum(pooled));
  };
  GradCheckReport r = gradcheck(f, params, 1e-5, corrupt);
  return {"ops", r.max_rel_error, r.worst_param, r.max_rel_error < kThreshold};
}

ComponentCheck check_encoder(std::uint64_t seed, bool corrupt) {
  Rng rng(seed);
  EncoderParams enc = EncoderParams::init({8, 1, 16, 1}, 12, rng);
  const std::vector<int> ids{0, 5, 7, 1, 9, 1};
  const std::vector<int> types{0, 0, 0, 0, 1, 1};
  Tensor readout = Tensor::zeros(6, 8, false);
  rng.fill_uniform(readout, -1.0, 1.0);

  auto f = [&](Tape& tape) {
    return tape.sum(tape.mul(encode_ids(tape, ids, types, enc), readout));
  };
  GradCheckReport r = gradcheck(f, enc.named(), 1e-5, corrupt);
  return {"encoder", r.max_rel_error, r.worst_param, r.max_rel_error < kThreshold};
}

ComponentCheck check_maa(std::uint64_t seed, bool corrupt) {
  Rng rng(seed);
  const std::size_t h = 8;
  Tensor b_s = random_param(5, h, rng);
  Tensor b_m = random_param(6, h, rng);
  Tensor b_n = random_param(4, h, rng);
  MaaParams maa = MaaParams::init(h, rng);
  Tensor readout = Tensor::zeros(5, 2 * h, false);
  rng.fill_uniform(readout, -1.0, 1.0);

  std::vector<std::pair<std::string, Tensor>> params{
      {"b_s", b_s}, {"b_m", b_m}, {"b_n", b_n}};
  for (auto& p : maa.named()) params.push_back(std::move(p));

  auto f = [&](Tape& tape) {
    return tape.sum(tape.mul(maa_forward(tape, b_s, b_m, b_n, maa), readout));
  };
  GradCheckReport r = gradcheck(f, params, 1e-5, corrupt);
  return {"maa", r.max_rel_error, r.worst_param, r.max_rel_error < kThreshold};
}

// Full objective through the whole model. Per-coordinate differences on a
// stack this deep drown in the rounding floor of the loss wherever a
// coordinate's gradient happens to cancel to ~1e-10, so this check is
// directional. Members are identical so the quality coefficients sit at
// exactly 1 in a neighborhood and carry no finite-difference response.
ComponentCheck check_objective(std::uint64_t seed, bool corrupt) {
  Model model = Model::init({8, 1, 16, 1}, 14, seed);

  TokenizedInstance member;
  member.input_ids = {0, 5, 7, 1, 9, 11, 4, 6, 1};
  member.token_types = {0, 0, 0, 0, 1, 1, 1, 1, 1};
  member.answer_span = {5, 6};
  member.language = "src";
  member.passage_first = 4;
  member.passage_last = 7;

  ParallelInstance inst;
  inst.pivot = member;
  inst.auxiliaries = {member, member};
  inst.auxiliaries[0].language = "mm";
  inst.auxiliaries[1].language = "nn";
  inst.id = "fixture";
  inst.source_dataset = "fixture";

  WeightTable weights;
  weights.weights["fixture"] = 1.0;

  auto f = [&](Tape& tape) {
    return batch_objective(tape, {&inst}, model, weights).total;
  };
  GradCheckReport r =
      gradcheck_directional(f, model.named(), 10, 9000 + seed, 1e-5, corrupt);
  return {"objective", r.max_rel_error, r.worst_param, r.max_rel_error < kThreshold};
}

}  // namespace

std::vector<std::string> gradient_suite_components() {
  return {"ops", "encoder", "maa", "objective"};
}

std::vector<ComponentCheck> run_gradient_suite(std::size_t num_seeds,
                                               const std::string& corrupt_component) {
  if (num_seeds == 0) throw std::invalid_argument("run_gradient_suite: need seeds");
  if (!corrupt_component.empty()) {
    bool known = false;
    for (const std::string& c : gradient_suite_components())
      known = known || c == corrupt_component;
    if (!known)
      throw std::invalid_argument("run_gradient_suite: unknown component '" +
                                  corrupt_component + "'");
  }

  std::vector<ComponentCheck> out;
  for (const std::string& component : gradient_suite_components()) {
    const bool corrupt = component == corrupt_component;
    ComponentCheck worst;
    for (std::size_t seed = 0; seed < num_seeds; ++seed) {
      ComponentCheck c;
      if (component == "ops") c = check_ops(seed, corrupt);
      else if (component == "encoder") c = check_encoder(seed, corrupt);
      else if (component == "maa") c = check_maa(seed, corrupt);
      else c = check_objective(seed, corrupt);
      if (seed == 0 || c.max_rel_error > worst.max_rel_error) worst = c;
      worst.passed = worst.max_rel_error < kThreshold;
    }
    out.push_back(worst);
  }
  return out;
}

}  // namespace xltt
