#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xltt/corpus.hpp"
#include "xltt/model.hpp"
#include "xltt/rng.hpp"
#include "xltt/similarity.hpp"

namespace xltt {

struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
  double lr0 = 4e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t total_steps = 1000;  // T
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::size_t max_answer_len = 30;
  double max_grad_norm = 0.0;  // 0 disables clipping
  LanguageTriple languages;
};

// lr0 * 0.5 * (1 + cos(pi * step / T)); steps past T clamp to 0.
double lr_schedule(std::size_t step, const TrainConfig& config);

// Bias-corrected Adam with decoupled weight decay. Moments are owned here,
// aligned with the parameter list handed to the constructor.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, const TrainConfig& config);

  // Applies one update using the grads currently stored on the parameters.
  // step_number is 1-based for bias correction. Non-finite grads abort the
  // step with a diagnostic naming the parameter.
  void apply(std::size_t step_number, double lr);

  // Moment tensors for checkpointing, names prefixed adam.m. / adam.v.
  std::vector<std::pair<std::string, Tensor>> state() const;

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<Tensor> m_, v_;
  TrainConfig config_;
};

using Corpora = std::map<std::string, std::vector<ParallelInstance>>;

// batch_size draws; each picks a dataset proportionally to its weight, then
// an instance uniformly within it. A positively weighted empty dataset is an
// error; zero-weight datasets are never drawn.
std::vector<const ParallelInstance*> sample_batch(const Corpora& corpora,
                                                  const WeightTable& weights, Rng& rng,
                                                  std::size_t batch_size);

struct TraceRow {
  std::size_t step = 0;
  double lr = 0.0;
  double total = 0.0;
  double l_s = 0.0;
  double alpha_m = 0.0;
  double alpha_n = 0.0;
  double l_m = 0.0;
  double l_n = 0.0;
};

// Header step,lr,total,L_s,alpha_M,alpha_N,L_M,L_N; full precision values.
std::string trace_to_csv(const std::vector<TraceRow>& trace);

class Trainer {
 public:
  Trainer(Model model, const TrainConfig& config);

  Model& model() { return model_; }
  const Model& model() const { return model_; }
  const TrainConfig& config() const { return config_; }
  std::size_t step() const { return step_; }
  const std::vector<TraceRow>& trace() const { return trace_; }

  // Runs optimization steps until step() == until (capped at total_steps),
  // appending one TraceRow per step.
  void run(const Corpora& corpora, const WeightTable& weights, std::size_t until);

  // Versioned container: magic, manifest (names, shapes, offsets, config,
  // RNG state), then the raw little-endian doubles.
  void save_checkpoint(const std::string& path) const;
  static Trainer load_checkpoint(const std::string& path);

 private:
  Model model_;
  TrainConfig config_;
  AdamW optimizer_;
  Rng rng_;
  std::size_t step_ = 0;
  std::vector<TraceRow> trace_;
};

}  // namespace xltt
