#include "xltt/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace xltt {

double lr_schedule(std::size_t step, const TrainConfig& config) {
  if (config.total_steps == 0) return 0.0;
  if (step >= config.total_steps) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(config.total_steps);
  return config.lr0 * 0.5 * (1.0 + std::cos(M_PI * t));
}

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, const TrainConfig& config)
    : params_(std::move(params)), config_(config) {
  for (const auto& [name, p] : params_) {
    (void)name;
    m_.push_back(Tensor::zeros(p.rows(), p.cols()));
    v_.push_back(Tensor::zeros(p.rows(), p.cols()));
  }
}

void AdamW::apply(std::size_t step_number, double lr) {
  if (step_number == 0) throw TrainError("AdamW::apply: step_number is 1-based");

  for (const auto& [name, p] : params_) {
    if (!p.has_grad())
      throw TrainError("AdamW::apply: parameter '" + name + "' has no gradient");
    for (double g : p.grad())
      if (!std::isfinite(g))
        throw TrainError("AdamW::apply: non-finite gradient in '" + name +
                         "'; step rejected");
  }

  if (config_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [name, p] : params_) {
      (void)name;
      for (double g : p.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.max_grad_norm) {
      const double scale = config_.max_grad_norm / norm;
      for (auto& [name, p] : params_) {
        (void)name;
        for (double& g : p.grad_buffer()) g *= scale;
      }
    }
  }

  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_number));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_number));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi].second;
    auto grads = p.grad();
    auto m = m_[pi].values();
    auto v = v_[pi].values();
    auto values = p.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * grads[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= lr * (mhat / (std::sqrt(vhat) + config_.eps) +
                         config_.weight_decay * values[i]);
    }
  }
}

std::vector<std::pair<std::string, Tensor>> AdamW::state() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back("adam.m." + params_[i].first, m_[i]);
    out.emplace_back("adam.v." + params_[i].first, v_[i]);
  }
  return out;
}

std::vector<const ParallelInstance*> sample_batch(const Corpora& corpora,
                                                  const WeightTable& weights, Rng& rng,
                                                  std::size_t batch_size) {
  if (corpora.empty()) throw TrainError("sample_batch: no corpora");

  std::vector<std::pair<const std::string*, double>> cumulative;
  double total = 0.0;
  for (const auto& [dataset, instances] : corpora) {
    const double w = weights.at(dataset);
    if (w > 0.0 && instances.empty())
      throw TrainError("sample_batch: dataset '" + dataset +
                       "' has positive weight but no instances");
    if (w <= 0.0) continue;
    total += w;
    cumulative.emplace_back(&dataset, total);
  }
  if (cumulative.empty()) throw TrainError("sample_batch: all weights are zero");

  std::vector<const ParallelInstance*> batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const double u = rng.uniform() * total;
    const std::string* chosen = cumulative.back().first;
    for (const auto& [dataset, edge] : cumulative)
      if (u < edge) {
        chosen = dataset;
        break;
      }
    const auto& instances = corpora.at(*chosen);
    batch.push_back(&instances[rng.index(instances.size())]);
  }
  return batch;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "step,lr,total,L_s,alpha_M,alpha_N,L_M,L_N\n";
  for (const TraceRow& row : trace)
    os << row.step << ',' << row.lr << ',' << row.total << ',' << row.l_s << ','
       << row.alpha_m << ',' << row.alpha_n << ',' << row.l_m << ',' << row.l_n << '\n';
  return os.str();
}

Trainer::Trainer(Model model, const TrainConfig& config)
    : model_(std::move(model)),
      config_(config),
      optimizer_(model_.named(), config),
      rng_(config.seed) {
  if (config.total_steps < 1 && config.total_steps != 0)
    throw TrainError("Trainer: total_steps must be >= 1");
  if (config.batch_size < 1) throw TrainError("Trainer: batch_size must be >= 1");
  if (config.lr0 <= 0.0) throw TrainError("Trainer: lr0 must be positive");
}

void Trainer::run(const Corpora& corpora, const WeightTable& weights, std::size_t until) {
  if (until > config_.total_steps) until = config_.total_steps;
  while (step_ < until) {
    auto batch = sample_batch(corpora, weights, rng_, config_.batch_size);
    Tape tape;
    BatchObjective obj = batch_objective(tape, batch, model_, weights);
    tape.zero_grads();
    tape.backward(obj.total);

    const double lr = lr_schedule(step_, config_);
    optimizer_.apply(step_ + 1, lr);

    TraceRow row;
    row.step = step_;
    row.lr = lr;
    row.total = obj.total.item();
    row.l_s = obj.source_loss;
    auto pick = [](const std::map<std::string, double>& m, const std::string& key) {
      auto it = m.find(key);
      return it == m.end() ? 0.0 : it->second;
    };
    row.alpha_m = pick(obj.alpha, config_.languages.aux_m);
    row.alpha_n = pick(obj.alpha, config_.languages.aux_n);
    row.l_m = pick(obj.aux_loss, config_.languages.aux_m);
    row.l_n = pick(obj.aux_loss, config_.languages.aux_n);
    trace_.push_back(row);
    ++step_;
  }
}

namespace {

constexpr char kMagic[8] = {'X', 'L', 'T', 'T', 'C', 'K', 'P', '1'};

nlohmann::ordered_json config_to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"total_steps", c.total_steps},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"max_answer_len", c.max_answer_len},
          {"max_grad_norm", c.max_grad_norm},
          {"pivot", c.languages.pivot},
          {"aux_m", c.languages.aux_m},
          {"aux_n", c.languages.aux_n}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr0 = j.at("lr0").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.total_steps = j.at("total_steps").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_answer_len = j.at("max_answer_len").get<std::size_t>();
  c.max_grad_norm = j.at("max_grad_norm").get<double>();
  c.languages.pivot = j.at("pivot").get<std::string>();
  c.languages.aux_m = j.at("aux_m").get<std::string>();
  c.languages.aux_n = j.at("aux_n").get<std::string>();
  return c;
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  std::vector<std::pair<std::string, Tensor>> tensors = model_.named();
  for (auto& t : optimizer_.state()) tensors.push_back(std::move(t));

  nlohmann::ordered_json manifest;
  manifest["version"] = 1;
  manifest["step"] = step_;
  manifest["config"] = config_to_json(config_);
  manifest["model"] = {{"hidden", model_.config.hidden},
                       {"num_layers", model_.config.num_layers},
                       {"max_len", model_.config.max_len},
                       {"num_heads", model_.config.num_heads},
                       {"vocab_size", model_.encoder.vocab_size},
                       {"use_maa", model_.use_maa},
                       {"maa_heads", model_.maa_config.num_heads}};
  {
    std::ostringstream os;
    rng_.save(os);
    manifest["rng"] = os.str();
  }
  std::size_t offset = 0;
  manifest["tensors"] = nlohmann::ordered_json::array();
  for (const auto& [name, t] : tensors) {
    manifest["tensors"].push_back(
        {{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", offset}});
    offset += t.size();
  }

  const std::string m = manifest.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw TrainError("save_checkpoint: cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  const std::uint64_t mlen = m.size();
  os.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  os.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto& [name, t] : tensors) {
    (void)name;
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw TrainError("save_checkpoint: write failed for " + path);
}

Trainer Trainer::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TrainError("load_checkpoint: cannot read " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw TrainError("load_checkpoint: " + path + " is not a checkpoint (bad magic)");
  std::uint64_t mlen = 0;
  is.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  std::string mtext(mlen, '\0');
  is.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw TrainError("load_checkpoint: truncated manifest in " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mtext);
  } catch (const std::exception& e) {
    throw TrainError(std::string("load_checkpoint: bad manifest: ") + e.what());
  }
  if (manifest.at("version").get<int>() != 1)
    throw TrainError("load_checkpoint: unsupported version");

  const auto& mj = manifest.at("model");
  EncoderConfig ec;
  ec.hidden = mj.at("hidden").get<std::size_t>();
  ec.num_layers = mj.at("num_layers").get<std::size_t>();
  ec.max_len = mj.at("max_len").get<std::size_t>();
  ec.num_heads = mj.at("num_heads").get<std::size_t>();
  Model model = Model::init(ec, mj.at("vocab_size").get<std::size_t>(), 0);
  model.use_maa = mj.at("use_maa").get<bool>();
  model.maa_config.num_heads = mj.at("maa_heads").get<std::size_t>();

  Trainer trainer(std::move(model), config_from_json(manifest.at("config")));
  trainer.step_ = manifest.at("step").get<std::size_t>();
  {
    std::istringstream rs(manifest.at("rng").get<std::string>());
    trainer.rng_.load(rs);
  }

  std::map<std::string, Tensor> by_name;
  for (const auto& [name, t] : trainer.model_.named()) by_name.emplace(name, t);
  for (const auto& [name, t] : trainer.optimizer_.state()) by_name.emplace(name, t);

  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw TrainError("load_checkpoint: unknown tensor '" + name + "'");
    Tensor t = it->second;
    if (t.rows() != entry.at("rows").get<std::size_t>() ||
        t.cols() != entry.at("cols").get<std::size_t>())
      throw TrainError("load_checkpoint: shape mismatch for '" + name + "'");
    is.seekg(static_cast<std::streamoff>(sizeof(kMagic) + sizeof(std::uint64_t) + mlen +
                                         entry.at("offset").get<std::size_t>() *
                                             sizeof(double)));
    is.read(reinterpret_cast<char*>(t.values().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw TrainError("load_checkpoint: truncated data for '" + name + "'");
  }
  return trainer;
}

}  // namespace xltt
