// Command-line surface: corpus construction, dataset weighting, training,
// evaluation and gradient verification as reproducible runs.
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xltt/corpus.hpp"
#include "xltt/providers.hpp"
#include "xltt/similarity.hpp"
#include "xltt/trainer.hpp"
#include "xltt/verify.hpp"
#include "xltt/xlg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xltt;

namespace {

// exit codes: 0 ok, 1 verification failure, 2 input/schema, 3 similarity
// degenerate, 4 protocol violation
struct ExitWith {
  int code;
  std::string message;
};

volatile std::sig_atomic_t g_interrupted = 0;
void on_sigint(int) { g_interrupted = 1; }

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw ExitWith{2, "input file not found: " + path};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExitWith{2, "cannot write: " + path};
  out << text;
}

// Every run echoes its resolved configuration; the echo re-parses to the
// same configuration.
void echo_config(CLI::App* cmd, const std::string& out_dir) {
  const std::string text = cmd->config_to_str(true, false);
  if (out_dir.empty())
    std::cout << "# resolved configuration\n" << text;
  else
    write_text(out_dir + "/" + cmd->get_name() + ".resolved.cfg", text);
}

void prepare_out_dir(const std::string& out_dir) {
  if (!out_dir.empty()) fs::create_directories(out_dir);
}

struct ProviderSet {
  std::vector<std::unique_ptr<TranslationProvider>> owned;
  std::map<std::string, TranslationProvider*> by_language;
};

// spec forms: identity | cipher:<seed>[:reverse] | external:<command>
ProviderSet parse_providers(const std::vector<std::string>& specs) {
  ProviderSet set;
  for (const std::string& entry : specs) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ExitWith{2, "provider must be <language>=<spec>: " + entry};
    const std::string language = entry.substr(0, eq);
    const std::string spec = entry.substr(eq + 1);

    std::unique_ptr<TranslationProvider> provider;
    if (spec == "identity") {
      provider = std::make_unique<IdentityProvider>();
    } else if (spec.rfind("cipher:", 0) == 0) {
      std::string rest = spec.substr(7);
      bool reverse = false;
      const auto colon = rest.find(':');
      if (colon != std::string::npos) {
        const std::string tail = rest.substr(colon + 1);
        if (tail != "reverse") throw ExitWith{2, "bad cipher spec: " + spec};
        reverse = true;
        rest = rest.substr(0, colon);
      }
      try {
        provider = std::make_unique<CipherProvider>(language, std::stoull(rest), reverse);
      } catch (const std::exception&) {
        throw ExitWith{2, "bad cipher seed in: " + spec};
      }
    } else if (spec.rfind("external:", 0) == 0) {
      provider = std::make_unique<ExternalCommandProvider>(language, spec.substr(9));
    } else {
      throw ExitWith{2, "unknown provider spec: " + spec};
    }
    set.by_language[language] = provider.get();
    set.owned.push_back(std::move(provider));
  }
  return set;
}

std::map<std::string, std::vector<RawParallelInstance>> load_corpora(
    const std::vector<std::string>& entries) {
  std::map<std::string, std::vector<RawParallelInstance>> corpora;
  for (const std::string& entry : entries) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ExitWith{2, "corpus must be <dataset>=<path>: " + entry};
    const std::string name = entry.substr(0, eq);
    const std::string path = entry.substr(eq + 1);
    require_file(path);
    corpora[name] = read_parallel_corpus(path);
    for (auto& inst : corpora[name]) inst.source_dataset = name;
  }
  return corpora;
}

json drops_to_json(const DropReport& drops) {
  json j = json::object();
  for (const auto& [cause, count] : drops.by_cause) j[cause] = count;
  j["total"] = drops.total();
  return j;
}

// --- build-corpus ---

struct BuildCorpusArgs {
  std::string input, dataset, out_dir;
  std::string pivot, aux_m, aux_n;
  std::vector<std::string> providers;
};

void cmd_build_corpus(CLI::App* cmd, const BuildCorpusArgs& a) {
  require_file(a.input);
  prepare_out_dir(a.out_dir);

  SquadParseResult parsed;
  try {
    parsed = parse_squad_file(a.input, a.pivot, a.dataset);
  } catch (const std::exception& e) {
    throw ExitWith{2, std::string("cannot parse ") + a.input + ": " + e.what()};
  }

  ProviderSet providers = parse_providers(a.providers);
  LanguageTriple triple{a.pivot, a.aux_m, a.aux_n};
  RawCorpusResult corpus =
      build_raw_parallel_corpus(parsed.instances, providers.by_language, triple);

  write_parallel_corpus(a.out_dir + "/" + a.dataset + ".jsonl", corpus.instances);
  DropReport drops = corpus.drops;
  if (parsed.skipped > 0) drops.by_cause["input-offset-mismatch"] += parsed.skipped;
  write_text(a.out_dir + "/" + a.dataset + ".drops.json", drops_to_json(drops).dump(2) + "\n");
  echo_config(cmd, a.out_dir);
  std::cout << "wrote " << corpus.instances.size() << " parallel instances, dropped "
            << drops.total() << "\n";
}

// --- similarity ---

struct SimilarityArgs {
  std::vector<std::string> corpora;
  std::string target, target_id = "target", out_dir;
  bool uniform_fallback = false;
};

void cmd_similarity(CLI::App* cmd, const SimilarityArgs& a) {
  auto corpora = load_corpora(a.corpora);
  require_file(a.target);
  auto target_corpus = read_parallel_corpus(a.target);
  prepare_out_dir(a.out_dir);

  std::vector<QuestionDocument> docs;
  for (const auto& [name, corpus] : corpora)
    docs.push_back(question_document_from_corpus(name, corpus));
  QuestionDocument target_doc = question_document_from_corpus(a.target_id, target_corpus);

  json out;
  bool uniform_used = false;
  try {
    SimilarityReport report = task_similarity(docs, target_doc);
    out["raw"] = report.raw;
    out["normalized"] = report.normalized.weights;
  } catch (const SimilarityError& e) {
    if (!a.uniform_fallback) throw ExitWith{3, e.what()};
    std::vector<std::string> ids;
    for (const auto& [name, corpus] : corpora) ids.push_back(name);
    out["raw"] = json::object();
    out["normalized"] = uniform_weights(ids).weights;
    uniform_used = true;
  }
  out["uniform_fallback"] = uniform_used;

  write_text(a.out_dir + "/weights.json", out.dump(2) + "\n");
  echo_config(cmd, a.out_dir);
  std::cout << out.dump(2) << "\n";
}

// --- train ---

struct TrainArgs {
  std::vector<std::string> corpora;
  std::string weights_path, out_dir, resume;
  bool uniform_weights = false, no_maa = false;
  std::size_t hidden = 32, layers = 2, enc_heads = 1, maa_heads = 1, max_len = 128;
  TrainConfig config;
};

WeightTable load_weight_table(const std::string& path) {
  require_file(path);
  std::ifstream in(path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ExitWith{2, std::string("cannot parse weights file: ") + e.what()};
  }
  WeightTable table;
  for (auto& [name, value] : j.at("normalized").items())
    table.weights[name] = value.get<double>();
  return table;
}

void cmd_train(CLI::App* cmd, const TrainArgs& a) {
  auto raw_corpora = load_corpora(a.corpora);
  if (raw_corpora.empty()) throw ExitWith{2, "no training corpora given"};
  prepare_out_dir(a.out_dir);

  std::vector<RawParallelInstance> all_raw;
  std::vector<std::string> ids;
  for (const auto& [name, corpus] : raw_corpora) {
    ids.push_back(name);
    all_raw.insert(all_raw.end(), corpus.begin(), corpus.end());
  }
  const Vocabulary vocab = build_vocabulary(all_raw);

  Corpora corpora;
  DropReport drops;
  for (const auto& [name, corpus] : raw_corpora) {
    TokenizedCorpusResult tokenized = tokenize_parallel_corpus(corpus, vocab, a.max_len);
    corpora[name] = std::move(tokenized.instances);
    drops.merge(tokenized.drops);
  }

  WeightTable weights;
  if (a.uniform_weights) weights = uniform_weights(ids);
  else if (!a.weights_path.empty()) weights = load_weight_table(a.weights_path);
  else throw ExitWith{2, "need --weights or --uniform-weights"};
  for (const std::string& id : ids)
    if (!weights.has(id)) throw ExitWith{2, "no weight for dataset '" + id + "'"};

  std::unique_ptr<Trainer> trainer;
  if (!a.resume.empty()) {
    require_file(a.resume);
    trainer = std::make_unique<Trainer>(Trainer::load_checkpoint(a.resume));
  } else {
    Model model = Model::init(
        {a.hidden, a.layers, a.max_len, a.enc_heads}, vocab.size(), a.config.seed);
    model.maa_config.num_heads = a.maa_heads;
    model.use_maa = !a.no_maa;
    trainer = std::make_unique<Trainer>(std::move(model), a.config);
  }

  vocab.save(a.out_dir + "/vocab.txt");
  echo_config(cmd, a.out_dir);

  std::signal(SIGINT, on_sigint);
  const std::size_t total = trainer->config().total_steps;
  while (trainer->step() < total && !g_interrupted) {
    trainer->run(corpora, weights, std::min(total, trainer->step() + 10));
    if (!trainer->trace().empty() && trainer->step() % 100 == 0)
      std::cout << "step " << trainer->step() << " loss "
                << trainer->trace().back().total << "\n";
  }
  std::signal(SIGINT, SIG_DFL);

  trainer->save_checkpoint(a.out_dir + "/checkpoint.bin");
  write_text(a.out_dir + "/trace.csv", trace_to_csv(trainer->trace()));
  if (g_interrupted)
    std::cout << "interrupted at step " << trainer->step() << "; checkpoint written\n";
  else
    std::cout << "finished at step " << trainer->step() << "; checkpoint written\n";
}

// --- eval ---

struct EvalArgs {
  std::string checkpoint, vocab_path, target, out_dir;
  std::vector<std::string> training_datasets;
  bool sanity = false;
  std::size_t max_len = 128;
};

void cmd_eval(CLI::App* cmd, const EvalArgs& a) {
  require_file(a.checkpoint);
  require_file(a.vocab_path);
  const auto eq = a.target.find('=');
  if (eq == std::string::npos)
    throw ExitWith{2, "target must be <dataset>=<path>: " + a.target};
  const std::string target_id = a.target.substr(0, eq);
  const std::string target_path = a.target.substr(eq + 1);
  require_file(target_path);

  const std::set<std::string> training(a.training_datasets.begin(),
                                       a.training_datasets.end());
  if (!a.sanity && training.count(target_id) > 0)
    throw ExitWith{4, "target dataset '" + target_id +
                          "' appeared in training; refusing a zero-shot claim "
                          "(rerun with --sanity for a held-out training slice)"};

  Trainer trainer = Trainer::load_checkpoint(a.checkpoint);
  Vocabulary vocab = Vocabulary::load(a.vocab_path);
  auto raw = read_parallel_corpus(target_path);
  for (auto& inst : raw) inst.source_dataset = target_id;
  TokenizedCorpusResult tokenized = tokenize_parallel_corpus(raw, vocab, a.max_len);

  EvalReport report = run_xlg(trainer.model(), tokenized.instances, raw, training,
                              trainer.config().max_answer_len, a.sanity);

  prepare_out_dir(a.out_dir);
  write_text(a.out_dir + "/report.json", report_to_json(report) + "\n");
  write_text(a.out_dir + "/report.txt", report_to_table(report));
  echo_config(cmd, a.out_dir);
  std::cout << report_to_table(report);
}

// --- gradcheck ---

struct GradcheckArgs {
  std::size_t seeds = 20;
  std::string corrupt, out_dir;
};

void cmd_gradcheck(CLI::App* cmd, const GradcheckArgs& a) {
  std::vector<ComponentCheck> checks;
  try {
    checks = run_gradient_suite(a.seeds, a.corrupt);
  } catch (const std::invalid_argument& e) {
    throw ExitWith{2, e.what()};
  }
  echo_config(cmd, a.out_dir);

  bool all_passed = true;
  std::vector<std::string> failing;
  for (const ComponentCheck& c : checks) {
    std::cout << c.component << ": max rel error " << c.max_rel_error << " (worst "
              << c.worst << ") " << (c.passed ? "PASS" : "FAIL") << "\n";
    if (!c.passed) failing.push_back(c.component);
    all_passed = all_passed && c.passed;
  }
  if (!all_passed) {
    std::string joined;
    for (const std::string& f : failing) joined += (joined.empty() ? "" : ", ") + f;
    throw ExitWith{1, "gradient verification failed: " + joined};
  }
  std::cout << "all components passed over " << a.seeds << " seeds\n";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string usage =
      "usage: xltt <command> [options]\n"
      "commands:\n"
      "  build-corpus  translate a QA dataset into a parallel corpus\n"
      "  similarity    task-level dataset weights for a target\n"
      "  train         train on weighted parallel corpora\n"
      "  eval          decode and score a target corpus\n"
      "  gradcheck     finite-difference gradient verification\n"
      "run 'xltt <command> --help' for command options\n";
  if (argc < 2 || std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h") {
    std::cout << usage;
    return argc < 2 ? 2 : 0;
  }
  const std::string command = argv[1];

  // Standalone parsers per command so each accepts a flat key=value --config
  // file; command-line flags win over config values.
  BuildCorpusArgs bc;
  CLI::App build_app{"translate a QA dataset into a parallel corpus", "build-corpus"};
  CLI::App* build = &build_app;
  build->option_defaults()->always_capture_default(true);
  build->set_config("--config");
  build->allow_config_extras(false);
  build->add_option("--input", bc.input, "SQuAD-shaped input JSON")->required();
  build->add_option("--dataset", bc.dataset, "dataset id")->required();
  build->add_option("--pivot", bc.pivot, "pivot language tag")->required();
  build->add_option("--aux-m", bc.aux_m, "first auxiliary language")->required();
  build->add_option("--aux-n", bc.aux_n, "second auxiliary language")->required();
  build->add_option("--provider", bc.providers,
                    "<language>=identity|cipher:<seed>[:reverse]|external:<command>");
  build->add_option("--out-dir", bc.out_dir, "output directory")->required();

  SimilarityArgs sim;
  CLI::App similarity_app{"task-level dataset weights for a target", "similarity"};
  CLI::App* similarity = &similarity_app;
  similarity->option_defaults()->always_capture_default(true);
  similarity->set_config("--config");
  similarity->allow_config_extras(false);
  similarity->add_option("--corpus", sim.corpora, "<dataset>=<jsonl path>, repeatable")
      ->required();
  similarity->add_option("--target", sim.target, "target corpus jsonl")->required();
  similarity->add_option("--target-id", sim.target_id, "target dataset id");
  similarity->add_flag("--uniform-weights", sim.uniform_fallback,
                       "fall back to uniform weights when all similarities are zero");
  similarity->add_option("--out-dir", sim.out_dir, "output directory")->required();

  TrainArgs tr;
  CLI::App train_app{"train on weighted parallel corpora", "train"};
  CLI::App* train = &train_app;
  train->option_defaults()->always_capture_default(true);
  train->set_config("--config");
  train->allow_config_extras(false);
  train->add_option("--corpus", tr.corpora, "<dataset>=<jsonl path>, repeatable")
      ->required();
  train->add_option("--weights", tr.weights_path, "weights.json from the similarity run");
  train->add_flag("--uniform-weights", tr.uniform_weights, "equal dataset weights");
  train->add_option("--pivot", tr.config.languages.pivot)->required();
  train->add_option("--aux-m", tr.config.languages.aux_m)->required();
  train->add_option("--aux-n", tr.config.languages.aux_n)->required();
  train->add_option("--lr0", tr.config.lr0, "peak learning rate");
  train->add_option("--weight-decay", tr.config.weight_decay);
  train->add_option("--beta1", tr.config.beta1);
  train->add_option("--beta2", tr.config.beta2);
  train->add_option("--eps", tr.config.eps);
  train->add_option("--total-steps", tr.config.total_steps);
  train->add_option("--batch-size", tr.config.batch_size);
  train->add_option("--seed", tr.config.seed)->envname("XLTT_SEED");
  train->add_option("--max-answer-len", tr.config.max_answer_len);
  train->add_option("--max-grad-norm", tr.config.max_grad_norm, "0 disables clipping");
  train->add_option("--hidden", tr.hidden);
  train->add_option("--layers", tr.layers);
  train->add_option("--enc-heads", tr.enc_heads);
  train->add_option("--maa-heads", tr.maa_heads);
  train->add_option("--max-len", tr.max_len, "tokenized sequence cap");
  train->add_flag("--no-maa", tr.no_maa, "ablation: heads read concat[B, B]");
  train->add_option("--resume", tr.resume, "checkpoint to resume from");
  train->add_option("--out-dir", tr.out_dir, "output directory")->required();

  EvalArgs ev;
  CLI::App eval_app{"decode and score a target corpus", "eval"};
  CLI::App* eval_cmd = &eval_app;
  eval_cmd->option_defaults()->always_capture_default(true);
  eval_cmd->set_config("--config");
  eval_cmd->allow_config_extras(false);
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--vocab", ev.vocab_path, "vocab.txt from the training run")
      ->required();
  eval_cmd->add_option("--target", ev.target, "<dataset>=<jsonl path>")->required();
  eval_cmd->add_option("--training-dataset", ev.training_datasets,
                       "dataset ids used in training, repeatable");
  eval_cmd->add_flag("--sanity", ev.sanity,
                     "allow a held-out slice of the training distribution");
  eval_cmd->add_option("--max-len", ev.max_len);
  eval_cmd->add_option("--out-dir", ev.out_dir, "output directory")->required();

  GradcheckArgs gc;
  CLI::App gradcheck_app{"finite-difference gradient verification", "gradcheck"};
  CLI::App* gradcheck_cmd = &gradcheck_app;
  gradcheck_cmd->option_defaults()->always_capture_default(true);
  gradcheck_cmd->set_config("--config");
  gradcheck_cmd->allow_config_extras(false);
  gradcheck_cmd->add_option("--seeds", gc.seeds, "random fixtures per component");
  gradcheck_cmd->add_option("--corrupt", gc.corrupt,
                            "perturb this component's analytic gradient (self-test)");
  gradcheck_cmd->add_option("--out-dir", gc.out_dir, "optional output directory");

  std::map<std::string, CLI::App*> commands{{"build-corpus", build},
                                            {"similarity", similarity},
                                            {"train", train},
                                            {"eval", eval_cmd},
                                            {"gradcheck", gradcheck_cmd}};
  auto it = commands.find(command);
  if (it == commands.end()) {
    std::cerr << "unknown command: " << command << "\n" << usage;
    return 2;
  }

  try {
    it->second->parse(argc - 1, argv + 1);
  } catch (const CLI::ParseError& e) {
    const int code = it->second->exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (command == "build-corpus") cmd_build_corpus(build, bc);
    else if (command == "similarity") cmd_similarity(similarity, sim);
    else if (command == "train") cmd_train(train, tr);
    else if (command == "eval") cmd_eval(eval_cmd, ev);
    else cmd_gradcheck(gradcheck_cmd, gc);
  } catch (const ExitWith& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const SimilarityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const CorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ProviderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
