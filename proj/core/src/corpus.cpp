#include "xltt/corpus.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "xltt/providers.hpp"

namespace xltt {

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

bool is_space_char(unsigned char c) { return std::isspace(c); }

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<Token> tokenize_text(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_space_char(c)) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      tokens.push_back({lower(text.substr(i, j - i)), i, j});
      i = j;
    } else {
      // every punctuation character is its own token
      tokens.push_back({text.substr(i, 1), i, i + 1});
      ++i;
    }
  }
  return tokens;
}

int Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(size());
  ids_.emplace(token, id);
  return id;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

void Vocabulary::add_text(const std::string& text) {
  for (const Token& t : tokenize_text(text)) add(t.text);
}

void Vocabulary::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["reserved"] = {{"cls", kCls}, {"sep", kSep}, {"pad", kPad}, {"unk", kUnk}};
  nlohmann::ordered_json toks = nlohmann::ordered_json::object();
  for (const auto& [tok, id] : ids_) toks[tok] = id;
  j["tokens"] = std::move(toks);
  std::ofstream os(path);
  if (!os) throw CorpusError("cannot write vocabulary file: " + path);
  os << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CorpusError("cannot read vocabulary file: " + path);
  nlohmann::json j;
  is >> j;
  if (!j.contains("reserved") || j["reserved"].value("cls", -1) != kCls ||
      j["reserved"].value("sep", -1) != kSep || j["reserved"].value("pad", -1) != kPad ||
      j["reserved"].value("unk", -1) != kUnk)
    throw CorpusError("vocabulary file " + path + ": reserved-id block missing or unstable");
  Vocabulary v;
  for (auto& [tok, id] : j.at("tokens").items())
    v.ids_[tok] = id.get<int>();
  return v;
}

namespace {

template <typename J>
const J& require(const J& j, const char* key, const std::string& path) {
  if (!j.contains(key))
    throw CorpusError("SQuAD schema violation at " + path + ": missing '" + key + "'");
  return j.at(key);
}

}  // namespace

SquadParseResult parse_squad(const std::string& json_text, const std::string& language,
                             const std::string& source_dataset) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorpusError(std::string("SQuAD schema violation: not valid JSON: ") + e.what());
  }

  SquadParseResult result;
  const auto& data = require(doc, "data", "$");
  for (std::size_t a = 0; a < data.size(); ++a) {
    const std::string apath = "data[" + std::to_string(a) + "]";
    const auto& paragraphs = require(data[a], "paragraphs", apath);
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
      const std::string ppath = apath + ".paragraphs[" + std::to_string(p) + "]";
      const std::string context =
          require(paragraphs[p], "context", ppath).template get<std::string>();
      const auto& qas = require(paragraphs[p], "qas", ppath);
      for (std::size_t q = 0; q < qas.size(); ++q) {
        const std::string qpath = ppath + ".qas[" + std::to_string(q) + "]";
        const auto& qa = qas[q];
        QAInstance inst;
        inst.id = require(qa, "id", qpath).template get<std::string>();
        inst.question = require(qa, "question", qpath).template get<std::string>();
        inst.context = context;
        inst.language = language;
        inst.source_dataset = source_dataset;
        const auto& answers = require(qa, "answers", qpath);
        if (answers.empty())
          throw CorpusError("SQuAD schema violation at " + qpath + ": empty answers");
        const auto& ans = answers[0];
        inst.answer_text =
            require(ans, "text", qpath + ".answers[0]").template get<std::string>();
        const long long start =
            require(ans, "answer_start", qpath + ".answers[0]").template get<long long>();
        if (start < 0 ||
            context.compare(static_cast<std::size_t>(start), inst.answer_text.size(),
                            inst.answer_text) != 0) {
          ++result.skipped;
          continue;
        }
        inst.answer_char_start = static_cast<std::size_t>(start);
        result.instances.push_back(std::move(inst));
      }
    }
  }
  return result;
}

SquadParseResult parse_squad_file(const std::string& path, const std::string& language,
                                  const std::string& source_dataset) {
  std::ifstream is(path);
  if (!is) throw CorpusError("cannot read dataset file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_squad(buf.str(), language, source_dataset);
}

std::pair<std::size_t, std::size_t> align_answer(const std::vector<Token>& context_tokens,
                                                 std::size_t answer_char_start,
                                                 std::size_t answer_len) {
  const std::size_t s = answer_char_start;
  const std::size_t e = answer_char_start + answer_len;
  std::size_t first = context_tokens.size(), last = 0;
  bool found = false;
  for (std::size_t i = 0; i < context_tokens.size(); ++i) {
    const Token& t = context_tokens[i];
    if (t.begin < e && t.end > s) {
      if (!found) first = i;
      last = i;
      found = true;
    }
  }
  if (!found)
    throw CorpusError("align_answer: character span [" + std::to_string(s) + "," +
                      std::to_string(e) + ") covers no token");
  return {first, last};
}

std::optional<TokenizedInstance> build_input_sequence(
    const std::vector<Token>& question_tokens, const std::vector<Token>& passage_tokens,
    std::pair<std::size_t, std::size_t> answer_span_in_passage, const Vocabulary& vocab,
    std::size_t max_len, const std::string& language) {
  if (question_tokens.empty())
    throw CorpusError("build_input_sequence: empty question");
  const std::size_t q = question_tokens.size();
  if (q + 3 > max_len)
    throw CorpusError("build_input_sequence: question of " + std::to_string(q) +
                      " tokens does not fit max_len " + std::to_string(max_len));

  const std::size_t keep = std::min(passage_tokens.size(), max_len - q - 3);
  if (answer_span_in_passage.second >= keep) return std::nullopt;  // answer truncated

  TokenizedInstance out;
  out.language = language;
  out.input_ids.push_back(Vocabulary::kCls);
  out.token_types.push_back(0);
  out.char_offsets.emplace_back(0, 0);
  for (const Token& t : question_tokens) {
    out.input_ids.push_back(vocab.id_of(t.text));
    out.token_types.push_back(0);
    out.char_offsets.emplace_back(t.begin, t.end);
  }
  out.input_ids.push_back(Vocabulary::kSep);
  out.token_types.push_back(0);
  out.char_offsets.emplace_back(0, 0);
  for (std::size_t i = 0; i < keep; ++i) {
    out.input_ids.push_back(vocab.id_of(passage_tokens[i].text));
    out.token_types.push_back(1);
    out.char_offsets.emplace_back(passage_tokens[i].begin, passage_tokens[i].end);
  }
  out.input_ids.push_back(Vocabulary::kSep);
  out.token_types.push_back(1);
  out.char_offsets.emplace_back(0, 0);

  out.passage_first = q + 2;
  out.passage_last = q + 1 + keep;
  out.answer_span = {answer_span_in_passage.first + q + 2,
                     answer_span_in_passage.second + q + 2};
  return out;
}

namespace {

// First occurrence of needle in haystack at token boundaries.
std::size_t find_at_boundary(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return std::string::npos;
  std::size_t pos = haystack.find(needle);
  while (pos != std::string::npos) {
    const bool left_ok =
        pos == 0 || !is_word_char(static_cast<unsigned char>(haystack[pos - 1])) ||
        !is_word_char(static_cast<unsigned char>(needle.front()));
    const std::size_t end = pos + needle.size();
    const bool right_ok =
        end == haystack.size() || !is_word_char(static_cast<unsigned char>(haystack[end])) ||
        !is_word_char(static_cast<unsigned char>(needle.back()));
    if (left_ok && right_ok) return pos;
    pos = haystack.find(needle, pos + 1);
  }
  return std::string::npos;
}

}  // namespace

std::optional<QAInstance> translate_instance(const QAInstance& inst,
                                             TranslationProvider& provider,
                                             const std::string& target_language) {
  if (!provider.supports(target_language))
    throw ProviderError("provider " + provider.name() + " does not support language '" +
                        target_language + "'");
  QAInstance out;
  try {
    out.question = provider.translate(inst.question, target_language);
    out.context = provider.translate(inst.context, target_language);
    out.answer_text = provider.translate(inst.answer_text, target_language);
  } catch (const std::exception& e) {
    throw ProviderError("translation failed for instance '" + inst.id + "': " + e.what());
  }
  const std::size_t pos = find_at_boundary(out.context, out.answer_text);
  if (pos == std::string::npos) return std::nullopt;
  out.answer_char_start = pos;
  out.id = inst.id;
  out.language = target_language;
  out.source_dataset = inst.source_dataset;
  return out;
}

std::size_t DropReport::total() const {
  std::size_t t = 0;
  for (const auto& [cause, n] : by_cause) t += n;
  return t;
}

void DropReport::merge(const DropReport& other) {
  for (const auto& [cause, n] : other.by_cause) by_cause[cause] += n;
}

RawCorpusResult build_raw_parallel_corpus(
    const std::vector<QAInstance>& dataset,
    const std::map<std::string, TranslationProvider*>& providers,
    const LanguageTriple& languages) {
  for (const std::string& lang : {languages.aux_m, languages.aux_n})
    if (providers.find(lang) == providers.end())
      throw CorpusError("no translation provider for auxiliary language '" + lang + "'");

  RawCorpusResult result;
  for (const QAInstance& inst : dataset) {
    if (inst.language != languages.pivot)
      throw CorpusError("instance '" + inst.id + "' is tagged '" + inst.language +
                        "', expected pivot language '" + languages.pivot + "'");
    RawParallelInstance par;
    par.id = inst.id;
    par.source_dataset = inst.source_dataset;
    par.members.push_back(
        {inst.language, inst.question, inst.context, inst.answer_text, inst.answer_char_start});
    bool ok = true;
    for (const std::string& lang : {languages.aux_m, languages.aux_n}) {
      auto translated = translate_instance(inst, *providers.at(lang), lang);
      if (!translated) {
        result.drops.count("answer_not_found:" + lang);
        ok = false;
        break;
      }
      par.members.push_back({translated->language, translated->question, translated->context,
                             translated->answer_text, translated->answer_char_start});
    }
    if (ok) result.instances.push_back(std::move(par));
  }
  return result;
}

TokenizedCorpusResult tokenize_parallel_corpus(const std::vector<RawParallelInstance>& raw,
                                               const Vocabulary& vocab,
                                               std::size_t max_len) {
  TokenizedCorpusResult result;
  for (const RawParallelInstance& par : raw) {
    ParallelInstance out;
    out.id = par.id;
    out.source_dataset = par.source_dataset;
    bool ok = true;
    for (std::size_t m = 0; m < par.members.size(); ++m) {
      const RawMember& mem = par.members[m];
      const auto q_tokens = tokenize_text(mem.question);
      const auto p_tokens = tokenize_text(mem.context);
      std::pair<std::size_t, std::size_t> span;
      try {
        span = align_answer(p_tokens, mem.answer_char_start, mem.answer_text.size());
      } catch (const CorpusError&) {
        result.drops.count("alignment_failed:" + mem.language);
        ok = false;
        break;
      }
      auto tokenized =
          build_input_sequence(q_tokens, p_tokens, span, vocab, max_len, mem.language);
      if (!tokenized) {
        result.drops.count("answer_truncated:" + mem.language);
        ok = false;
        break;
      }
      if (m == 0)
        out.pivot = std::move(*tokenized);
      else
        out.auxiliaries.push_back(std::move(*tokenized));
    }
    if (ok) result.instances.push_back(std::move(out));
  }
  return result;
}

ParallelCorpusResult build_parallel_corpus(
    const std::vector<QAInstance>& dataset,
    const std::map<std::string, TranslationProvider*>& providers,
    const LanguageTriple& languages, const Vocabulary& vocab, std::size_t max_len) {
  RawCorpusResult raw = build_raw_parallel_corpus(dataset, providers, languages);
  TokenizedCorpusResult tok = tokenize_parallel_corpus(raw.instances, vocab, max_len);

  ParallelCorpusResult result;
  result.drops = raw.drops;
  result.drops.merge(tok.drops);
  result.instances = std::move(tok.instances);
  // keep only raw lines whose tokenized counterpart survived
  std::set<std::string> kept;
  for (const auto& inst : result.instances) kept.insert(inst.id);
  for (auto& r : raw.instances)
    if (kept.count(r.id)) result.raw.push_back(std::move(r));
  return result;
}

std::string to_jsonl_line(const RawParallelInstance& inst) {
  nlohmann::ordered_json j;
  j["id"] = inst.id;
  j["source_dataset"] = inst.source_dataset;
  j["members"] = nlohmann::ordered_json::array();
  for (const RawMember& m : inst.members) {
    nlohmann::ordered_json jm;
    jm["language"] = m.language;
    jm["question"] = m.question;
    jm["context"] = m.context;
    jm["answer_text"] = m.answer_text;
    jm["answer_char_start"] = m.answer_char_start;
    j["members"].push_back(std::move(jm));
  }
  return j.dump();
}

RawParallelInstance from_jsonl_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  RawParallelInstance inst;
  inst.id = j.at("id").get<std::string>();
  inst.source_dataset = j.at("source_dataset").get<std::string>();
  for (const auto& jm : j.at("members")) {
    RawMember m;
    m.language = jm.at("language").get<std::string>();
    m.question = jm.at("question").get<std::string>();
    m.context = jm.at("context").get<std::string>();
    m.answer_text = jm.at("answer_text").get<std::string>();
    m.answer_char_start = jm.at("answer_char_start").get<std::size_t>();
    inst.members.push_back(std::move(m));
  }
  return inst;
}

void write_parallel_corpus(const std::string& path,
                           const std::vector<RawParallelInstance>& corpus) {
  std::ofstream os(path);
  if (!os) throw CorpusError("cannot write corpus file: " + path);
  for (const auto& inst : corpus) os << to_jsonl_line(inst) << "\n";
}

std::vector<RawParallelInstance> read_parallel_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CorpusError("cannot read corpus file: " + path);
  std::vector<RawParallelInstance> corpus;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    corpus.push_back(from_jsonl_line(line));
  }
  return corpus;
}

Vocabulary build_vocabulary(const std::vector<RawParallelInstance>& corpus) {
  Vocabulary v;
  for (const auto& inst : corpus)
    for (const auto& m : inst.members) {
      v.add_text(m.question);
      v.add_text(m.context);
    }
  return v;
}

}  // namespace xltt
