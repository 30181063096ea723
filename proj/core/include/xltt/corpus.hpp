#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xltt {

struct CorpusError : std::runtime_error {
  explicit CorpusError(const std::string& what) : std::runtime_error(what) {}
};

// One extractive QA example: the answer is a literal substring of context
// starting at answer_char_start.
struct QAInstance {
  std::string id;
  std::string question;
  std::string context;
  std::string answer_text;
  std::size_t answer_char_start = 0;
  std::string language;
  std::string source_dataset;
};

struct Token {
  std::string text;     // lowercased
  std::size_t begin = 0;  // char offsets into the source text
  std::size_t end = 0;
};

// Lowercasing whitespace-and-punctuation tokenizer. Letter/digit runs are one
// token each, every punctuation character is its own token; offsets tile the
// non-space characters. Bytes >= 0x80 count as word characters so UTF-8
// sequences stay intact.
std::vector<Token> tokenize_text(const std::string& text);

// Token -> dense id map with stable reserved ids.
class Vocabulary {
 public:
  static constexpr int kCls = 0;
  static constexpr int kSep = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary() = default;

  // Adds the token if absent, returns its id.
  int add(const std::string& token);
  // kUnk for unknown tokens.
  int id_of(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }
  std::size_t size() const { return kNumReserved + ids_.size(); }

  void add_text(const std::string& text);

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::map<std::string, int> ids_;
};

// [CLS] question [SEP] passage [SEP] with segment ids and a gold token span.
struct TokenizedInstance {
  std::vector<int> input_ids;
  std::vector<int> token_types;  // 0 = question segment incl. CLS, 1 = passage incl. final SEP
  std::pair<std::size_t, std::size_t> answer_span;  // inclusive, into input_ids
  std::vector<std::pair<std::size_t, std::size_t>> char_offsets;  // markers carry (0,0)
  std::string language;
  std::size_t passage_first = 0;  // first/last real passage token (SEPs excluded)
  std::size_t passage_last = 0;

  std::size_t length() const { return input_ids.size(); }
};

struct ParallelInstance {
  TokenizedInstance pivot;
  std::vector<TokenizedInstance> auxiliaries;
  std::string id;
  std::string source_dataset;
};

// Text-level parallel instance, the JSON-lines corpus unit. Tokenization is
// re-done on load from the vocabulary file.
struct RawMember {
  std::string language;
  std::string question;
  std::string context;
  std::string answer_text;
  std::size_t answer_char_start = 0;
};

struct RawParallelInstance {
  std::string id;
  std::string source_dataset;
  std::vector<RawMember> members;  // pivot first, then auxiliaries in order
};

struct SquadParseResult {
  std::vector<QAInstance> instances;
  std::size_t skipped = 0;  // answer/offset mismatches
};

// SQuAD v1.1 schema; one instance per (question, first answer) pair. Schema
// violations throw with a path-qualified message; offset mismatches skip the
// instance and count it.
SquadParseResult parse_squad(const std::string& json_text, const std::string& language,
                             const std::string& source_dataset);
SquadParseResult parse_squad_file(const std::string& path, const std::string& language,
                                  const std::string& source_dataset);

// Minimal inclusive token range whose offsets cover [char_start, char_start+len).
std::pair<std::size_t, std::size_t> align_answer(const std::vector<Token>& context_tokens,
                                                 std::size_t answer_char_start,
                                                 std::size_t answer_len);

// Passage is truncated from the right to fit max_len; returns nullopt when
// truncation would remove any part of the answer. Throws when [CLS] q [SEP]
// [SEP] alone exceeds max_len.
std::optional<TokenizedInstance> build_input_sequence(
    const std::vector<Token>& question_tokens, const std::vector<Token>& passage_tokens,
    std::pair<std::size_t, std::size_t> answer_span_in_passage, const Vocabulary& vocab,
    std::size_t max_len, const std::string& language);

class TranslationProvider;

// Question, context and answer translated; the answer is re-located at its
// first occurrence in the translated context (token-boundary aware). Returns
// nullopt when the translated answer does not occur.
std::optional<QAInstance> translate_instance(const QAInstance& inst,
                                             TranslationProvider& provider,
                                             const std::string& target_language);

struct DropReport {
  std::map<std::string, std::size_t> by_cause;
  std::size_t total() const;
  void count(const std::string& cause) { ++by_cause[cause]; }
  void merge(const DropReport& other);
};

struct LanguageTriple {
  std::string pivot;   // S
  std::string aux_m;   // M
  std::string aux_n;   // N
};

struct RawCorpusResult {
  std::vector<RawParallelInstance> instances;
  DropReport drops;
};

// Translation stage: one RawParallelInstance per surviving input, members
// ordered (S, M, N).
RawCorpusResult build_raw_parallel_corpus(const std::vector<QAInstance>& dataset,
                                          const std::map<std::string, TranslationProvider*>& providers,
                                          const LanguageTriple& languages);

struct TokenizedCorpusResult {
  std::vector<ParallelInstance> instances;
  DropReport drops;
};

// Tokenization stage: survival requires every member to pass alignment and
// truncation.
TokenizedCorpusResult tokenize_parallel_corpus(const std::vector<RawParallelInstance>& raw,
                                               const Vocabulary& vocab,
                                               std::size_t max_len);

struct ParallelCorpusResult {
  std::vector<ParallelInstance> instances;
  std::vector<RawParallelInstance> raw;
  DropReport drops;
};

ParallelCorpusResult build_parallel_corpus(const std::vector<QAInstance>& dataset,
                                           const std::map<std::string, TranslationProvider*>& providers,
                                           const LanguageTriple& languages,
                                           const Vocabulary& vocab, std::size_t max_len);

// JSON-lines IO for the text-level corpus.
std::string to_jsonl_line(const RawParallelInstance& inst);
RawParallelInstance from_jsonl_line(const std::string& line);
void write_parallel_corpus(const std::string& path,
                           const std::vector<RawParallelInstance>& corpus);
std::vector<RawParallelInstance> read_parallel_corpus(const std::string& path);

// Builds a vocabulary over the union of all member texts of a corpus.
Vocabulary build_vocabulary(const std::vector<RawParallelInstance>& corpus);

}  // namespace xltt
