#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>

namespace xltt {

struct ProviderError : std::runtime_error {
  explicit ProviderError(const std::string& what) : std::runtime_error(what) {}
};

class TranslationProvider {
 public:
  virtual ~TranslationProvider() = default;
  virtual bool supports(const std::string& target_language) const = 0;
  virtual std::string translate(const std::string& text,
                                const std::string& target_language) = 0;
  virtual std::string name() const = 0;
};

// Passes text through unchanged; output only differs in language tag.
class IdentityProvider : public TranslationProvider {
 public:
  bool supports(const std::string&) const override { return true; }
  std::string translate(const std::string& text, const std::string&) override {
    return text;
  }
  std::string name() const override { return "identity"; }
};

// Seeded bijective word cipher simulating a distinct language with exact
// alignment ground truth. Word tokens map to generated pseudo-words,
// punctuation passes through, output tokens are joined by single spaces.
// Optional deterministic word-order reversal.
class CipherProvider : public TranslationProvider {
 public:
  CipherProvider(std::string language, std::uint64_t seed, bool reverse_words = false);

  bool supports(const std::string& target_language) const override {
    return target_language == language_;
  }
  std::string translate(const std::string& text,
                        const std::string& target_language) override;
  std::string name() const override { return "cipher:" + language_; }

  // Inverse mapping; only words this provider has emitted are invertible.
  std::string decipher(const std::string& text) const;

  const std::string& language() const { return language_; }
  bool reverses() const { return reverse_words_; }

 private:
  std::string cipher_word(const std::string& word);

  std::string language_;
  std::uint64_t seed_;
  bool reverse_words_;
  std::map<std::string, std::string> forward_;
  std::map<std::string, std::string> inverse_;
};

// Subprocess contract: one JSON object {text, target_language} per input line
// on stdin, one JSON object {text} per line on stdout, same order. The child
// must flush per line.
class ExternalCommandProvider : public TranslationProvider {
 public:
  ExternalCommandProvider(std::string language, std::string command);
  ~ExternalCommandProvider() override;

  ExternalCommandProvider(const ExternalCommandProvider&) = delete;
  ExternalCommandProvider& operator=(const ExternalCommandProvider&) = delete;

  bool supports(const std::string& target_language) const override {
    return target_language == language_;
  }
  std::string translate(const std::string& text,
                        const std::string& target_language) override;
  std::string name() const override { return "external:" + command_; }

 private:
  void spawn();
  void shutdown();

  std::string language_;
  std::string command_;
  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

}  // namespace xltt
