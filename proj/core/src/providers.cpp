#include "xltt/providers.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "xltt/corpus.hpp"

namespace xltt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_word(std::uint64_t seed, const std::string& word, std::uint64_t salt) {
  std::uint64_t h = splitmix64(seed ^ salt);
  for (unsigned char c : word) h = splitmix64(h ^ c);
  return h;
}

bool starts_word(const std::string& tok) {
  if (tok.empty()) return false;
  const unsigned char c = static_cast<unsigned char>(tok.front());
  return std::isalnum(c) || c >= 0x80;
}

}  // namespace

CipherProvider::CipherProvider(std::string language, std::uint64_t seed, bool reverse_words)
    : language_(std::move(language)), seed_(seed), reverse_words_(reverse_words) {}

std::string CipherProvider::cipher_word(const std::string& word) {
  auto it = forward_.find(word);
  if (it != forward_.end()) return it->second;
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::uint64_t h = hash_word(seed_, word, attempt);
    const std::size_t len = 4 + static_cast<std::size_t>(h % 5);
    std::string candidate;
    for (std::size_t i = 0; i < len; ++i) {
      h = splitmix64(h);
      candidate.push_back(static_cast<char>('a' + h % 26));
    }
    if (inverse_.count(candidate) == 0) {
      forward_.emplace(word, candidate);
      inverse_.emplace(candidate, word);
      return candidate;
    }
  }
}

std::string CipherProvider::translate(const std::string& text, const std::string& target) {
  if (target != language_)
    throw ProviderError(name() + " asked for language '" + target + "'");
  std::vector<std::string> out;
  for (const Token& t : tokenize_text(text))
    out.push_back(starts_word(t.text) ? cipher_word(t.text) : t.text);
  if (reverse_words_) std::reverse(out.begin(), out.end());
  std::string joined;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) joined += ' ';
    joined += out[i];
  }
  return joined;
}

std::string CipherProvider::decipher(const std::string& text) const {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    auto it = inverse_.find(tok);
    out.push_back(it == inverse_.end() ? tok : it->second);
  }
  if (reverse_words_) std::reverse(out.begin(), out.end());
  std::string joined;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) joined += ' ';
    joined += out[i];
  }
  return joined;
}

ExternalCommandProvider::ExternalCommandProvider(std::string language, std::string command)
    : language_(std::move(language)), command_(std::move(command)) {}

ExternalCommandProvider::~ExternalCommandProvider() { shutdown(); }

void ExternalCommandProvider::spawn() {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    throw ProviderError("external provider: pipe() failed: " + std::string(strerror(errno)));
  const pid_t pid = fork();
  if (pid < 0)
    throw ProviderError("external provider: fork() failed: " + std::string(strerror(errno)));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  child_pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

void ExternalCommandProvider::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (child_pid_ > 0) {
    int status = 0;
    waitpid(child_pid_, &status, 0);
    child_pid_ = -1;
  }
}

std::string ExternalCommandProvider::translate(const std::string& text,
                                               const std::string& target) {
  if (target != language_)
    throw ProviderError(name() + " asked for language '" + target + "'");
  if (child_pid_ < 0) spawn();

  nlohmann::json req;
  req["text"] = text;
  req["target_language"] = target;
  const std::string line = req.dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n <= 0) {
      shutdown();
      throw ProviderError("external provider '" + command_ + "': child closed stdin");
    }
    written += static_cast<std::size_t>(n);
  }

  std::string reply;
  char c;
  for (;;) {
    const ssize_t n = read(from_child_, &c, 1);
    if (n <= 0) {
      shutdown();
      throw ProviderError("external provider '" + command_ + "': child closed stdout");
    }
    if (c == '\n') break;
    reply.push_back(c);
  }
  try {
    return nlohmann::json::parse(reply).at("text").get<std::string>();
  } catch (const std::exception& e) {
    throw ProviderError("external provider '" + command_ + "': bad reply line: " + reply);
  }
}

}  // namespace xltt
