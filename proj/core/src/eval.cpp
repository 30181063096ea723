#include "xltt/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace xltt {

namespace {

// Unicode code points of general category P*, by block; ASCII handled via
// ispunct (which also covers the symbol characters the official SQuAD
// normalizer strips).
bool is_punct_cp(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  switch (cp) {
    case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6:
    case 0x00B7: case 0x00BB: case 0x00BF:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) ||  // dashes, quotes, daggers
         (cp >= 0x2030 && cp <= 0x205E) ||  // per-mille .. general punctuation
         (cp >= 0x2E00 && cp <= 0x2E7F) ||  // supplemental punctuation
         (cp >= 0x3001 && cp <= 0x303F) ||  // CJK symbols and punctuation
         (cp >= 0xFE30 && cp <= 0xFE4F) ||  // CJK compatibility forms
         (cp >= 0xFE50 && cp <= 0xFE6F) ||  // small form variants
         (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65);
}

bool is_space_cp(char32_t cp) {
  if (cp < 0x80) return std::isspace(static_cast<int>(cp)) != 0;
  return cp == 0x00A0 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
         cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

// Decodes one UTF-8 code point at i; malformed bytes pass through as-is.
char32_t decode_utf8(const std::string& s, std::size_t& i) {
  const unsigned char c = static_cast<unsigned char>(s[i]);
  std::size_t extra = 0;
  char32_t cp = c;
  if (c >= 0xF0) { extra = 3; cp = c & 0x07; }
  else if (c >= 0xE0) { extra = 2; cp = c & 0x0F; }
  else if (c >= 0xC0) { extra = 1; cp = c & 0x1F; }
  if (i + extra >= s.size()) { ++i; return c; }
  for (std::size_t k = 1; k <= extra; ++k) {
    const unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xC0) != 0x80) { ++i; return c; }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += extra + 1;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::string normalize_answer(const std::string& text) {
  std::string stripped;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = decode_utf8(text, i);
    if (is_punct_cp(cp)) continue;
    if (is_space_cp(cp)) {
      stripped.push_back(' ');
      continue;
    }
    if (cp < 0x80)
      stripped.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    else
      append_utf8(stripped, cp);
  }

  std::string out;
  for (const std::string& tok : split_ws(stripped)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

int em(const std::string& pred, const std::string& gold) {
  return normalize_answer(pred) == normalize_answer(gold) ? 1 : 0;
}

double f1(const std::string& pred, const std::string& gold) {
  const auto ptoks = split_ws(normalize_answer(pred));
  const auto gtoks = split_ws(normalize_answer(gold));
  if (ptoks.empty() && gtoks.empty()) return 1.0;
  if (ptoks.empty() || gtoks.empty()) return 0.0;

  std::map<std::string, std::size_t> pcounts;
  for (const auto& t : ptoks) ++pcounts[t];
  std::size_t overlap = 0;
  for (const auto& t : gtoks) {
    auto it = pcounts.find(t);
    if (it != pcounts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(ptoks.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(gtoks.size());
  return 2.0 * precision * recall / (precision + recall);
}

EvalReport evaluate(const std::map<std::string, std::string>& predictions,
                    const std::map<std::string, GoldEntry>& gold) {
  for (const auto& [id, pred] : predictions) {
    (void)pred;
    if (gold.find(id) == gold.end())
      throw EvalError("prediction id '" + id + "' not present in gold");
  }

  struct Accum {
    double em_sum = 0, f1_sum = 0;
    std::size_t count = 0;
  };
  std::map<std::string, Accum> acc;
  EvalReport report;
  for (const auto& [id, entry] : gold) {
    auto pit = predictions.find(id);
    double best_em = 0.0, best_f1 = 0.0;
    if (pit == predictions.end()) {
      ++report.missing_predictions;
    } else {
      for (const std::string& alt : entry.answers) {
        best_em = std::max(best_em, static_cast<double>(em(pit->second, alt)));
        best_f1 = std::max(best_f1, f1(pit->second, alt));
      }
    }
    Accum& a = acc[entry.language];
    a.em_sum += best_em;
    a.f1_sum += best_f1;
    ++a.count;
    ++report.scored;
  }

  double macro_em = 0, macro_f1 = 0;
  for (const auto& [lang, a] : acc) {
    LanguageScore s;
    s.count = a.count;
    s.em = 100.0 * a.em_sum / static_cast<double>(a.count);
    s.f1 = 100.0 * a.f1_sum / static_cast<double>(a.count);
    report.per_language[lang] = s;
    macro_em += s.em;
    macro_f1 += s.f1;
  }
  if (!acc.empty()) {
    report.macro_em = macro_em / static_cast<double>(acc.size());
    report.macro_f1 = macro_f1 / static_cast<double>(acc.size());
  }
  return report;
}

std::map<std::string, GoldEntry> load_gold_squad(const std::string& path,
                                                 const std::string& language) {
  std::ifstream is(path);
  if (!is) throw EvalError("cannot read gold file: " + path);
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const std::exception& e) {
    throw EvalError("gold file " + path + " is not valid JSON: " + e.what());
  }
  std::map<std::string, GoldEntry> gold;
  for (const auto& article : doc.at("data"))
    for (const auto& paragraph : article.at("paragraphs"))
      for (const auto& qa : paragraph.at("qas")) {
        GoldEntry entry;
        entry.language = language;
        for (const auto& ans : qa.at("answers"))
          entry.answers.push_back(ans.at("text").get<std::string>());
        gold[qa.at("id").get<std::string>()] = std::move(entry);
      }
  return gold;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["per_language"] = nlohmann::ordered_json::object();
  for (const auto& [lang, s] : report.per_language)
    j["per_language"][lang] = {{"em", s.em}, {"f1", s.f1}, {"count", s.count}};
  j["macro"] = {{"em", report.macro_em}, {"f1", report.macro_f1}};
  j["scored"] = report.scored;
  j["missing_predictions"] = report.missing_predictions;
  j["not_zero_shot"] = report.not_zero_shot;
  return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "language" << std::right << std::setw(10) << "EM"
     << std::setw(10) << "F1" << std::setw(10) << "count" << "\n";
  os << std::string(46, '-') << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& [lang, s] : report.per_language)
    os << std::left << std::setw(16) << lang << std::right << std::setw(10) << s.em
       << std::setw(10) << s.f1 << std::setw(10) << s.count << "\n";
  os << std::string(46, '-') << "\n";
  os << std::left << std::setw(16) << "macro" << std::right << std::setw(10)
     << report.macro_em << std::setw(10) << report.macro_f1 << std::setw(10)
     << report.scored << "\n";
  if (report.not_zero_shot) os << "flag: not zero-shot (sanity mode)\n";
  return os.str();
}

}  // namespace xltt
