#ifndef MODCAUSAL_FEATURES_HPP
#define MODCAUSAL_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "modcausal/corpus.hpp"
#include "modcausal/error.hpp"

namespace modcausal {

// ---------------------------------------------------------------------------
// Tokenizer

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; invalid bytes map to U+FFFD.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) { len = 2; cp = b0 & 0x1F; }
  else if ((b0 & 0xF0) == 0xE0) { len = 3; cp = b0 & 0x0F; }
  else if ((b0 & 0xF8) == 0xF0) { len = 4; cp = b0 & 0x07; }
  else { ++i; return 0xFFFD; }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) { ++i; return 0xFFFD; }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
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

// ASCII alphanumerics plus non-ASCII code points outside the punctuation,
// symbol and emoji blocks. Not a full Unicode property table.
inline bool is_word_char(char32_t c) {
  if (c < 0x80) return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  if (c <= 0xBF) return c == 0xAA || c == 0xB5 || c == 0xBA;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false; // punctuation, arrows, math, box drawing
  if (c >= 0x3000 && c <= 0x303F) return false; // CJK punctuation
  if (c >= 0xFE30 && c <= 0xFE4F) return false;
  if (c >= 0xFF00 && c <= 0xFF0F) return false;
  if (c >= 0x1F000 && c <= 0x1FAFF) return false; // emoji and pictographs
  if (c == 0xFFFD || c == 0xFEFF) return false;
  return true;
}

inline char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if ((c >= 0xC0 && c <= 0xDE && c != 0xD7)) return c + 32;
  if (c >= 0x100 && c <= 0x17F) {
    // Latin Extended-A alternates upper/lower, with a shifted run at 0x139..0x148
    // and 0x179..0x17E.
    if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c % 2 == 1) ? c + 1 : c;
    if (c == 0x178) return 0xFF;
    if (c == 0x130 || c == 0x131 || c == 0x138 || c == 0x149 || c == 0x17F) return c;
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32; // Greek
  if (c >= 0x410 && c <= 0x42F) return c + 32;               // Cyrillic
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

inline bool is_apostrophe(char32_t c) { return c == U'\'' || c == 0x2019; }

} // namespace detail

/// Lowercased maximal runs of word characters; an apostrophe between two word
/// characters stays inside the token (normalized to ASCII ').
inline std::vector<std::string> tokenize(std::string_view body) {
  std::vector<char32_t> cps;
  cps.reserve(body.size());
  for (std::size_t i = 0; i < body.size();) cps.push_back(detail::decode_utf8(body, i));

  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (detail::is_word_char(c)) {
      detail::append_utf8(cur, detail::to_lower(c));
    } else if (detail::is_apostrophe(c) && !cur.empty() && i + 1 < cps.size() &&
               detail::is_word_char(cps[i + 1])) {
      cur.push_back('\'');
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// ---------------------------------------------------------------------------
// Lexicons

class Lexicon {
public:
  Lexicon() = default;
  Lexicon(std::string name, std::span<const std::string_view> terms) : name_(std::move(name)) {
    for (auto t : terms) add(std::string(t), 0);
  }
  Lexicon(std::string name, std::initializer_list<std::string_view> terms)
      : Lexicon(std::move(name), std::span<const std::string_view>(terms.begin(), terms.size())) {}

  /// One lowercase term per line; blank lines are skipped.
  static Lexicon load(const std::string& path, std::string name = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lexicon file '" + path + "'");
    Lexicon lx;
    lx.name_ = name.empty() ? path : std::move(name);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
        line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      lx.add(line.substr(first), no);
    }
    if (lx.terms_.empty()) throw ConfigError("lexicon '" + path + "' is empty");
    return lx;
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool contains(const std::string& token) const { return terms_.count(token) > 0; }
  std::vector<std::string> sorted_terms() const {
    std::vector<std::string> v(terms_.begin(), terms_.end());
    std::sort(v.begin(), v.end());
    return v;
  }

private:
  void add(std::string term, std::size_t line) {
    const auto where = line ? " (line " + std::to_string(line) + ")" : std::string();
    if (term.empty()) throw ConfigError("empty lexicon term" + where);
    for (unsigned char ch : term) {
      if (std::isspace(ch)) throw ConfigError("lexicon term '" + term + "' contains whitespace" + where);
      if (ch >= 'A' && ch <= 'Z') throw ConfigError("lexicon term '" + term + "' is not lowercase" + where);
    }
    terms_.insert(std::move(term));
  }

  std::string name_;
  std::unordered_set<std::string> terms_;
};

/// Small permissive swear list; substitute the licensed LIWC category for
/// comparable numbers.
inline const Lexicon& default_swear_lexicon() {
  static const Lexicon lx("default-swear",
                          {"arse", "ass", "asshole", "bastard", "bitch", "bloody", "bollocks",
                           "bullshit", "crap", "damn", "damned", "dick", "dumbass", "fuck",
                           "fucked", "fucking", "goddamn", "hell", "jackass", "piss", "pissed",
                           "shit", "shitty", "wtf"});
  return lx;
}

inline const Lexicon& default_stopwords() {
  static const Lexicon lx(
      "default-stopwords",
      {"a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
       "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
       "by", "can", "could", "did", "do", "does", "doing", "don't", "down", "during", "each",
       "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
       "hers", "herself", "him", "himself", "his", "how", "i", "i'm", "if", "in", "into", "is",
       "it", "it's", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor",
       "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
       "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than",
       "that", "that's", "the", "their", "theirs", "them", "themselves", "then", "there",
       "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very",
       "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
       "will", "with", "would", "you", "your", "yours", "yourself", "yourselves"});
  return lx;
}

// ---------------------------------------------------------------------------
// Features

enum class FeatureKind {
  noncompliance,
  swear_ratio,
  hate_ratio,
  delta_won,
  score,
  inter_comment_time,
  word_count,
  depth,
};

inline constexpr std::array<FeatureKind, 8> kAllFeatures = {
    FeatureKind::noncompliance, FeatureKind::swear_ratio,        FeatureKind::hate_ratio,
    FeatureKind::delta_won,     FeatureKind::score,              FeatureKind::inter_comment_time,
    FeatureKind::word_count,    FeatureKind::depth,
};

inline constexpr std::string_view to_string(FeatureKind k) {
  switch (k) {
  case FeatureKind::noncompliance: return "noncompliance";
  case FeatureKind::swear_ratio: return "swear_ratio";
  case FeatureKind::hate_ratio: return "hate_ratio";
  case FeatureKind::delta_won: return "delta_won";
  case FeatureKind::score: return "score";
  case FeatureKind::inter_comment_time: return "inter_comment_time";
  case FeatureKind::word_count: return "word_count";
  case FeatureKind::depth: return "depth";
  }
  return "";
}

inline std::optional<FeatureKind> parse_feature_kind(std::string_view name) {
  for (auto k : kAllFeatures)
    if (to_string(k) == name) return k;
  return std::nullopt;
}

/// Inter-comment time measures the comment rate itself, so it only makes
/// sense as an index series (ITS), not at the four delayed-feedback slots.
inline constexpr bool its_only(FeatureKind k) { return k == FeatureKind::inter_comment_time; }

struct FeatureValue {
  double value = 0.0;
  bool defined = false;

  static FeatureValue of(double v) { return {v, true}; }
  static FeatureValue undefined() { return {}; }
  friend bool operator==(const FeatureValue&, const FeatureValue&) = default;
};

struct FeatureConfig {
  std::optional<Lexicon> swear;
  std::optional<Lexicon> hate;
  std::optional<Lexicon> stopwords;

  /// Bundled swear and stopword lists; no hate lexicon.
  static FeatureConfig defaults() {
    return {default_swear_lexicon(), std::nullopt, default_stopwords()};
  }
};

inline const Lexicon* required_lexicon(FeatureKind kind, const FeatureConfig& cfg) {
  const std::optional<Lexicon>* lx = nullptr;
  switch (kind) {
  case FeatureKind::swear_ratio: lx = &cfg.swear; break;
  case FeatureKind::hate_ratio: lx = &cfg.hate; break;
  case FeatureKind::word_count: lx = &cfg.stopwords; break;
  default: return nullptr;
  }
  if (!lx->has_value())
    throw ConfigError("feature '" + std::string(to_string(kind)) + "' requires a " +
                      (kind == FeatureKind::word_count ? "stopword" :
                       kind == FeatureKind::swear_ratio ? "swear" : "hate") +
                      " lexicon");
  return &**lx;
}

/// Throws ConfigError if `kind` needs a lexicon that `cfg` lacks.
inline void check_feature_config(FeatureKind kind, const FeatureConfig& cfg) {
  (void)required_lexicon(kind, cfg);
}

inline FeatureValue extract(const Corpus& corpus, std::size_t index, FeatureKind kind,
                            const FeatureConfig& cfg) {
  const Comment& c = corpus.at(index);
  switch (kind) {
  case FeatureKind::noncompliance: return FeatureValue::of(c.removal ? 1.0 : 0.0);
  case FeatureKind::delta_won: return FeatureValue::of(c.delta_from_op ? 1.0 : 0.0);
  case FeatureKind::score: return FeatureValue::of(static_cast<double>(c.score));
  case FeatureKind::depth: return FeatureValue::of(corpus.depth(index));
  case FeatureKind::inter_comment_time: {
    auto pos = corpus.timeline_position(index);
    if (!pos) return FeatureValue::undefined();
    auto tl = corpus.timeline(c.author);
    if (*pos + 1 >= tl.size()) return FeatureValue::undefined();
    return FeatureValue::of(static_cast<double>(corpus.at(tl[*pos + 1]).created_utc - c.created_utc));
  }
  case FeatureKind::swear_ratio:
  case FeatureKind::hate_ratio: {
    const Lexicon& lx = *required_lexicon(kind, cfg);
    const auto tokens = tokenize(c.body);
    if (tokens.empty()) return FeatureValue::undefined();
    const auto hits = std::count_if(tokens.begin(), tokens.end(),
                                    [&](const std::string& t) { return lx.contains(t); });
    return FeatureValue::of(static_cast<double>(hits) / static_cast<double>(tokens.size()));
  }
  case FeatureKind::word_count: {
    const Lexicon& stop = *required_lexicon(kind, cfg);
    const auto tokens = tokenize(c.body);
    const auto kept = std::count_if(tokens.begin(), tokens.end(),
                                    [&](const std::string& t) { return !stop.contains(t); });
    return FeatureValue::of(static_cast<double>(kept));
  }
  }
  return FeatureValue::undefined();
}

inline FeatureValue extract(const Corpus& corpus, std::string_view comment_id, FeatureKind kind,
                            const FeatureConfig& cfg) {
  return extract(corpus, corpus.index_of(comment_id), kind, cfg);
}

// ---------------------------------------------------------------------------
// Per-index aggregation

struct IndexStat {
  int index = 0;
  double mean = 0;
  double se = 0; // sample sd / sqrt(n); 0 when n == 1
  std::size_t n = 0;
};

/// Mean and standard error over the defined values at each index, ascending
/// by index. Indices without any defined value are omitted.
inline std::vector<IndexStat> index_series(std::span<const std::pair<int, FeatureValue>> values) {
  std::map<int, std::vector<double>> by_index;
  for (const auto& [i, v] : values) {
    if (i == 0) throw ShapeError("comment index 0 is not allowed");
    if (v.defined) by_index[i].push_back(v.value);
  }
  std::vector<IndexStat> out;
  out.reserve(by_index.size());
  for (const auto& [i, xs] : by_index) {
    const double n = static_cast<double>(xs.size());
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double se = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    out.push_back({i, mean, se, xs.size()});
  }
  return out;
}

} // namespace modcausal

#endif // MODCAUSAL_FEATURES_HPP
