#pragma once

// Rule/lexicon based shallow NLP: sentence splitting, tokenization with a
// fixed contraction table, priority-ordered POS tagging and suffix-rule
// lemmatization. Everything here is a pure function of its inputs and an
// immutable Lexicon.

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "xchat/error.hpp"
#include "xchat/util.hpp"

namespace xchat::text {

enum class Pos { PRON, NOUN, PROPN, VERB, AUX, LINK, ADJ, ADV, DET, PREP, PART, CONJ, NUM, PUNCT, OTHER };

inline constexpr std::array<std::string_view, 15> kPosNames = {
    "PRON", "NOUN", "PROPN", "VERB", "AUX", "LINK", "ADJ", "ADV",
    "DET",  "PREP", "PART",  "CONJ", "NUM", "PUNCT", "OTHER"};

inline std::string_view to_string(Pos p) { return kPosNames[static_cast<size_t>(p)]; }

inline std::optional<Pos> parse_pos(std::string_view name) {
  for (size_t i = 0; i < kPosNames.size(); ++i) {
    if (kPosNames[i] == name) return static_cast<Pos>(i);
  }
  return std::nullopt;
}

inline bool is_nominal(Pos p) { return p == Pos::NOUN || p == Pos::PROPN || p == Pos::PRON; }
inline bool is_verbal(Pos p) { return p == Pos::VERB || p == Pos::AUX || p == Pos::LINK; }

struct Token {
  std::string surface;
  std::string lemma;
  Pos pos = Pos::OTHER;
  size_t index = 0;
  // Original characters this token came from (a contraction piece such as
  // "n't" keeps its raw form while the surface is "not").
  std::string raw;
  bool space_after = false;
};

struct Sentence {
  std::string raw;
  std::vector<Token> tokens;
  std::string doc_id;
  size_t sent_id = 0;
};

/// Rebuilds the sentence text from token raw pieces; equals
/// util::normalize_ws(sentence.raw) for any tokenized sentence.
inline std::string reconstruct(const Sentence& s) {
  std::string out;
  for (const auto& t : s.tokens) {
    out += t.raw;
    if (t.space_after) out += ' ';
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

struct SuffixRule {
  std::string suffix;
  Pos pos;
  size_t min_length;  // whole-word length must be at least this
};

class Lexicon {
 public:
  Lexicon() { suffix_rules_ = default_suffix_rules(); }

  /// Loads `closed_class.tsv`, `verbs.tsv` and `irregular_lemmas.tsv` from `dir`.
  static Lexicon load(const std::filesystem::path& dir) {
    Lexicon lex;
    lex.load_tag_file(dir / "closed_class.tsv");
    lex.load_tag_file(dir / "verbs.tsv");
    lex.load_lemma_file(dir / "irregular_lemmas.tsv");
    return lex;
  }

  void load_tag_file(const std::filesystem::path& path) {
    for_each_entry(path, [&](const std::string& a, const std::string& b, size_t line) {
      auto pos = parse_pos(b);
      if (!pos) throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(line) + ": unknown tag " + b);
      add_word(a, *pos);
    });
  }

  void load_lemma_file(const std::filesystem::path& path) {
    for_each_entry(path, [&](const std::string& a, const std::string& b, size_t) { add_irregular(a, b); });
  }

  void add_word(std::string_view word, Pos pos) {
    auto w = util::to_lower(word);
    if (pos == Pos::VERB) {
      verbs_.insert(w);
    } else {
      closed_[w] = pos;
    }
  }

  void add_irregular(std::string_view surface, std::string_view lemma) {
    irregular_[util::to_lower(surface)] = util::to_lower(lemma);
  }

  std::optional<Pos> closed_class(std::string_view word) const {
    auto it = closed_.find(util::to_lower(word));
    if (it == closed_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::string> irregular(std::string_view word) const {
    auto it = irregular_.find(util::to_lower(word));
    if (it == irregular_.end()) return std::nullopt;
    return it->second;
  }

  bool is_verb_stem(std::string_view lower_word) const { return verbs_.count(std::string(lower_word)) > 0; }

  /// True when the word is a listed verb or an inflection of one.
  bool is_verb_form(std::string_view word) const {
    auto w = util::to_lower(word);
    if (verbs_.count(w)) return true;
    if (auto irr = irregular(w); irr && verbs_.count(*irr)) return true;
    for (const auto& cand : inflection_candidates(w)) {
      if (verbs_.count(cand)) return true;
    }
    return false;
  }

  bool is_linking(std::string_view word) const { return closed_class(word) == Pos::LINK; }

  const std::vector<SuffixRule>& suffix_rules() const { return suffix_rules_; }
  void add_suffix_rule(SuffixRule rule) { suffix_rules_.push_back(std::move(rule)); }

  /// Every entry the lexicon knows about (used by property tests).
  std::vector<std::pair<std::string, Pos>> entries() const {
    std::vector<std::pair<std::string, Pos>> out;
    for (const auto& [w, p] : closed_) out.emplace_back(w, p);
    for (const auto& w : verbs_) out.emplace_back(w, Pos::VERB);
    for (const auto& [w, l] : irregular_) out.emplace_back(w, Pos::VERB);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Stems a regular inflection could come from, most specific first.
  static std::vector<std::string> inflection_candidates(const std::string& w) {
    std::vector<std::string> out;
    auto n = w.size();
    auto push_ing_ed = [&](size_t cut) {
      if (n <= cut + 1) return;
      std::string stem = w.substr(0, n - cut);
      out.push_back(stem);
      out.push_back(stem + "e");
      if (stem.size() >= 3 && stem[stem.size() - 1] == stem[stem.size() - 2]) out.push_back(stem.substr(0, stem.size() - 1));
      if (util::ends_with(stem, "i")) out.push_back(stem.substr(0, stem.size() - 1) + "y");
    };
    if (util::ends_with(w, "ing")) push_ing_ed(3);
    if (util::ends_with(w, "ed")) push_ing_ed(2);
    if (util::ends_with(w, "ies") && n > 4) out.push_back(w.substr(0, n - 3) + "y");
    if (util::ends_with(w, "es") && n > 3) out.push_back(w.substr(0, n - 2));
    if (util::ends_with(w, "s") && !util::ends_with(w, "ss") && n > 2) out.push_back(w.substr(0, n - 1));
    return out;
  }

 private:
  template <typename F>
  static void for_each_entry(const std::filesystem::path& path, F&& f) {
    auto content = util::read_file(path);
    size_t line_no = 0;
    for (const auto& raw_line : util::split(content, '\n')) {
      ++line_no;
      auto line = util::trim(raw_line);
      if (line.empty() || line.front() == '#') continue;
      auto cols = util::split(line, '\t');
      if (cols.size() < 2 || util::trim(cols[0]).empty() || util::trim(cols[1]).empty()) {
        throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(line_no));
      }
      f(std::string(util::trim(cols[0])), std::string(util::trim(cols[1])), line_no);
    }
  }

  static std::vector<SuffixRule> default_suffix_rules() {
    return {
        {"ly", Pos::ADV, 4},     {"ing", Pos::VERB, 5},  {"ed", Pos::VERB, 4},   {"ful", Pos::ADJ, 5},
        {"ous", Pos::ADJ, 5},    {"ive", Pos::ADJ, 5},   {"able", Pos::ADJ, 6},  {"ible", Pos::ADJ, 6},
        {"less", Pos::ADJ, 6},   {"ish", Pos::ADJ, 5},
    };
  }

  std::unordered_map<std::string, Pos> closed_;
  std::unordered_set<std::string> verbs_;
  std::unordered_map<std::string, std::string> irregular_;
  std::vector<SuffixRule> suffix_rules_;
};

// ---------------------------------------------------------------------------
// Sentence splitting

inline const std::set<std::string, std::less<>>& abbreviations() {
  static const std::set<std::string, std::less<>> kAbbrev = {
      "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "sr.", "vs.", "etc.", "e.g.", "i.e.", "a.m.", "p.m."};
  return kAbbrev;
}

namespace detail {

inline bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }
inline bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

inline void split_line(std::string_view line, std::vector<std::string>& out) {
  size_t start = 0;
  size_t i = 0;
  while (i < line.size()) {
    if (!is_terminal(line[i])) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < line.size() && is_terminal(line[j])) ++j;
    while (j < line.size() && is_closer(line[j])) ++j;
    bool at_boundary = j == line.size() || util::is_space(line[j]);
    if (at_boundary && line[i] == '.' && j == i + 1) {
      // Abbreviation guard: look at the whitespace-delimited word ending here.
      size_t w = i;
      while (w > start && !util::is_space(line[w - 1])) --w;
      auto word = util::to_lower(line.substr(w, i + 1 - w));
      if (abbreviations().count(word)) at_boundary = false;
    }
    if (at_boundary) {
      auto piece = util::trim(line.substr(start, j - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = j;
    }
    i = j;
  }
  auto rest = util::trim(line.substr(start));
  if (!rest.empty()) out.emplace_back(rest);
}

}  // namespace detail

/// Sentence spans of `text`. Newlines always end a sentence (dialogue turns
/// often carry no terminal punctuation).
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& line : util::split(text, '\n')) detail::split_line(line, out);
  return out;
}

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {

inline bool is_punct_char(unsigned char c) { return c < 0x80 && std::ispunct(c); }


// Decodes the code points of `s`; malformed bytes come back as U+FFFD.
inline std::vector<char32_t> code_points(std::string_view s) {
  std::vector<char32_t> out;
  for (size_t i = 0; i < s.size();) {
    auto b = static_cast<unsigned char>(s[i]);
    size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? b : b & (0xFF >> (len + 1));
    for (size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

// Letters and digits outside ASCII: Latin-1 letters and the main alphabetic
// and ideographic blocks. Symbols, dingbats, emoji and private use are not.
inline bool is_word_code_point(char32_t cp) {
  if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
  if (cp >= 0xC0 && cp <= 0x2AF) return cp != 0xD7 && cp != 0xF7;
  if (cp >= 0x370 && cp <= 0x1FFF) return true;
  if (cp >= 0x3040 && cp <= 0xD7FF) return true;
  if (cp >= 0xF900 && cp <= 0xFDFF) return true;
  if (cp >= 0xFE70 && cp <= 0xFEFF) return true;
  if (cp >= 0xFF10 && cp <= 0xFFDC) return !(cp >= 0xFF1A && cp <= 0xFF20) && !(cp >= 0xFF3B && cp <= 0xFF40) && !(cp >= 0xFF5B && cp <= 0xFF65);
  return cp >= 0x20000 && cp <= 0x3FFFF;
}

inline bool has_alnum(std::string_view s) {
  if (std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; })) {
    return std::any_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
  }
  auto cps = code_points(s);
  return std::any_of(cps.begin(), cps.end(), is_word_code_point);
}

inline bool is_punct_code_point(char32_t cp) {
  if (cp < 0x80) return is_punct_char(static_cast<unsigned char>(cp));
  return (cp >= 0xA1 && cp <= 0xBF) || (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) || (cp >= 0x3001 && cp <= 0x3003) ||
         (cp >= 0x3008 && cp <= 0x3011);
}

inline bool all_punct(std::string_view s) {
  if (s.empty()) return false;
  auto cps = code_points(s);
  return std::all_of(cps.begin(), cps.end(), is_punct_code_point);
}

inline bool is_upper_initial(std::string_view s) { return !s.empty() && s[0] >= 'A' && s[0] <= 'Z'; }

// Leading characters peeled off a word as separate punctuation.
inline bool is_leading_punct(char c) { return c == '"' || c == '(' || c == '[' || c == '{' || c == '\'' || c == '`'; }
// Trailing characters peeled off a word.
inline bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':' || c == '"' || c == ')' || c == ']' ||
         c == '}' || c == '\'';
}

struct Piece {
  std::string surface;
  std::string raw;
};

// Apostrophe suffixes recognised after a host word: raw suffix -> expansion.
inline const std::vector<std::pair<std::string, std::string>>& clitics() {
  static const std::vector<std::pair<std::string, std::string>> kClitics = {
      {"n't", "not"}, {"'m", "am"}, {"'re", "are"}, {"'ve", "have"}, {"'ll", "will"}, {"'d", "would"}, {"'s", "is"}};
  return kClitics;
}

// Hosts whose "'s" is the verb "is" rather than a possessive.
inline bool is_s_host(std::string_view lower) {
  static const std::set<std::string, std::less<>> kHosts = {"that", "it", "he", "she", "what", "there", "here",
                                                            "who", "where", "how", "this", "when", "why"};
  return kHosts.count(lower) > 0;
}

inline std::string match_case(std::string_view like, std::string word) {
  if (is_upper_initial(like) && !word.empty() && word[0] >= 'a' && word[0] <= 'z') word[0] = static_cast<char>(word[0] - 'a' + 'A');
  return word;
}

// Expands a contraction into pieces; returns false when the word is not a
// known contraction (it is then kept whole).
inline bool expand_contraction(const std::string& word, std::vector<Piece>& out) {
  std::string w = word;
  auto lower = util::to_lower(w);
  // Standalone clitic such as "'ve" written with a space before it.
  for (const auto& [suffix, expansion] : clitics()) {
    if (lower == suffix && suffix != "n't") {
      out.push_back({expansion, word});
      return true;
    }
  }
  if (lower == "can't") {
    out.push_back({match_case(w, "can"), w.substr(0, 2)});
    out.push_back({"not", w.substr(2)});
    return true;
  }
  if (lower == "won't") {
    out.push_back({match_case(w, "will"), w.substr(0, 2)});
    out.push_back({"not", w.substr(2)});
    return true;
  }
  for (const auto& [suffix, expansion] : clitics()) {
    if (lower.size() <= suffix.size() || !util::ends_with(lower, suffix)) continue;
    auto host = w.substr(0, w.size() - suffix.size());
    if (!has_alnum(host) || host.find('\'') != std::string::npos) return false;
    if (suffix == "'s" && !is_s_host(util::to_lower(host))) return false;
    out.push_back({host, host});
    out.push_back({expansion, w.substr(w.size() - suffix.size())});
    return true;
  }
  return false;
}

struct RawToken {
  std::string surface;
  std::string raw;
  bool space_after = false;
};

inline std::vector<RawToken> tokenize_detailed(std::string_view sentence) {
  std::vector<RawToken> out;
  auto words = util::split(util::normalize_ws(sentence), ' ');
  for (size_t wi = 0; wi < words.size(); ++wi) {
    const auto& chunk = words[wi];
    if (chunk.empty()) continue;
    std::vector<Piece> pieces;
    size_t b = 0;
    size_t e = chunk.size();
    auto lower_chunk = util::to_lower(chunk);
    bool is_abbrev = abbreviations().count(lower_chunk) > 0;
    bool is_clitic = false;
    for (const auto& [suffix, _] : clitics()) {
      if (util::starts_with(lower_chunk, suffix)) is_clitic = true;
    }
    // leading punctuation
    std::vector<Piece> lead;
    if (!is_clitic) {
      while (b < e && is_leading_punct(chunk[b]) && has_alnum(std::string_view(chunk).substr(b + 1))) {
        lead.push_back({std::string(1, chunk[b]), std::string(1, chunk[b])});
        ++b;
      }
    }
    // trailing punctuation run kept as one token
    size_t te = e;
    if (!is_abbrev) {
      while (te > b && is_trailing_punct(chunk[te - 1])) {
        // keep the apostrophe of a clitic such as "'s" attached
        --te;
      }
      if (te == b) te = e;  // chunk is all punctuation: one token
    }
    std::string core = chunk.substr(b, te - b);
    std::string trail = chunk.substr(te, e - te);
    pieces = std::move(lead);
    std::vector<Piece> expanded;
    if (!core.empty() && expand_contraction(core, expanded)) {
      for (auto& p : expanded) pieces.push_back(std::move(p));
    } else if (!core.empty()) {
      pieces.push_back({core, core});
    }
    if (!trail.empty()) pieces.push_back({trail, trail});
    for (size_t k = 0; k < pieces.size(); ++k) {
      bool last = k + 1 == pieces.size();
      out.push_back({pieces[k].surface, pieces[k].raw, last && wi + 1 < words.size()});
    }
  }
  return out;
}

}  // namespace detail

/// Surface tokens of one sentence.
inline std::vector<std::string> tokenize(std::string_view sentence_raw) {
  std::vector<std::string> out;
  for (auto& t : detail::tokenize_detailed(sentence_raw)) out.push_back(std::move(t.surface));
  return out;
}

// ---------------------------------------------------------------------------
// Lemmatization

namespace detail {

inline bool has_vowel(std::string_view s) {
  return s.find_first_of("aeiouy") != std::string_view::npos;
}

inline bool is_consonant(char c) { return c >= 'a' && c <= 'z' && std::string_view("aeiou").find(c) == std::string_view::npos; }

inline std::string strip_verb_suffix(const std::string& w, size_t cut, const Lexicon& lex) {
  std::string stem = w.substr(0, w.size() - cut);
  if (stem.size() < 2 || !has_vowel(stem)) return w;
  if (lex.is_verb_stem(stem)) return stem;
  if (lex.is_verb_stem(stem + "e")) return stem + "e";
  if (stem.size() >= 3 && stem.back() == stem[stem.size() - 2] && is_consonant(stem.back())) {
    auto undoubled = stem.substr(0, stem.size() - 1);
    if (lex.is_verb_stem(undoubled)) return undoubled;
  }
  if (util::ends_with(stem, "i") && lex.is_verb_stem(stem.substr(0, stem.size() - 1) + "y")) {
    return stem.substr(0, stem.size() - 1) + "y";
  }
  // Unknown verb: heuristic only for longer stems, never for -eed words.
  if (stem.size() < 4 || util::ends_with(w, "eed")) return w;
  if (stem.size() >= 3 && stem.back() == stem[stem.size() - 2] && is_consonant(stem.back()) && stem.back() != 'l' &&
      stem.back() != 's' && stem.back() != 'z') {
    return stem.substr(0, stem.size() - 1);
  }
  return stem;
}

inline std::string strip_plural(const std::string& w) {
  auto n = w.size();
  if (n <= 3) return w;
  if (util::ends_with(w, "ies") && n > 4) return w.substr(0, n - 3) + "y";
  for (std::string_view es : {"sses", "xes", "zzes", "ches", "shes", "oes"}) {
    if (util::ends_with(w, es)) return w.substr(0, n - 2);
  }
  if (util::ends_with(w, "ss") || util::ends_with(w, "us") || util::ends_with(w, "is")) return w;
  if (util::ends_with(w, "s")) return w.substr(0, n - 1);
  return w;
}

inline std::string lemmatize_once(const std::string& w, Pos pos, const Lexicon& lex) {
  if (auto irr = lex.irregular(w)) return *irr;
  switch (pos) {
    case Pos::NOUN:
      return strip_plural(w);
    case Pos::VERB:
    case Pos::LINK:
    case Pos::AUX: {
      if (util::ends_with(w, "ing") && w.size() > 4) return strip_verb_suffix(w, 3, lex);
      if (util::ends_with(w, "ied") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
      if (util::ends_with(w, "ed") && w.size() > 3) return strip_verb_suffix(w, 2, lex);
      if (util::ends_with(w, "s") && w.size() > 2) {
        auto n = w.size();
        if (util::ends_with(w, "ies") && n > 4) return w.substr(0, n - 3) + "y";
        if (lex.is_verb_stem(w.substr(0, n - 1))) return w.substr(0, n - 1);
        if (util::ends_with(w, "es") && lex.is_verb_stem(w.substr(0, n - 2))) return w.substr(0, n - 2);
        return strip_plural(w);
      }
      return w;
    }
    default:
      return w;
  }
}

}  // namespace detail

/// Canonical lowercase form. Irregular table first, then POS-specific suffix
/// stripping; iterated to a fixed point so the result is idempotent.
inline std::string lemmatize(std::string_view surface, Pos pos, const Lexicon& lex) {
  std::string w = util::to_lower(surface);
  if (pos == Pos::PROPN || pos == Pos::PUNCT || pos == Pos::NUM) return w;
  for (int i = 0; i < 8; ++i) {
    auto next = detail::lemmatize_once(w, pos, lex);
    if (next == w || next.empty()) break;
    w = std::move(next);
  }
  return w;
}

// ---------------------------------------------------------------------------
// POS tagging

namespace detail {

struct InitialTag {
  Pos pos;
  bool from_verb_lexicon = false;
};

inline InitialTag initial_tag(const std::string& surface, size_t index, const Lexicon& lex) {
  if (all_punct(surface)) return {Pos::PUNCT};
  if (!has_alnum(surface)) throw Error(ErrorCode::UnknownCharacterClass, "token '" + surface + "'");
  auto lower = util::to_lower(surface);
  if (auto closed = lex.closed_class(lower)) return {*closed};
  if (std::all_of(lower.begin(), lower.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == ','; })) {
    return {Pos::NUM};
  }
  if (lex.is_verb_form(lower)) return {Pos::VERB, true};
  auto hyphen = lower.find('-');
  if (hyphen != std::string::npos && hyphen > 0 && hyphen + 1 < lower.size()) return {Pos::ADJ};
  for (const auto& rule : lex.suffix_rules()) {
    if (lower.size() >= rule.min_length && util::ends_with(lower, rule.suffix)) {
      // A sentence-initial -ing/-ed word is read as a nominal (gerund subject).
      if (rule.pos == Pos::VERB && index == 0) return {Pos::NOUN};
      return {rule.pos};
    }
  }
  if (index > 0 && is_upper_initial(surface)) return {Pos::PROPN};
  return {Pos::NOUN};
}

inline bool is_demonstrative(std::string_view lower) {
  return lower == "that" || lower == "this" || lower == "these" || lower == "those";
}

}  // namespace detail

/// Tags surfaces by priority: closed class, verb lexicon, suffix rules,
/// capitalisation, default NOUN; then a context pass resolves verb/noun
/// ambiguity after determiners, "to" as particle vs preposition, and
/// demonstrative/possessive pronouns used as determiners.
inline std::vector<Token> pos_tag(const std::vector<std::string>& surfaces, const Lexicon& lex) {
  std::vector<Token> out(surfaces.size());
  std::vector<detail::InitialTag> tags;
  tags.reserve(surfaces.size());
  for (size_t i = 0; i < surfaces.size(); ++i) tags.push_back(detail::initial_tag(surfaces[i], i, lex));

  for (size_t i = 1; i < tags.size(); ++i) {
    if (tags[i].pos != Pos::VERB) continue;
    auto prev = tags[i - 1].pos;
    if (prev == Pos::DET || prev == Pos::ADJ || prev == Pos::PREP || prev == Pos::NUM) tags[i].pos = Pos::NOUN;
  }
  for (size_t i = 0; i < tags.size(); ++i) {
    auto lower = util::to_lower(surfaces[i]);
    Pos next = i + 1 < tags.size() ? tags[i + 1].pos : Pos::PUNCT;
    if (lower == "to" && tags[i].pos == Pos::PART) {
      if (!is_verbal(next)) tags[i].pos = Pos::PREP;
    } else if (tags[i].pos == Pos::PRON && (detail::is_demonstrative(lower) || lower == "her")) {
      if (next == Pos::NOUN || next == Pos::ADJ || next == Pos::PROPN || next == Pos::NUM) tags[i].pos = Pos::DET;
    }
  }
  for (size_t i = 0; i < surfaces.size(); ++i) {
    out[i].surface = surfaces[i];
    out[i].pos = tags[i].pos;
    out[i].index = i;
    out[i].lemma = lemmatize(surfaces[i], tags[i].pos, lex);
    out[i].raw = surfaces[i];
  }
  return out;
}

/// Tagged lemmas of a short phrase such as a triple slot. Closed-class words
/// keep their lexicon tag; every other word is read as `open_pos`, since a
/// slot has no sentence context for the tagger to use. Punctuation is dropped.
inline std::vector<std::pair<std::string, Pos>> phrase_lemmas(std::string_view phrase, Pos open_pos, const Lexicon& lex) {
  std::vector<std::pair<std::string, Pos>> out;
  for (const auto& surface : tokenize(phrase)) {
    if (detail::all_punct(surface) || !detail::has_alnum(surface)) continue;
    auto pos = lex.closed_class(util::to_lower(surface)).value_or(open_pos);
    out.emplace_back(lemmatize(surface, pos, lex), pos);
  }
  return out;
}

/// Full pipeline for one sentence span.
inline Sentence analyze_sentence(std::string_view raw, const Lexicon& lex, std::string doc_id = {}, size_t sent_id = 0) {
  Sentence s;
  s.raw = std::string(util::trim(raw));
  s.doc_id = std::move(doc_id);
  s.sent_id = sent_id;
  auto raw_tokens = detail::tokenize_detailed(s.raw);
  std::vector<std::string> surfaces;
  surfaces.reserve(raw_tokens.size());
  for (const auto& t : raw_tokens) surfaces.push_back(t.surface);
  s.tokens = pos_tag(surfaces, lex);
  for (size_t i = 0; i < raw_tokens.size(); ++i) {
    s.tokens[i].raw = raw_tokens[i].raw;
    s.tokens[i].space_after = raw_tokens[i].space_after;
  }
  return s;
}

/// Splits and analyzes a whole text; sent_ids continue from `first_sent_id`.
inline std::vector<Sentence> analyze_text(std::string_view text, const Lexicon& lex, const std::string& doc_id = {},
                                          size_t first_sent_id = 0) {
  std::vector<Sentence> out;
  for (const auto& span : split_sentences(text)) out.push_back(analyze_sentence(span, lex, doc_id, first_sent_id + out.size()));
  return out;
}

}  // namespace xchat::text
