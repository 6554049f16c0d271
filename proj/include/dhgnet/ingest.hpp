#pragma once

// Typed in-memory forms of the three input formats:
//
//   embeddings   optional header "count dim", then "word v1 ... vdim" per line
//   dictionary   "head<TAB>t1,t2,..." per line
//   corpus       "label<TAB>whitespace tokenized text" per line
//
// All inputs are UTF-8. Tokens are lowercased when they are Latin script.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dhgnet {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Short language tag such as "en" or "th".
class LanguageId {
 public:
  LanguageId() = default;
  explicit LanguageId(std::string code) : code_(std::move(code)) {
    if (code_.empty() || code_.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("language code must be a non-empty token");
    }
  }
  const std::string& code() const { return code_; }
  friend auto operator<=>(const LanguageId&, const LanguageId&) = default;

 private:
  std::string code_;
};

using NodeId = std::size_t;

/// Dense node ids for (language, word) pairs. The same surface form under two
/// languages gets two ids.
class Vocabulary {
 public:
  struct Entry {
    LanguageId language;
    std::string word;
  };

  NodeId add(const LanguageId& lang, std::string_view word) {
    std::string key = make_key(lang, word);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    const NodeId id = entries_.size();
    entries_.push_back({lang, std::string(word)});
    index_.emplace(std::move(key), id);
    return id;
  }

  std::optional<NodeId> find(const LanguageId& lang, std::string_view word) const {
    auto it = index_.find(make_key(lang, word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const LanguageId& lang, std::string_view word) const {
    return find(lang, word).has_value();
  }

  const Entry& entry(NodeId id) const { return entries_.at(id); }
  const LanguageId& language(NodeId id) const { return entries_.at(id).language; }
  const std::string& word(NodeId id) const { return entries_.at(id).word; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t count(const LanguageId& lang) const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.language == lang ? 1 : 0;
    return n;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].language != b.entries_[i].language || a.entries_[i].word != b.entries_[i].word)
        return false;
    }
    return true;
  }

 private:
  static std::string make_key(const LanguageId& lang, std::string_view word) {
    std::string key = lang.code();
    key.push_back('\0');
    key.append(word);
    return key;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, NodeId> index_;
};

/// Word vectors of one language, in file order.
struct EmbeddingTable {
  LanguageId language;
  std::size_t dim = 0;
  std::vector<std::string> words;
  std::vector<double> values;  // words.size() x dim, row-major
  std::unordered_map<std::string, std::size_t> index;
  std::size_t duplicate_rows = 0;

  std::size_t size() const { return words.size(); }

  std::optional<std::span<const double>> find(const std::string& word) const {
    auto it = index.find(word);
    if (it == index.end()) return std::nullopt;
    return std::span<const double>(values.data() + it->second * dim, dim);
  }

  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.language == b.language && a.dim == b.dim && a.words == b.words && a.values == b.values;
  }
};

/// D^{src->dst}: head word to ordered, duplicate-free translations.
struct BilingualDictionary {
  LanguageId src;
  LanguageId dst;
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
  std::size_t duplicate_translations = 0;
  std::size_t dropped_empty = 0;

  std::size_t pair_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.second.size();
    return n;
  }

  const std::vector<std::string>* find(const std::string& head) const {
    for (const auto& e : entries)
      if (e.first == head) return &e.second;
    return nullptr;
  }

  friend bool operator==(const BilingualDictionary& a, const BilingualDictionary& b) {
    return a.src == b.src && a.dst == b.dst && a.entries == b.entries;
  }
};

enum class Split { kTrain, kValid, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

struct Document {
  std::vector<NodeId> tokens;
  std::size_t label = 0;
};

struct LabeledCorpus {
  Split split = Split::kTrain;
  std::vector<Document> documents;
  std::size_t num_classes = 0;
  std::size_t skipped_empty = 0;

  std::size_t size() const { return documents.size(); }
};

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// True when `s` is well-formed UTF-8 (no overlongs, surrogates or values past U+10FFFF).
inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

/// Lowercases ASCII letters and the Latin-1 uppercase block (U+00C0..U+00DE
/// except U+00D7). Other scripts pass through unchanged.
inline std::string normalize_token(std::string_view tok) {
  std::string out;
  out.reserve(tok.size());
  for (std::size_t i = 0; i < tok.size(); ++i) {
    const auto c = static_cast<unsigned char>(tok[i]);
    if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (c == 0xC3 && i + 1 < tok.size()) {
      const auto n = static_cast<unsigned char>(tok[i + 1]);
      out.push_back(static_cast<char>(c));
      out.push_back(static_cast<char>(n >= 0x80 && n <= 0x9E && n != 0x97 ? n + 0x20 : n));
      ++i;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t b = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > b) out.push_back(normalize_token(text.substr(b, i - b)));
  }
  return out;
}

namespace detail {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

/// Parses word-vector text. The first line is a header when it holds exactly
/// two integers; otherwise the dimension comes from the first record.
inline EmbeddingTable parse_embeddings(std::istream& in, const LanguageId& language) {
  EmbeddingTable table;
  table.language = language;
  std::string line;
  std::size_t lineno = 0;
  bool any_line = false;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (!valid_utf8(line)) throw ParseError("invalid UTF-8", lineno);
    std::vector<std::string_view> fields;
    {
      std::string_view sv(line);
      std::size_t i = 0;
      while (i < sv.size()) {
        while (i < sv.size() && (sv[i] == ' ' || sv[i] == '\t')) ++i;
        const std::size_t b = i;
        while (i < sv.size() && sv[i] != ' ' && sv[i] != '\t') ++i;
        if (i > b) fields.push_back(sv.substr(b, i - b));
      }
    }
    if (fields.empty()) continue;
    if (!any_line) {
      any_line = true;
      if (fields.size() == 2) {
        std::size_t count = 0, dim = 0;
        auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), count);
        auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), dim);
        if (r1.ec == std::errc() && r1.ptr == fields[0].data() + fields[0].size() &&
            r2.ec == std::errc() && r2.ptr == fields[1].data() + fields[1].size()) {
          if (dim == 0) throw ParseError("header declares zero dimension", lineno);
          (void)count;
          table.dim = dim;
          continue;
        }
      }
    }
    const std::size_t width = fields.size() - 1;
    if (width == 0) throw ParseError("record has no vector values", lineno);
    if (table.dim == 0) table.dim = width;
    if (width != table.dim) {
      throw ParseError("dimension mismatch: expected " + std::to_string(table.dim) + " values, got " +
                           std::to_string(width),
                       lineno);
    }
    std::vector<double> row(width);
    for (std::size_t k = 0; k < width; ++k) {
      auto v = detail::parse_double(fields[k + 1]);
      if (!v) throw ParseError("malformed number '" + std::string(fields[k + 1]) + "'", lineno);
      if (!std::isfinite(*v)) throw ParseError("non-finite value", lineno);
      row[k] = *v;
    }
    std::string word = normalize_token(fields[0]);
    if (table.index.contains(word)) {
      ++table.duplicate_rows;
      continue;
    }
    table.index.emplace(word, table.words.size());
    table.words.push_back(std::move(word));
    table.values.insert(table.values.end(), row.begin(), row.end());
  }
  if (!any_line) throw ParseError("empty embedding stream", 0);
  return table;
}

inline BilingualDictionary parse_dictionary(std::istream& in, const LanguageId& src,
                                            const LanguageId& dst) {
  if (src == dst) throw std::invalid_argument("dictionary source and target language are equal");
  BilingualDictionary dict;
  dict.src = src;
  dict.dst = dst;
  std::unordered_map<std::string, std::size_t> head_index;
  std::vector<std::unordered_set<std::string>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (!valid_utf8(line)) throw ParseError("invalid UTF-8", lineno);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("missing TAB separator", lineno);
    const auto head_tokens = tokenize(std::string_view(line).substr(0, tab));
    if (head_tokens.size() != 1) throw ParseError("head word must be a single token", lineno);
    const std::string& head = head_tokens.front();

    std::vector<std::string> translations;
    std::string_view rest = std::string_view(line).substr(tab + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const auto piece = rest.substr(pos, comma == std::string_view::npos ? rest.npos : comma - pos);
      for (auto& tok : tokenize(piece)) translations.push_back(std::move(tok));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }

    auto [it, fresh] = head_index.try_emplace(head, dict.entries.size());
    if (fresh) {
      dict.entries.emplace_back(head, std::vector<std::string>{});
      seen.emplace_back();
    }
    auto& target = dict.entries[it->second].second;
    auto& target_seen = seen[it->second];
    for (auto& t : translations) {
      if (target_seen.insert(t).second) {
        target.push_back(std::move(t));
      } else {
        ++dict.duplicate_translations;
      }
    }
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> kept;
  for (auto& e : dict.entries) {
    if (e.second.empty()) {
      ++dict.dropped_empty;
    } else {
      kept.push_back(std::move(e));
    }
  }
  dict.entries = std::move(kept);
  return dict;
}

/// Parses "label<TAB>text" records. Unknown tokens are added to `vocab` under
/// `target`. Documents that tokenize to nothing are skipped and counted.
inline LabeledCorpus parse_corpus(std::istream& in, Vocabulary& vocab, const LanguageId& target,
                                  Split split = Split::kTrain) {
  LabeledCorpus corpus;
  corpus.split = split;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (!valid_utf8(line)) throw ParseError("invalid UTF-8", lineno);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("missing TAB separator", lineno);
    std::string_view label_text = std::string_view(line).substr(0, tab);
    while (!label_text.empty() && label_text.front() == ' ') label_text.remove_prefix(1);
    while (!label_text.empty() && label_text.back() == ' ') label_text.remove_suffix(1);
    std::size_t label = 0;
    auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (label_text.empty() || ec != std::errc() || ptr != label_text.data() + label_text.size()) {
      throw ParseError("label is not a non-negative integer: '" + std::string(label_text) + "'", lineno);
    }
    auto tokens = tokenize(std::string_view(line).substr(tab + 1));
    if (tokens.empty()) {
      ++corpus.skipped_empty;
      continue;
    }
    Document doc;
    doc.label = label;
    doc.tokens.reserve(tokens.size());
    for (const auto& tok : tokens) doc.tokens.push_back(vocab.add(target, tok));
    corpus.num_classes = std::max(corpus.num_classes, label + 1);
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Writers (inverse of the parsers; doubles use round-trip precision)
// ---------------------------------------------------------------------------

inline void write_embeddings(std::ostream& os, const EmbeddingTable& table) {
  os << table.size() << ' ' << table.dim << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << table.words[i];
    for (double v : table.row(i)) os << ' ' << detail::format_double(v);
    os << '\n';
  }
}

inline void write_dictionary(std::ostream& os, const BilingualDictionary& dict) {
  for (const auto& [head, translations] : dict.entries) {
    os << head << '\t';
    for (std::size_t i = 0; i < translations.size(); ++i) os << (i ? "," : "") << translations[i];
    os << '\n';
  }
}

inline void write_corpus(std::ostream& os, const LabeledCorpus& corpus, const Vocabulary& vocab) {
  for (const auto& doc : corpus.documents) {
    os << doc.label << '\t';
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) os << (i ? " " : "") << vocab.word(doc.tokens[i]);
    os << '\n';
  }
}

inline EmbeddingTable parse_embeddings(const std::string& text, const LanguageId& language) {
  std::istringstream is(text);
  return parse_embeddings(is, language);
}

inline BilingualDictionary parse_dictionary(const std::string& text, const LanguageId& src,
                                            const LanguageId& dst) {
  std::istringstream is(text);
  return parse_dictionary(is, src, dst);
}

}  // namespace dhgnet
