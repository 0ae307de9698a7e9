// textnorm.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// \file
// Transcript normalization and the character vocabulary used by the CTC head.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "indoasr/error.hpp"

namespace indoasr::textnorm {

inline constexpr std::string_view kDelimiterToken = "|";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kPadToken = "[PAD]";

// Lowercase a-z words separated by single spaces, no outer spaces.
class NormalizedText {
 public:
  NormalizedText() = default;

  // Wraps text that is already known to satisfy the invariant.
  static NormalizedText assume_normalized(std::string text) {
    NormalizedText t;
    t.text_ = std::move(text);
    return t;
  }

  const std::string& str() const { return text_; }
  bool empty() const { return text_.empty(); }
  std::size_t size() const { return text_.size(); }

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text_.size()) {
      std::size_t end = text_.find(' ', start);
      if (end == std::string::npos) end = text_.size();
      out.emplace_back(text_.substr(start, end - start));
      start = end + 1;
    }
    return out;
  }

  friend bool operator==(const NormalizedText&, const NormalizedText&) = default;
  friend auto operator<=>(const NormalizedText&, const NormalizedText&) = default;

 private:
  std::string text_;
};

struct NormalizeStats {
  std::size_t digits_removed = 0;
  std::size_t other_removed = 0;  // punctuation, symbols, non-ASCII bytes
};

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

// Lowercases, deletes every character outside a-z and whitespace (no space is
// inserted in its place), then collapses whitespace runs to a single space.
// Multi-byte UTF-8 sequences consist of bytes >= 0x80 and are deleted whole.
inline NormalizedText normalize(std::string_view raw, NormalizeStats* stats = nullptr) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if (c >= 'a' && c <= 'z') {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c));
    } else if (is_space(static_cast<char>(c))) {
      pending_space = true;
    } else if (stats) {
      if (c >= '0' && c <= '9')
        ++stats->digits_removed;
      else
        ++stats->other_removed;
    }
  }
  return NormalizedText::assume_normalized(std::move(out));
}

inline bool is_normalized(std::string_view s) {
  if (s.empty()) return true;
  if (s.front() == ' ' || s.back() == ' ') return false;
  char prev = 'a';
  for (char c : s) {
    if (c == ' ') {
      if (prev == ' ') return false;
    } else if (c < 'a' || c > 'z') {
      return false;
    }
    prev = c;
  }
  return true;
}

// Ordered token table. Ids are positions in tokens().
class Vocabulary {
 public:
  Vocabulary() = default;

  // Validates uniqueness and the presence of the three special tokens.
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const std::string& t = tokens_[i];
      if (t.empty()) throw ParseError("empty token", i + 1);
      if (t == " ") throw ParseError("literal space token is not allowed", i + 1);
      if (!index_.emplace(t, static_cast<int>(i)).second)
        throw ParseError("duplicate token \"" + t + "\"", i + 1);
    }
    delimiter_id_ = require(kDelimiterToken);
    unk_id_ = require(kUnkToken);
    blank_id_ = require(kPadToken);
  }

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int delimiter_id() const { return delimiter_id_; }
  int unk_id() const { return unk_id_; }
  int blank_id() const { return blank_id_; }

  // -1 when absent.
  int find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? -1 : it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  int require(std::string_view token) const {
    int id = find(token);
    if (id < 0) throw ParseError("vocabulary lacks \"" + std::string(token) + "\"", 0);
    return id;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int delimiter_id_ = -1;
  int unk_id_ = -1;
  int blank_id_ = -1;
};

// Distinct characters (space as "|") sorted by code, then [UNK] and [PAD].
inline Vocabulary build_vocab(std::span<const NormalizedText> transcripts) {
  std::set<unsigned char> chars;
  for (const auto& t : transcripts)
    for (char c : t.str()) chars.insert(static_cast<unsigned char>(c == ' ' ? '|' : c));
  if (chars.empty()) throw EmptyCorpus("no characters in any transcript");
  chars.insert('|');
  std::vector<std::string> tokens;
  tokens.reserve(chars.size() + 2);
  for (unsigned char c : chars) tokens.emplace_back(1, static_cast<char>(c));
  tokens.emplace_back(kUnkToken);
  tokens.emplace_back(kPadToken);
  return Vocabulary(std::move(tokens));
}

inline std::vector<int> encode(const NormalizedText& text, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text.str()) {
    if (c == ' ') {
      ids.push_back(vocab.delimiter_id());
      continue;
    }
    int id = vocab.find(std::string_view(&c, 1));
    ids.push_back(id < 0 ? vocab.unk_id() : id);
  }
  return ids;
}

// Inverse of encode for in-vocabulary text. Blank ids are skipped; other
// special tokens are emitted verbatim.
inline std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (id == vocab.blank_id()) continue;
    if (id == vocab.delimiter_id())
      out.push_back(' ');
    else
      out += vocab.token(id);
  }
  return out;
}

// Label sequence to transcript: "|" becomes a space, tokens that are not a
// single a-z character are dropped, and the result is renormalized.
inline NormalizedText labels_to_text(std::span<const int> ids, const Vocabulary& vocab) {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id == vocab.delimiter_id()) {
      out.push_back(' ');
      continue;
    }
    const std::string& tok = vocab.token(id);
    if (tok.size() == 1 && tok[0] >= 'a' && tok[0] <= 'z') out.push_back(tok[0]);
  }
  return normalize(out);
}

// One token per line, line number is the id. LF endings.
inline void write_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& t : vocab.tokens()) out << t << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline Vocabulary read_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  // A trailing empty line is tolerated; empty tokens elsewhere are rejected.
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return Vocabulary(std::move(tokens));
}

}  // namespace indoasr::textnorm
