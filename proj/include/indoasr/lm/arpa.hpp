// arpa.hpp
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
// ARPA text format: \data\ header with "ngram N=count" lines, one
// "\N-grams:" section per order with "logprob<TAB>words[<TAB>backoff]"
// lines, then \end\.

#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "indoasr/error.hpp"
#include "indoasr/lm/model.hpp"

namespace indoasr::lm {

// Shortest decimal that reads back to the same float.
inline std::string format_float(float v) {
  if (v == 0.0f) return "0";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_arpa(const NGramModel& model, std::ostream& out) {
  out << "\n\\data\\\n";
  for (int n = 1; n <= model.order(); ++n)
    out << "ngram " << n << '=' << model.table(n).size() << '\n';
  for (int n = 1; n <= model.order(); ++n) {
    const auto& t = model.table(n);
    out << "\n\\" << n << "-grams:\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << format_float(t.prob(i)) << '\t';
      auto key = t.key(i);
      for (std::size_t j = 0; j < key.size(); ++j) {
        if (j) out << ' ';
        out << model.words().word(key[j]);
      }
      if (n < model.order() && t.backoff(i) != 0.0f) out << '\t' << format_float(t.backoff(i));
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

inline void emit_arpa(const NGramModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_arpa(model, out);
  if (!out) throw IoError("write failed: " + path);
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline float parse_float(std::string_view s, std::size_t line) {
  float v = 0.0f;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("bad number \"" + std::string(s) + "\"", line);
  return v;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace detail

// Word ids follow the order of the 1-gram section.
inline NGramModel read_arpa(std::istream& in) {
  std::string raw;
  std::size_t lineno = 0;
  auto next = [&](std::string_view& line) -> bool {
    if (!std::getline(in, raw)) return false;
    ++lineno;
    line = detail::trim(raw);
    return true;
  };

  std::string_view line;
  bool found = false;
  while (next(line))
    if (line == "\\data\\") {
      found = true;
      break;
    }
  if (!found) throw ParseError("missing \\data\\ header", lineno);

  std::vector<std::size_t> declared;
  while (next(line)) {
    if (line.empty()) {
      if (!declared.empty()) break;
      continue;
    }
    if (line.substr(0, 6) != "ngram ") {
      if (line.front() == '\\') break;
      throw ParseError("expected \"ngram N=count\"", lineno);
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected \"ngram N=count\"", lineno);
    int n = 0;
    std::size_t count = 0;
    auto a = detail::trim(line.substr(6, eq - 6));
    auto b = detail::trim(line.substr(eq + 1));
    if (std::from_chars(a.data(), a.data() + a.size(), n).ec != std::errc() ||
        std::from_chars(b.data(), b.data() + b.size(), count).ec != std::errc())
      throw ParseError("bad ngram count line", lineno);
    if (n != static_cast<int>(declared.size()) + 1)
      throw ParseError("ngram orders must be listed 1..N", lineno);
    declared.push_back(count);
  }
  if (declared.empty()) throw ParseError("\\data\\ declares no orders", lineno);
  const int order = static_cast<int>(declared.size());

  WordTable words;
  std::vector<OrderTable> tables;
  bool have_line = !line.empty() && line.front() == '\\';
  for (int n = 1; n <= order; ++n) {
    if (!have_line) {
      while (next(line) && line.empty()) {
      }
    }
    have_line = false;
    const std::string header = "\\" + std::to_string(n) + "-grams:";
    if (line != header) throw ParseError("expected " + header, lineno);

    std::map<NGram, std::pair<float, float>> entries;
    std::size_t found_entries = 0;
    while (next(line)) {
      if (line.empty()) continue;
      if (line.front() == '\\') {
        have_line = true;
        break;
      }
      auto fields = detail::split_ws(line);
      const auto un = static_cast<std::size_t>(n);
      float backoff = 0.0f;
      if (fields.size() == un + 2) {
        if (n == order) throw ParseError("backoff weight at the highest order", lineno);
        backoff = detail::parse_float(fields.back(), lineno);
      } else if (fields.size() != un + 1) {
        throw ParseError("expected " + std::to_string(n) + " words", lineno);
      }
      const float prob = detail::parse_float(fields[0], lineno);
      NGram key;
      for (std::size_t j = 1; j <= un; ++j) {
        if (n == 1) {
          if (words.find(fields[j])) throw ParseError("duplicate unigram", lineno);
          key.push_back(words.add(fields[j]));
        } else {
          auto id = words.find(fields[j]);
          if (!id) throw ParseError("word \"" + std::string(fields[j]) + "\" has no unigram", lineno);
          key.push_back(*id);
        }
      }
      if (!entries.emplace(std::move(key), std::make_pair(prob, backoff)).second)
        throw ParseError("duplicate n-gram", lineno);
      ++found_entries;
    }
    if (found_entries != declared[static_cast<std::size_t>(n - 1)])
      throw CountMismatch(n, declared[static_cast<std::size_t>(n - 1)], found_entries);
    OrderTable t(n);
    for (const auto& [k, v] : entries) t.append(k, v.first, v.second);
    tables.push_back(std::move(t));
  }
  if (!have_line) {
    while (next(line) && line.empty()) {
    }
  }
  if (line != "\\end\\") throw ParseError("expected \\end\\", lineno);
  return NGramModel(std::move(words), std::move(tables));
}

inline NGramModel parse_arpa(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_arpa(in);
}

}  // namespace indoasr::lm
