// metrics.hpp
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
// Word and character error rates, and WER grids rendered as CSV or aligned
// text.

#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "indoasr/error.hpp"
#include "indoasr/textnorm.hpp"

namespace indoasr::metrics {

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  EditCounts& operator+=(const EditCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    return *this;
  }
  bool operator==(const EditCounts&) const = default;
};

// Levenshtein alignment with unit costs. Among minimal alignments the
// backtrace prefers substitution/match, then deletion, then insertion.
template <typename T>
EditCounts edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});

  EditCounts out;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++out.substitutions;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  return out;
}

inline EditCounts word_edit_distance(const std::vector<std::string>& ref,
                                     const std::vector<std::string>& hyp) {
  if (ref.empty()) throw EmptyReference("");
  return edit_distance(std::span<const std::string>(ref), std::span<const std::string>(hyp));
}

struct ScoredPair {
  std::string id;
  std::string reference;
  std::string hypothesis;
};

struct UtteranceScore {
  std::string id;
  EditCounts counts;
  std::size_t reference_length = 0;

  double error_rate() const { return double(counts.errors()) / double(reference_length); }
};

struct WerReport {
  EditCounts counts;
  std::size_t reference_length = 0;  // N, words (or characters for CER)
  double wer = 0.0;                  // pooled (S + D + I) / N
  std::vector<UtteranceScore> utterances;
};

namespace detail {

inline std::vector<std::string> chars_of(const std::string& s) {
  std::vector<std::string> out;
  for (char c : s) out.emplace_back(1, c);
  return out;
}

template <typename Split>
WerReport pooled(std::span<const ScoredPair> pairs, Split split) {
  if (pairs.empty()) throw EmptyInput("no utterance pairs to score");
  WerReport report;
  for (const auto& p : pairs) {
    const auto ref = split(textnorm::normalize(p.reference));
    const auto hyp = split(textnorm::normalize(p.hypothesis));
    if (ref.empty()) throw EmptyReference(p.id);
    UtteranceScore u{p.id,
                     edit_distance(std::span<const std::string>(ref), std::span<const std::string>(hyp)),
                     ref.size()};
    report.counts += u.counts;
    report.reference_length += u.reference_length;
    report.utterances.push_back(std::move(u));
  }
  report.wer = double(report.counts.errors()) / double(report.reference_length);
  return report;
}

}  // namespace detail

// Both sides are normalized before scoring. Counts are summed over
// utterances and the rate is taken on the totals.
inline WerReport corpus_wer(std::span<const ScoredPair> pairs) {
  return detail::pooled(pairs, [](const textnorm::NormalizedText& t) { return t.words(); });
}

// Same pooling over characters; spaces count as characters.
inline WerReport corpus_cer(std::span<const ScoredPair> pairs) {
  return detail::pooled(pairs, [](const textnorm::NormalizedText& t) { return detail::chars_of(t.str()); });
}

// ---------------------------------------------------------------------------
// Grids

inline constexpr std::string_view kMissingCell = "\xe2\x80\x93";  // en dash
inline constexpr std::string_view kAverageColumn = "AVG WER";

// 0.20306 -> "20.306%"
inline std::string format_percent(double rate) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f%%", rate * 100.0);
  return buf;
}

// Rows are configurations, columns test sets, both in first-seen order.
class WerGrid {
 public:
  void add_row(const std::string& name) { add_unique(rows_, name); }
  void add_column(const std::string& name) { add_unique(columns_, name); }

  void set(const std::string& row, const std::string& column, double wer) {
    add_row(row);
    add_column(column);
    cells_[{row, column}] = wer;
  }

  const std::vector<std::string>& rows() const { return rows_; }
  const std::vector<std::string>& columns() const { return columns_; }

  std::optional<double> cell(const std::string& row, const std::string& column) const {
    if (auto it = cells_.find({row, column}); it != cells_.end()) return it->second;
    return std::nullopt;
  }

  // Mean of the row's present cells.
  std::optional<double> average(const std::string& row) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : columns_)
      if (auto v = cell(row, c)) sum += *v, ++n;
    if (n == 0) return std::nullopt;
    return sum / double(n);
  }

  std::vector<std::vector<std::string>> table(std::string_view corner = "config") const {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> header{std::string(corner)};
    header.insert(header.end(), columns_.begin(), columns_.end());
    header.emplace_back(kAverageColumn);
    out.push_back(std::move(header));
    auto show = [](const std::optional<double>& v) { return v ? format_percent(*v) : std::string(kMissingCell); };
    for (const auto& r : rows_) {
      std::vector<std::string> line{r};
      for (const auto& c : columns_) line.push_back(show(cell(r, c)));
      line.push_back(show(average(r)));
      out.push_back(std::move(line));
    }
    return out;
  }

  std::string csv() const {
    std::string out;
    for (const auto& line : table()) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i) out += ',';
        out += csv_field(line[i]);
      }
      out += '\n';
    }
    return out;
  }

  // Left-aligned first column, right-aligned numbers, two-space gutters.
  std::string text() const {
    const auto t = table();
    std::vector<std::size_t> width(t.front().size(), 0);
    for (const auto& line : t)
      for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], display_width(line[i]));
    std::string out;
    for (const auto& line : t) {
      std::string row;
      for (std::size_t i = 0; i < line.size(); ++i) {
        const std::string pad(width[i] - display_width(line[i]), ' ');
        if (i) row += "  ";
        row += i == 0 ? line[i] + pad : pad + line[i];
      }
      while (!row.empty() && row.back() == ' ') row.pop_back();
      out += row + '\n';
    }
    return out;
  }

 private:
  static void add_unique(std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  }
  static std::size_t display_width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xc0) != 0x80;
    return n;
  }
  static std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + '"';
  }

  std::vector<std::string> rows_;
  std::vector<std::string> columns_;
  std::map<std::pair<std::string, std::string>, double> cells_;
};

// Grid from (test set, configuration) keyed reports.
inline WerGrid report_grid(const std::map<std::pair<std::string, std::string>, WerReport>& results) {
  WerGrid g;
  for (const auto& [key, report] : results) g.set(key.second, key.first, report.wer);
  return g;
}

}  // namespace indoasr::metrics
