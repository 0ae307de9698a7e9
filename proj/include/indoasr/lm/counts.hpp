// counts.hpp
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
// Word table and raw n-gram counting over normalized sentences.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "indoasr/error.hpp"
#include "indoasr/textnorm.hpp"

namespace indoasr::lm {

using WordId = std::uint32_t;
using NGram = std::vector<WordId>;

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr int kMaxOrder = 5;

// Id that is never present in any table; used for words the model lacks.
inline constexpr WordId kNoWord = 0xffffffffu;

class WordTable {
 public:
  WordId add(std::string_view word) {
    auto [it, inserted] = index_.try_emplace(std::string(word), static_cast<WordId>(words_.size()));
    if (inserted) words_.emplace_back(word);
    return it->second;
  }

  std::optional<WordId> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& word(WordId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  friend bool operator==(const WordTable& a, const WordTable& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

struct NGramCounts {
  int order = 0;
  WordTable words;
  // counts[n - 1] maps each observed n-gram to its occurrence count.
  std::vector<std::map<NGram, std::uint64_t>> counts;

  const std::map<NGram, std::uint64_t>& of_order(int n) const {
    return counts.at(static_cast<std::size_t>(n - 1));
  }
};

struct CountOptions {
  // Words seen fewer than this many times are counted as <unk>. 1 keeps all.
  std::uint64_t unk_threshold = 1;
};

inline void check_order(int order) {
  if (order < 1 || order > kMaxOrder)
    throw Error("n-gram order must be in 1.." + std::to_string(kMaxOrder));
}

// Each sentence is wrapped as "<s> w1 ... wk </s>" and every n-gram with
// n <= order inside that window is counted, including the <s> unigram.
// Ids: <unk>, <s>, </s> first, then words in order of first appearance.
inline NGramCounts count_ngrams(std::span<const textnorm::NormalizedText> corpus, int order,
                                const CountOptions& options = {}) {
  check_order(order);
  if (corpus.empty()) throw EmptyCorpus();

  std::unordered_map<std::string, std::uint64_t> freq;
  if (options.unk_threshold > 1)
    for (const auto& s : corpus)
      for (const auto& w : s.words()) ++freq[w];

  NGramCounts out;
  out.order = order;
  const WordId unk = out.words.add(kUnk);
  const WordId bos = out.words.add(kBos);
  const WordId eos = out.words.add(kEos);
  out.counts.resize(static_cast<std::size_t>(order));

  bool any_word = false;
  std::vector<WordId> sentence;
  for (const auto& s : corpus) {
    sentence.clear();
    sentence.push_back(bos);
    for (const auto& w : s.words()) {
      any_word = true;
      if (options.unk_threshold > 1 && freq[w] < options.unk_threshold)
        sentence.push_back(unk);
      else
        sentence.push_back(out.words.add(w));
    }
    sentence.push_back(eos);
    for (std::size_t i = 0; i < sentence.size(); ++i)
      for (int n = 1; n <= order && i + static_cast<std::size_t>(n) <= sentence.size(); ++n)
        ++out.counts[static_cast<std::size_t>(n - 1)]
                    [NGram(sentence.begin() + static_cast<std::ptrdiff_t>(i),
                           sentence.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  if (!any_word) throw EmptyCorpus("corpus has no words");
  return out;
}

}  // namespace indoasr::lm
