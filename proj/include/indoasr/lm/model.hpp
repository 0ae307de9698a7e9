// model.hpp
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
// Immutable backoff n-gram model. Scores are log10 throughout; each order is
// a lexicographically sorted array of n-grams searched by bisection.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "indoasr/lm/counts.hpp"

namespace indoasr::lm {

// log10 of zero probability, and the conventional <s> unigram value.
inline constexpr float kLogZero = -99.0f;

class OrderTable {
 public:
  explicit OrderTable(int n = 1) : n_(n) {}

  int n() const { return n_; }
  std::size_t size() const { return probs_.size(); }

  std::span<const WordId> key(std::size_t i) const {
    return {keys_.data() + i * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)};
  }
  float prob(std::size_t i) const { return probs_[i]; }
  float backoff(std::size_t i) const { return backoffs_[i]; }

  // Entries must arrive in strictly increasing key order.
  void append(std::span<const WordId> key, float prob, float backoff) {
    if (key.size() != static_cast<std::size_t>(n_)) throw Error("n-gram length mismatch");
    if (size() && !std::lexicographical_compare(this->key(size() - 1).begin(),
                                                this->key(size() - 1).end(), key.begin(),
                                                key.end()))
      throw Error("n-grams out of order or duplicated");
    keys_.insert(keys_.end(), key.begin(), key.end());
    probs_.push_back(prob);
    backoffs_.push_back(backoff);
  }

  std::optional<std::size_t> find(std::span<const WordId> key) const {
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo) / 2;
      auto k = this->key(mid);
      if (std::lexicographical_compare(k.begin(), k.end(), key.begin(), key.end()))
        lo = mid + 1;
      else
        hi = mid;
    }
    if (lo < size() && std::equal(key.begin(), key.end(), this->key(lo).begin())) return lo;
    return std::nullopt;
  }

  const std::vector<WordId>& raw_keys() const { return keys_; }
  const std::vector<float>& raw_probs() const { return probs_; }
  const std::vector<float>& raw_backoffs() const { return backoffs_; }

 private:
  int n_;
  std::vector<WordId> keys_;
  std::vector<float> probs_;
  std::vector<float> backoffs_;
};

class NGramModel {
 public:
  NGramModel() = default;
  NGramModel(WordTable words, std::vector<OrderTable> tables)
      : words_(std::move(words)), tables_(std::move(tables)) {
    if (tables_.empty()) throw Error("model has no orders");
    for (std::size_t i = 0; i < tables_.size(); ++i)
      if (tables_[i].n() != static_cast<int>(i + 1)) throw Error("order tables out of sequence");
    unk_ = words_.find(kUnk).value_or(kNoWord);
    bos_ = words_.find(kBos).value_or(kNoWord);
    eos_ = words_.find(kEos).value_or(kNoWord);
  }

  int order() const { return static_cast<int>(tables_.size()); }
  const WordTable& words() const { return words_; }
  const OrderTable& table(int n) const { return tables_.at(static_cast<std::size_t>(n - 1)); }
  std::size_t entry_count() const {
    std::size_t total = 0;
    for (const auto& t : tables_) total += t.size();
    return total;
  }

  WordId bos() const { return bos_; }
  WordId eos() const { return eos_; }

  // Out-of-vocabulary words map to <unk>, or kNoWord if the model has none.
  WordId id(std::string_view word) const { return words_.find(word).value_or(unk_); }

  // log10 P(word | history) by the standard backoff recursion. Only the last
  // order-1 history words are used.
  double score(std::span<const WordId> history, WordId word) const {
    const std::size_t max_ctx = static_cast<std::size_t>(order() - 1);
    if (history.size() > max_ctx) history = history.subspan(history.size() - max_ctx);
    NGram key(history.begin(), history.end());
    key.push_back(word);
    double acc = 0.0;
    for (std::size_t ctx = history.size();; --ctx) {
      std::span<const WordId> gram(key.data() + (history.size() - ctx), ctx + 1);
      if (auto i = table(static_cast<int>(ctx + 1)).find(gram))
        return acc + table(static_cast<int>(ctx + 1)).prob(*i);
      if (ctx == 0) return kLogZero;
      if (auto j = table(static_cast<int>(ctx)).find(gram.first(ctx)))
        acc += table(static_cast<int>(ctx)).backoff(*j);
    }
  }

  double score_word(std::span<const std::string> history, std::string_view word) const {
    std::vector<WordId> ids;
    ids.reserve(history.size());
    for (const auto& h : history) ids.push_back(id(h));
    return score(ids, id(word));
  }

  // Sum over the words and the final </s>, starting from <s>.
  double score_sentence(std::span<const std::string> sentence) const {
    std::vector<WordId> history{bos_};
    double total = 0.0;
    for (const auto& w : sentence) {
      WordId wid = id(w);
      total += score(history, wid);
      history.push_back(wid);
    }
    return total + score(history, eos_);
  }

 private:
  WordTable words_;
  std::vector<OrderTable> tables_;
  WordId unk_ = kNoWord;
  WordId bos_ = kNoWord;
  WordId eos_ = kNoWord;
};

}  // namespace indoasr::lm
