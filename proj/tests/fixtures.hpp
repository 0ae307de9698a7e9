// fixtures.hpp
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
// Small corpora and helpers shared by the test suites.

#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "indoasr/ngram_lm.hpp"
#include "indoasr/textnorm.hpp"

namespace fixtures {

// 30 distinct words.
inline std::vector<indoasr::textnorm::NormalizedText> toy_corpus() {
  const char* lines[] = {
      "saya pergi ke pasar hari ini",       "kamu makan nasi goreng di rumah",
      "dia minum kopi panas setiap pagi",   "kami membeli buku baru untuk sekolah",
      "mereka bermain bola di lapangan besar",    "saya makan nasi di rumah",
      "kamu pergi ke sekolah hari ini",     "dia makan nasi goreng setiap pagi",
      "kami minum kopi di rumah",           "mereka pergi ke pasar",
      "saya membeli buku untuk kamu",       "dia bermain bola setiap hari sekali",
  };
  std::vector<indoasr::textnorm::NormalizedText> out;
  for (const char* l : lines) out.push_back(indoasr::textnorm::normalize(l));
  return out;
}

// Every history (truncated to order-1 words) that occurs in the corpus,
// including the empty one.
inline std::set<std::vector<std::string>> observed_histories(
    const std::vector<indoasr::textnorm::NormalizedText>& corpus, int order) {
  std::set<std::vector<std::string>> out{{}};
  for (const auto& s : corpus) {
    std::vector<std::string> tokens{"<s>"};
    for (const auto& w : s.words()) tokens.push_back(w);
    for (std::size_t i = 1; i <= tokens.size(); ++i) {
      const std::size_t keep = std::min<std::size_t>(i, static_cast<std::size_t>(order - 1));
      for (std::size_t len = 0; len <= keep; ++len)
        out.insert(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i - len),
                                            tokens.begin() + static_cast<std::ptrdiff_t>(i)));
    }
  }
  return out;
}

// Largest |sum_w P(w|h) - 1| over the given histories; w ranges over every
// word of the model except <s>.
inline double max_normalization_error(const indoasr::lm::NGramModel& model,
                                      const std::set<std::vector<std::string>>& histories) {
  double worst = 0.0;
  for (const auto& h : histories) {
    double sum = 0.0;
    for (const auto& w : model.words().words()) {
      if (w == "<s>") continue;
      sum += std::pow(10.0, model.score_word(h, w));
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

}  // namespace fixtures
