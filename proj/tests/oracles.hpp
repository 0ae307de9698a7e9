// oracles.hpp
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
// Brute-force reference implementations used by the unit and acceptance
// suites. Nothing here calls the code path it is used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Edit distance: minimum cost over every edit script, found by exhaustive
// recursion (each step is match/substitute, delete or insert).

inline int brute_force_edit_cost(const std::vector<std::string>& ref,
                                 const std::vector<std::string>& hyp, std::size_t i = 0,
                                 std::size_t j = 0) {
  if (i == ref.size()) return static_cast<int>(hyp.size() - j);
  if (j == hyp.size()) return static_cast<int>(ref.size() - i);
  const int diag = (ref[i] == hyp[j] ? 0 : 1) + brute_force_edit_cost(ref, hyp, i + 1, j + 1);
  const int del = 1 + brute_force_edit_cost(ref, hyp, i + 1, j);
  const int ins = 1 + brute_force_edit_cost(ref, hyp, i, j + 1);
  return std::min({diag, del, ins});
}

// Every word sequence of length 0..max_len over the alphabet.
inline std::vector<std::vector<std::string>> all_sequences(const std::vector<std::string>& alphabet,
                                                           std::size_t max_len) {
  std::vector<std::vector<std::string>> out{{}};
  std::vector<std::vector<std::string>> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& s : frontier)
      for (const auto& w : alphabet) {
        auto t = s;
        t.push_back(w);
        next.push_back(t);
      }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CTC: enumerate all V^T alignments, collapse each and sum probabilities
// per label string. probs is T x V, linear domain, row-major.

inline std::map<std::vector<int>, double> ctc_label_posteriors(const std::vector<double>& probs,
                                                               int T, int V, int blank) {
  std::map<std::vector<int>, double> out;
  std::vector<int> path(static_cast<std::size_t>(T), 0);
  const long long total = static_cast<long long>(std::pow(V, T));
  for (long long code = 0; code < total; ++code) {
    long long c = code;
    double p = 1.0;
    for (int t = 0; t < T; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(c % V);
      c /= V;
      p *= probs[static_cast<std::size_t>(t * V + path[static_cast<std::size_t>(t)])];
    }
    std::vector<int> labels;
    int prev = -1;
    for (int s : path) {
      if (s != prev && s != blank) labels.push_back(s);
      prev = s;
    }
    out[labels] += p;
  }
  return out;
}

// Highest-probability label string; ties go to the lexicographically
// smaller label sequence.
inline std::pair<std::vector<int>, double> ctc_best_labels(const std::vector<double>& probs, int T,
                                                           int V, int blank) {
  const auto post = ctc_label_posteriors(probs, T, V, blank);
  std::pair<std::vector<int>, double> best{{}, -1.0};
  for (const auto& [labels, p] : post)
    if (p > best.second) best = {labels, p};
  return best;
}

// ---------------------------------------------------------------------------
// ARPA backoff recursion on strings, parsing the text independently of the
// library reader.

struct ArpaOracle {
  int order = 0;
  std::map<std::vector<std::string>, std::pair<double, double>> entries;

  explicit ArpaOracle(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int section = 0;
    while (std::getline(in, line)) {
      if (line.rfind("ngram ", 0) == 0) {
        order = std::max(order, std::stoi(line.substr(6, line.find('=') - 6)));
        continue;
      }
      if (line.size() > 2 && line[0] == '\\' && line.find("-grams:") != std::string::npos) {
        section = std::stoi(line.substr(1));
        continue;
      }
      if (section == 0 || line.empty() || line[0] == '\\') continue;
      std::istringstream fields(line);
      double prob = 0.0, backoff = 0.0;
      fields >> prob;
      std::vector<std::string> words(static_cast<std::size_t>(section));
      for (auto& w : words) fields >> w;
      if (!(fields >> backoff)) backoff = 0.0;
      entries[words] = {prob, backoff};
    }
  }

  bool has(const std::string& w) const { return entries.count({w}) > 0; }

  double score(std::vector<std::string> history, std::string word) const {
    if (!has(word)) word = "<unk>";
    for (auto& h : history)
      if (!has(h)) h = "<unk>";
    while (history.size() > static_cast<std::size_t>(order - 1)) history.erase(history.begin());
    return recurse(history, word);
  }

 private:
  double recurse(const std::vector<std::string>& history, const std::string& word) const {
    auto gram = history;
    gram.push_back(word);
    if (auto it = entries.find(gram); it != entries.end()) return it->second.first;
    if (history.empty()) return -99.0;
    double bo = 0.0;
    if (auto it = entries.find(history); it != entries.end()) bo = it->second.second;
    return bo + recurse(std::vector<std::string>(history.begin() + 1, history.end()), word);
  }
};

// ---------------------------------------------------------------------------
// Encoder geometry: slide each kernel explicitly and count placements.

inline long long simulate_frames(long long samples, const std::vector<int>& kernels,
                                 const std::vector<int>& strides) {
  long long len = samples;
  for (std::size_t l = 0; l < kernels.size(); ++l) {
    long long placements = 0;
    for (long long start = 0; start + kernels[l] <= len; start += strides[l]) ++placements;
    len = placements;
  }
  return len;
}

// ---------------------------------------------------------------------------
// Central finite differences of a scalar function of a vector.

inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace oracle
