// estimate.hpp
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
// Estimators turning raw counts into a backoff model: interpolated modified
// Kneser-Ney (default) and add-k with backoff for tiny corpora.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "indoasr/lm/counts.hpp"
#include "indoasr/lm/model.hpp"

namespace indoasr::lm {

enum class SmoothingKind { modified_kneser_ney, add_k };

struct Smoothing {
  SmoothingKind kind = SmoothingKind::modified_kneser_ney;
  double k = 1.0;  // add_k only

  static Smoothing modified_kneser_ney() { return {}; }
  static Smoothing add_k(double k) { return {SmoothingKind::add_k, k}; }
};

struct EstimateOptions {
  Smoothing smoothing;
  // Drop n-grams (order >= 2) whose count is <= prune unless they are the
  // context of a kept longer n-gram. 0 disables pruning.
  std::uint64_t prune = 0;
};

inline constexpr double kFallbackDiscount = 0.75;

struct Discounts {
  std::array<double, 3> d{kFallbackDiscount, kFallbackDiscount, kFallbackDiscount};
  bool fallback = false;

  double operator()(std::uint64_t count) const {
    if (count == 0) return 0.0;
    return d[std::min<std::uint64_t>(count, 3) - 1];
  }
};

struct EstimateReport {
  std::vector<Discounts> discounts;  // per order, MKN only
  std::vector<std::string> warnings;
};

// Chen-Goodman discounts from counts-of-counts t1..t4. Falls back to a fixed
// 0.75 when a needed count-of-count is zero or a discount leaves (0, k).
inline Discounts mkn_discounts(const std::array<std::uint64_t, 4>& t, std::string* why = nullptr) {
  Discounts out;
  for (std::size_t k = 0; k < 4; ++k) {
    if (t[k] == 0) {
      out.fallback = true;
      if (why) *why = "count-of-count t" + std::to_string(k + 1) + " is zero";
      return out;
    }
  }
  const double t1 = double(t[0]), t2 = double(t[1]), t3 = double(t[2]), t4 = double(t[3]);
  const double y = t1 / (t1 + 2.0 * t2);
  const std::array<double, 3> d{1.0 - 2.0 * y * t2 / t1, 2.0 - 3.0 * y * t3 / t2,
                                3.0 - 4.0 * y * t4 / t3};
  for (std::size_t k = 0; k < 3; ++k) {
    if (!(d[k] > 0.0 && d[k] < double(k + 1))) {
      out.fallback = true;
      if (why) *why = "discount D" + std::to_string(k + 1) + " out of range";
      return out;
    }
  }
  out.d = d;
  return out;
}

namespace detail {

// Linear-domain model under construction; orders are filled bottom-up.
struct Draft {
  int order;
  std::vector<std::map<NGram, double>> prob;
  std::vector<std::map<NGram, double>> backoff;

  explicit Draft(int n) : order(n), prob(static_cast<std::size_t>(n)), backoff(static_cast<std::size_t>(n)) {}

  double query(std::span<const WordId> ctx, WordId w) const {
    double scale = 1.0;
    for (std::size_t len = ctx.size();; --len) {
      NGram g(ctx.end() - static_cast<std::ptrdiff_t>(len), ctx.end());
      g.push_back(w);
      const auto& p = prob[len];
      if (auto it = p.find(g); it != p.end()) return scale * it->second;
      if (len == 0) return 0.0;
      g.pop_back();
      const auto& b = backoff[len - 1];
      if (auto it = b.find(g); it != b.end()) scale *= it->second;
    }
  }
};

// Keep flags per order, prefix-closed so every kept n-gram's context exists.
inline std::vector<std::set<NGram>> prune_sets(const std::vector<std::map<NGram, std::uint64_t>>& c,
                                               std::uint64_t prune) {
  const std::size_t order = c.size();
  std::vector<std::set<NGram>> keep(order);
  for (std::size_t n = order; n-- > 0;) {
    for (const auto& [g, count] : c[n])
      if (n == 0 || prune == 0 || count > prune) keep[n].insert(g);
    if (n + 1 < order)
      for (const auto& g : keep[n + 1]) keep[n].insert(NGram(g.begin(), g.end() - 1));
  }
  return keep;
}

// Calls fn(context, [begin, end)) for each run of entries sharing a context.
template <typename Map, typename Fn>
void for_each_context(const Map& m, Fn&& fn) {
  auto it = m.begin();
  while (it != m.end()) {
    NGram ctx(it->first.begin(), it->first.end() - 1);
    auto end = it;
    while (end != m.end() && std::equal(ctx.begin(), ctx.end(), end->first.begin())) ++end;
    fn(ctx, it, end);
    it = end;
  }
}

inline NGramModel finalize(const NGramCounts& counts, const Draft& draft,
                           const std::vector<std::set<NGram>>& keep) {
  const int order = counts.order;
  const auto bos = counts.words.find(kBos);
  std::vector<OrderTable> tables;
  for (int n = 1; n <= order; ++n) {
    OrderTable t(n);
    const auto& probs = draft.prob[static_cast<std::size_t>(n - 1)];
    const auto& bos_map = draft.backoff[static_cast<std::size_t>(n - 1)];
    for (const auto& [g, p] : probs) {
      if (n > 1 && !keep[static_cast<std::size_t>(n - 1)].count(g)) continue;
      float lp;
      if (n == 1 && bos && g[0] == *bos)
        lp = kLogZero;
      else if (p > 0.0)
        lp = static_cast<float>(std::log10(p));
      else if (n == 1)
        continue;  // zero-probability unigram (add-k with k = 0) is left out
      else
        lp = kLogZero;
      float lb = 0.0f;
      if (n < order) {
        if (auto it = bos_map.find(g); it != bos_map.end())
          lb = it->second > 0.0 ? static_cast<float>(std::log10(it->second)) : kLogZero;
      }
      t.append(g, lp, lb);
    }
    tables.push_back(std::move(t));
  }
  return NGramModel(counts.words, std::move(tables));
}

inline std::vector<WordId> predictable_words(const NGramCounts& counts) {
  std::vector<WordId> out;
  const auto bos = counts.words.find(kBos);
  for (WordId w = 0; w < counts.words.size(); ++w)
    if (!bos || w != *bos) out.push_back(w);
  return out;
}

inline NGramModel estimate_mkn(const NGramCounts& counts, std::uint64_t prune,
                               EstimateReport* report) {
  const int order = counts.order;
  const auto N = static_cast<std::size_t>(order);
  const WordId bos = *counts.words.find(kBos);

  // Continuation counts for lower orders, raw counts at the top order and
  // for n-grams starting with <s>.
  std::vector<std::map<NGram, std::uint64_t>> adj(N);
  adj[N - 1] = counts.counts[N - 1];
  for (std::size_t n = N - 1; n-- > 0;) {
    for (const auto& [g, c] : counts.counts[n]) adj[n][g] = g[0] == bos ? c : 0;
    for (const auto& [g, c] : counts.counts[n + 1]) {
      NGram suffix(g.begin() + 1, g.end());
      if (suffix[0] != bos) ++adj[n][suffix];
    }
  }

  std::vector<Discounts> disc(N);
  for (std::size_t n = 0; n < N; ++n) {
    std::array<std::uint64_t, 4> t{};
    for (const auto& [g, a] : adj[n]) {
      if (n == 0 && g[0] == bos) continue;
      if (a >= 1 && a <= 4) ++t[a - 1];
    }
    std::string why;
    disc[n] = mkn_discounts(t, &why);
    if (disc[n].fallback && report)
      report->warnings.push_back("order " + std::to_string(n + 1) + ": " + why +
                                 "; using fixed discount 0.75");
  }
  if (report) report->discounts = disc;

  const auto keep = prune_sets(adj, prune);
  Draft draft(order);

  // Unigrams interpolate with the uniform distribution over all words but <s>.
  const auto vocab = predictable_words(counts);
  double total = 0.0, discounted = 0.0;
  for (WordId w : vocab) {
    auto it = adj[0].find(NGram{w});
    const std::uint64_t a = it == adj[0].end() ? 0 : it->second;
    total += double(a);
    discounted += disc[0](a);
  }
  const double gamma0 = discounted / total;
  for (WordId w : vocab) {
    auto it = adj[0].find(NGram{w});
    const std::uint64_t a = it == adj[0].end() ? 0 : it->second;
    const double own = a ? (double(a) - disc[0](a)) / total : 0.0;
    draft.prob[0][NGram{w}] = own + gamma0 / double(vocab.size());
  }
  draft.prob[0][NGram{bos}] = 0.0;

  for (std::size_t n = 1; n < N; ++n) {
    for_each_context(adj[n], [&](const NGram& ctx, auto begin, auto end) {
      double sum = 0.0, gamma_mass = 0.0;
      for (auto it = begin; it != end; ++it) {
        sum += double(it->second);
        gamma_mass += keep[n].count(it->first) ? disc[n](it->second) : double(it->second);
      }
      const double gamma = gamma_mass / sum;
      std::span<const WordId> lower_ctx(ctx.data() + 1, ctx.size() - 1);
      for (auto it = begin; it != end; ++it) {
        if (!keep[n].count(it->first)) continue;
        const double lower = draft.query(lower_ctx, it->first.back());
        draft.prob[n][it->first] = (double(it->second) - disc[n](it->second)) / sum + gamma * lower;
      }
      draft.backoff[n - 1][ctx] = gamma;
    });
  }
  return finalize(counts, draft, keep);
}

inline NGramModel estimate_add_k(const NGramCounts& counts, double k, std::uint64_t prune) {
  if (!(k >= 0.0)) throw Error("add-k constant must be nonnegative");
  const int order = counts.order;
  const auto N = static_cast<std::size_t>(order);
  const WordId bos = *counts.words.find(kBos);
  const auto& c = counts.counts;
  const auto keep = prune_sets(c, prune);
  Draft draft(order);

  const auto vocab = predictable_words(counts);
  const double vsize = double(vocab.size());
  double total = 0.0;
  for (WordId w : vocab)
    if (auto it = c[0].find(NGram{w}); it != c[0].end()) total += double(it->second);
  for (WordId w : vocab) {
    auto it = c[0].find(NGram{w});
    const double cw = it == c[0].end() ? 0.0 : double(it->second);
    draft.prob[0][NGram{w}] = (cw + k) / (total + k * vsize);
  }
  draft.prob[0][NGram{bos}] = 0.0;

  for (std::size_t n = 1; n < N; ++n) {
    for_each_context(c[n], [&](const NGram& ctx, auto begin, auto end) {
      double sum = 0.0;
      for (auto it = begin; it != end; ++it) sum += double(it->second);
      std::span<const WordId> lower_ctx(ctx.data() + 1, ctx.size() - 1);
      double kept_mass = 0.0, lower_mass = 0.0;
      for (auto it = begin; it != end; ++it) {
        if (!keep[n].count(it->first)) continue;
        const double p = (double(it->second) + k) / (sum + k * vsize);
        draft.prob[n][it->first] = p;
        kept_mass += p;
        lower_mass += draft.query(lower_ctx, it->first.back());
      }
      // Leftover mass is spread over unseen words in proportion to the
      // lower-order distribution.
      const double num = 1.0 - kept_mass;
      const double den = 1.0 - lower_mass;
      draft.backoff[n - 1][ctx] = (num <= 1e-12 || den <= 1e-12) ? 0.0 : num / den;
    });
  }
  return finalize(counts, draft, keep);
}

}  // namespace detail

inline NGramModel estimate(const NGramCounts& counts, const EstimateOptions& options = {},
                           EstimateReport* report = nullptr) {
  check_order(counts.order);
  if (counts.counts.size() != static_cast<std::size_t>(counts.order) || counts.counts[0].empty())
    throw EmptyCorpus("no counts to estimate from");
  if (options.smoothing.kind == SmoothingKind::add_k)
    return detail::estimate_add_k(counts, options.smoothing.k, options.prune);
  return detail::estimate_mkn(counts, options.prune, report);
}

}  // namespace indoasr::lm
