// ctc_decode.hpp
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
// CTC decoding over per-frame log-posteriors: greedy best path, and prefix
// beam search with optional word-level n-gram fusion.
//
// Posterior file ("CTCL"), little-endian:
//   "CTCL" | u32 version | u32 T | u32 V | T*V f32 ln-probabilities, row-major

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "indoasr/bytes.hpp"
#include "indoasr/error.hpp"
#include "indoasr/lm/model.hpp"
#include "indoasr/textnorm.hpp"

namespace indoasr::ctc {

using textnorm::NormalizedText;
using textnorm::Vocabulary;

inline constexpr char kPosteriorMagic[4] = {'C', 'T', 'C', 'L'};
inline constexpr std::uint32_t kPosteriorVersion = 1;
inline constexpr double kLn10 = 2.302585092994045684;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// T x V natural-log posteriors, row-major.
class PosteriorMatrix {
 public:
  PosteriorMatrix() = default;
  PosteriorMatrix(std::size_t frames, std::size_t vocab, std::vector<float> values)
      : frames_(frames), vocab_(vocab), values_(std::move(values)) {
    if (frames == 0 || vocab == 0) throw ShapeMismatch("posterior matrix needs T > 0 and V > 0");
    if (values_.size() != frames * vocab)
      throw ShapeMismatch("posterior matrix has " + std::to_string(values_.size()) +
                          " values, expected " + std::to_string(frames * vocab));
  }

  // Linear probabilities in, log-probabilities stored.
  static PosteriorMatrix from_probs(std::size_t frames, std::size_t vocab,
                                    std::span<const double> probs) {
    std::vector<float> v(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
      v[i] = probs[i] > 0.0 ? static_cast<float>(std::log(probs[i]))
                            : -std::numeric_limits<float>::infinity();
    return PosteriorMatrix(frames, vocab, std::move(v));
  }

  std::size_t frames() const { return frames_; }
  std::size_t vocab_size() const { return vocab_; }
  float at(std::size_t t, std::size_t v) const { return values_[t * vocab_ + v]; }
  std::span<const float> row(std::size_t t) const {
    return std::span<const float>(values_).subspan(t * vocab_, vocab_);
  }
  const std::vector<float>& values() const { return values_; }

  // Largest |sum_v exp(row) - 1| over all frames.
  double max_row_error() const {
    double worst = 0.0;
    for (std::size_t t = 0; t < frames_; ++t) {
      double s = 0.0;
      for (float x : row(t)) s += std::exp(double(x));
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  void check_normalized(double tolerance = 1e-4) const {
    for (std::size_t t = 0; t < frames_; ++t) {
      double s = 0.0;
      for (float x : row(t)) {
        if (std::isnan(x) || x > 0.0f) throw NotNormalized("frame " + std::to_string(t) + " has an invalid log-probability");
        s += std::exp(double(x));
      }
      if (std::abs(s - 1.0) > tolerance)
        throw NotNormalized("frame " + std::to_string(t) + " sums to " + std::to_string(s));
    }
  }

  bool operator==(const PosteriorMatrix&) const = default;

 private:
  std::size_t frames_ = 0;
  std::size_t vocab_ = 0;
  std::vector<float> values_;
};

inline std::string to_ctcl(const PosteriorMatrix& m) {
  bytes::ByteWriter w;
  w.bytes(kPosteriorMagic, 4);
  w.u32(kPosteriorVersion);
  w.u32(static_cast<std::uint32_t>(m.frames()));
  w.u32(static_cast<std::uint32_t>(m.vocab_size()));
  for (float x : m.values()) w.f32(x);
  return w.data();
}

inline PosteriorMatrix from_ctcl(std::string_view data) {
  if (data.size() < 4) throw TruncatedFile("posterior file shorter than its magic");
  if (std::memcmp(data.data(), kPosteriorMagic, 4) != 0) throw BadMagic("not a CTCL posterior file");
  bytes::ByteReader r(data.substr(4));
  const std::uint32_t version = r.u32();
  if (version != kPosteriorVersion)
    throw VersionMismatch("CTCL version " + std::to_string(version) + " unsupported");
  const std::uint64_t frames = r.u32(), vocab = r.u32();
  if (frames * vocab > r.remaining() / 4) throw TruncatedFile("posterior values truncated");
  std::vector<float> values(frames * vocab);
  for (auto& x : values) x = r.f32();
  if (r.remaining() != 0) throw ShapeMismatch("trailing bytes after posterior values");
  return PosteriorMatrix(frames, vocab, std::move(values));
}

inline void write_posteriors(const PosteriorMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string data = to_ctcl(m);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline PosteriorMatrix read_posteriors(const std::string& path) { return from_ctcl(bytes::slurp(path)); }

inline void check_shape(const PosteriorMatrix& post, const Vocabulary& vocab) {
  if (post.vocab_size() != vocab.size())
    throw ShapeMismatch("posterior width " + std::to_string(post.vocab_size()) +
                        " does not match vocabulary size " + std::to_string(vocab.size()));
}

// ---------------------------------------------------------------------------
// Greedy

// Per-frame argmax (lowest id on ties), repeats collapsed, blanks removed.
inline std::vector<int> greedy_labels(const PosteriorMatrix& post, int blank_id) {
  std::vector<int> out;
  int prev = -1;
  for (std::size_t t = 0; t < post.frames(); ++t) {
    const auto row = post.row(t);
    const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != prev && best != blank_id) out.push_back(best);
    prev = best;
  }
  return out;
}

inline NormalizedText greedy_decode(const PosteriorMatrix& post, const Vocabulary& vocab) {
  check_shape(post, vocab);
  return textnorm::labels_to_text(greedy_labels(post, vocab.blank_id()), vocab);
}

// ---------------------------------------------------------------------------
// Prefix beam search

struct DecodeConfig {
  std::size_t beam_width = 100;
  double lm_weight = 0.5;   // alpha
  double word_bonus = 1.0;  // beta
  double prune_log_threshold = -9.21;

  void validate() const {
    if (beam_width < 1) throw Error("beam width must be at least 1");
    if (!(lm_weight >= 0.0)) throw Error("lm weight must be nonnegative");
  }
};

// Maps label ids to word-building actions and scores completed words.
class WordFusion {
 public:
  WordFusion(const lm::NGramModel& lm, const Vocabulary& vocab) : lm_(&lm) {
    delimiter_ = vocab.delimiter_id();
    letters_.assign(vocab.size(), 0);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const auto& tok = vocab.token(static_cast<int>(i));
      if (tok.size() == 1 && tok[0] >= 'a' && tok[0] <= 'z') letters_[i] = tok[0];
    }
  }

  const lm::NGramModel& lm() const { return *lm_; }
  int delimiter() const { return delimiter_; }
  char letter(int label) const {
    return label >= 0 && static_cast<std::size_t>(label) < letters_.size() ? letters_[static_cast<std::size_t>(label)] : 0;
  }

 private:
  const lm::NGramModel* lm_;
  int delimiter_;
  std::vector<char> letters_;
};

struct BeamEntry {
  std::vector<int> labels;
  double ctc_log_prob = kNegInf;  // ln of summed alignment mass
  double lm_log10 = 0.0;          // words plus </s>, zero without fusion
  std::size_t words = 0;
  double score = kNegInf;         // ctc + alpha*ln10*lm + beta*words
};

namespace detail {

struct Node {
  std::uint32_t parent;
  int label;
  double lm_log10;
  std::uint32_t words;
  std::vector<lm::WordId> history;  // last order-1 words, starting at <s>
  std::string partial;
};

class PrefixTrie {
 public:
  PrefixTrie(std::size_t vocab, const WordFusion* fusion) : vocab_(vocab), fusion_(fusion) {
    Node root{0, -1, 0.0, 0, {}, {}};
    if (fusion_) root.history.push_back(fusion_->lm().bos());
    nodes_.push_back(std::move(root));
  }

  const Node& operator[](std::uint32_t id) const { return nodes_[id]; }

  std::uint32_t child(std::uint32_t parent, int label) {
    const std::uint64_t key = std::uint64_t(parent) * vocab_ + static_cast<std::uint64_t>(label);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    Node n = nodes_[parent];
    n.parent = parent;
    n.label = label;
    if (fusion_) {
      if (label == fusion_->delimiter()) {
        if (!n.partial.empty()) complete_word(n);
      } else if (char c = fusion_->letter(label)) {
        n.partial.push_back(c);
      }
    }
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(std::move(n));
    index_.emplace(key, id);
    return id;
  }

  // Final LM terms: pending partial word, then </s>.
  std::pair<double, std::uint32_t> finish(std::uint32_t id) const {
    Node n = nodes_[id];
    if (!fusion_) return {0.0, 0};
    if (!n.partial.empty()) complete_word(n);
    n.lm_log10 += fusion_->lm().score(n.history, fusion_->lm().eos());
    return {n.lm_log10, n.words};
  }

  std::vector<int> labels(std::uint32_t id) const {
    std::vector<int> out;
    for (; id != 0; id = nodes_[id].parent) out.push_back(nodes_[id].label);
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  void complete_word(Node& n) const {
    const auto& lm = fusion_->lm();
    const lm::WordId w = lm.id(n.partial);
    n.lm_log10 += lm.score(n.history, w);
    ++n.words;
    n.history.push_back(w);
    const auto keep = static_cast<std::size_t>(std::max(lm.order() - 1, 0));
    if (n.history.size() > keep)
      n.history.erase(n.history.begin(), n.history.end() - static_cast<std::ptrdiff_t>(keep));
    n.partial.clear();
  }

  std::size_t vocab_;
  const WordFusion* fusion_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

struct Beam {
  std::uint32_t node;
  double p_blank;
  double p_nonblank;
  double score = kNegInf;
};

}  // namespace detail

// Prefix beam search over label ids. Scores combine the CTC prefix mass with
// alpha * ln P_LM + beta * words when fusion is given. Equal scores order by
// label sequence.
inline std::vector<BeamEntry> prefix_beam_search(const PosteriorMatrix& post, int blank_id,
                                                 const DecodeConfig& cfg,
                                                 const WordFusion* fusion = nullptr) {
  cfg.validate();
  if (blank_id < 0 || static_cast<std::size_t>(blank_id) >= post.vocab_size())
    throw ShapeMismatch("blank id outside the posterior width");
  const double alpha = fusion ? cfg.lm_weight * kLn10 : 0.0;
  const double beta = fusion ? cfg.word_bonus : 0.0;
  detail::PrefixTrie trie(post.vocab_size(), fusion);

  auto combined = [&](const detail::Beam& b) {
    const auto& n = trie[b.node];
    return log_add(b.p_blank, b.p_nonblank) + alpha * n.lm_log10 + beta * double(n.words);
  };
  auto better = [&](const detail::Beam& a, const detail::Beam& b) {
    if (a.score != b.score) return a.score > b.score;
    return trie.labels(a.node) < trie.labels(b.node);
  };

  std::vector<detail::Beam> beams{{0, 0.0, kNegInf}};
  std::unordered_map<std::uint32_t, std::size_t> slot;
  std::vector<detail::Beam> next;
  std::vector<int> candidates;
  for (std::size_t t = 0; t < post.frames(); ++t) {
    const auto row = post.row(t);
    candidates.clear();
    for (std::size_t v = 0; v < row.size(); ++v)
      if (row[v] >= cfg.prune_log_threshold) candidates.push_back(static_cast<int>(v));
    if (candidates.empty())
      candidates.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));

    next.clear();
    slot.clear();
    auto entry = [&](std::uint32_t node) -> detail::Beam& {
      auto [it, fresh] = slot.emplace(node, next.size());
      if (fresh) next.push_back({node, kNegInf, kNegInf});
      return next[it->second];
    };
    for (const auto& b : beams) {
      const double total = log_add(b.p_blank, b.p_nonblank);
      const int last = trie[b.node].label;
      for (int c : candidates) {
        const double p = row[static_cast<std::size_t>(c)];
        if (c == blank_id) {
          auto& e = entry(b.node);
          e.p_blank = log_add(e.p_blank, total + p);
          continue;
        }
        const std::uint32_t ext = trie.child(b.node, c);
        if (c == last) {
          auto& same = entry(b.node);
          same.p_nonblank = log_add(same.p_nonblank, b.p_nonblank + p);
          auto& e = entry(ext);
          e.p_nonblank = log_add(e.p_nonblank, b.p_blank + p);
        } else {
          auto& e = entry(ext);
          e.p_nonblank = log_add(e.p_nonblank, total + p);
        }
      }
    }
    std::erase_if(next, [](const detail::Beam& b) { return b.p_blank == kNegInf && b.p_nonblank == kNegInf; });
    for (auto& b : next) b.score = combined(b);
    if (next.size() > cfg.beam_width) {
      std::partial_sort(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(cfg.beam_width),
                        next.end(), better);
      next.resize(cfg.beam_width);
    }
    std::swap(beams, next);
  }

  std::vector<BeamEntry> out;
  out.reserve(beams.size());
  for (const auto& b : beams) {
    BeamEntry e;
    e.labels = trie.labels(b.node);
    e.ctc_log_prob = log_add(b.p_blank, b.p_nonblank);
    std::tie(e.lm_log10, e.words) = trie.finish(b.node);
    e.score = e.ctc_log_prob + alpha * e.lm_log10 + beta * double(e.words);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const BeamEntry& a, const BeamEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.labels < b.labels;
  });
  return out;
}

struct Hypothesis {
  NormalizedText text;
  double score = kNegInf;
  double ctc_log_prob = kNegInf;
  double lm_log10 = 0.0;
  std::size_t words = 0;
  std::vector<int> labels;
};

// Ranked transcripts, one per distinct text (the best-scoring labeling wins).
// Equal scores order by text.
inline std::vector<Hypothesis> beam_decode(const PosteriorMatrix& post, const Vocabulary& vocab,
                                           const DecodeConfig& cfg = {},
                                           const lm::NGramModel* lm = nullptr) {
  check_shape(post, vocab);
  post.check_normalized();
  std::optional<WordFusion> fusion;
  if (lm) fusion.emplace(*lm, vocab);
  auto entries = prefix_beam_search(post, vocab.blank_id(), cfg, fusion ? &*fusion : nullptr);

  std::vector<Hypothesis> out;
  std::unordered_map<std::string, std::size_t> seen;
  for (auto& e : entries) {
    auto text = textnorm::labels_to_text(e.labels, vocab);
    if (!seen.emplace(text.str(), out.size()).second) continue;
    out.push_back({std::move(text), e.score, e.ctc_log_prob, e.lm_log10, e.words, std::move(e.labels)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.text.str() < b.text.str();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Batches

struct Utterance {
  std::string id;
  PosteriorMatrix posteriors;
};

struct BatchOptions {
  bool greedy = false;
  DecodeConfig config;
  const lm::NGramModel* lm = nullptr;
  unsigned threads = 1;
};

struct DecodedUtterance {
  std::string id;
  NormalizedText text;
};

struct DecodeFailure {
  std::string id;
  std::string message;
};

struct BatchResult {
  std::vector<DecodedUtterance> decoded;  // input order, failures skipped
  std::vector<DecodeFailure> failures;    // input order
};

inline BatchResult batch_decode(std::span<const Utterance> utterances, const Vocabulary& vocab,
                                const BatchOptions& options = {}) {
  options.config.validate();
  const std::size_t n = utterances.size();
  std::vector<std::optional<NormalizedText>> texts(n);
  std::vector<std::string> errors(n);
  auto run = [&](std::size_t i) {
    try {
      const auto& post = utterances[i].posteriors;
      if (options.greedy) {
        check_shape(post, vocab);
        post.check_normalized();
        texts[i] = greedy_decode(post, vocab);
      } else {
        auto hyps = beam_decode(post, vocab, options.config, options.lm);
        texts[i] = hyps.empty() ? NormalizedText() : std::move(hyps.front().text);
      }
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = cursor.fetch_add(1)) < n;) run(i);
      });
    for (auto& th : pool) th.join();
  }

  BatchResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (texts[i])
      out.decoded.push_back({utterances[i].id, std::move(*texts[i])});
    else
      out.failures.push_back({utterances[i].id, errors[i]});
  }
  return out;
}

}  // namespace indoasr::ctc
