// synthetic.hpp
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
// Seeded synthetic benchmark: sentences from a small Indonesian-like
// grammar, and CTC posteriors that spell each sentence with occasional
// confusions where a similar-sounding letter narrowly beats the true one.

#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "indoasr/ctc_decode.hpp"
#include "indoasr/random.hpp"
#include "indoasr/textnorm.hpp"

namespace indoasr::synthetic {

using textnorm::NormalizedText;
using textnorm::Vocabulary;

// subject verb object [place] [time]; objects depend on the verb.
class Grammar {
 public:
  static Grammar indonesian() {
    Grammar g;
    g.subjects_ = {"saya", "kamu", "dia", "kami", "mereka", "ibu", "bapak", "adik"};
    g.objects_ = {
        {"makan", {"nasi goreng", "roti", "ikan bakar", "sayur"}},
        {"minum", {"kopi panas", "teh manis", "susu", "air putih"}},
        {"membeli", {"buku baru", "baju", "sepatu", "tas merah"}},
        {"membaca", {"koran", "buku cerita", "surat", "majalah"}},
        {"menulis", {"surat", "cerita pendek", "laporan", "puisi"}},
        {"mencari", {"kunci", "dompet", "kucing", "sepatu"}},
        {"membawa", {"payung", "tas merah", "bekal", "air putih"}},
        {"melihat", {"burung", "kucing", "bintang", "pelangi"}},
    };
    g.places_ = {"di rumah", "di pasar", "di sekolah", "di kantor", "di taman"};
    g.times_ = {"setiap pagi", "hari ini", "kemarin sore", "nanti malam"};
    g.rare_places_ = {"di bandung", "di surabaya", "di medan", "di bogor", "di jogja"};
    return g;
  }

  // rare_rate is the chance that the place phrase names a city that the
  // common sentences never mention.
  NormalizedText sample(Rng& rng, double rare_rate = 0.0) const {
    std::string s = pick(subjects_, rng);
    const auto& [verb, objects] = *std::next(objects_.begin(), static_cast<std::ptrdiff_t>(rng.uniform_index(objects_.size())));
    s += " " + verb + " " + pick(objects, rng);
    if (rng.bernoulli(0.6)) s += " " + pick(rng.bernoulli(rare_rate) ? rare_places_ : places_, rng);
    if (rng.bernoulli(0.5)) s += " " + pick(times_, rng);
    return textnorm::normalize(s);
  }

  std::set<std::string> words() const {
    std::set<std::string> out;
    auto add = [&](const std::string& phrase) {
      for (const auto& w : NormalizedText::assume_normalized(phrase).words()) out.insert(w);
    };
    for (const auto& s : subjects_) add(s);
    for (const auto& [verb, objects] : objects_) {
      add(verb);
      for (const auto& o : objects) add(o);
    }
    for (const auto& p : places_) add(p);
    for (const auto& t : times_) add(t);
    for (const auto& p : rare_places_) add(p);
    return out;
  }

 private:
  static const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
    return v[static_cast<std::size_t>(rng.uniform_index(v.size()))];
  }

  std::vector<std::string> subjects_;
  std::map<std::string, std::vector<std::string>> objects_;
  std::vector<std::string> places_;
  std::vector<std::string> times_;
  std::vector<std::string> rare_places_;
};

struct NoiseConfig {
  double confusion_prob = 0.06;  // per letter
  double clean_mass = 0.85;      // true token on a clean frame
  double confused_mass = 0.45;   // wrong letter on a confused frame
  double runner_up_min = 0.02;   // true letter on a confused frame is
  double runner_up_max = 0.40;   // drawn uniformly from this range
  double blank_mass = 0.90;
  std::size_t max_repeat = 2;    // frames per token, drawn from 1..max_repeat
};

// Letters that are easy to mishear for one another.
inline const std::map<char, std::string>& confusable_letters() {
  static const std::map<char, std::string> table = {
      {'a', "eo"}, {'e', "ai"}, {'i', "e"},  {'o', "ua"}, {'u', "o"},  {'b', "pd"}, {'p', "b"},
      {'d', "tb"}, {'t', "d"},  {'k', "g"},  {'g', "k"},  {'m', "n"},  {'n', "m"},  {'s', "c"},
      {'c', "s"},  {'r', "l"},  {'l', "r"},  {'h', "k"},  {'j', "c"},  {'y', "i"},  {'w', "u"},
  };
  return table;
}

namespace detail {

inline std::vector<double> row_with(const Vocabulary& vocab, int top, double top_mass, int second = -1,
                                    double second_mass = 0.0) {
  const std::size_t others = vocab.size() - (second >= 0 ? 2 : 1);
  const double rest = (1.0 - top_mass - second_mass) / double(others);
  std::vector<double> row(vocab.size(), rest);
  row[static_cast<std::size_t>(top)] = top_mass;
  if (second >= 0) row[static_cast<std::size_t>(second)] = second_mass;
  return row;
}

inline int confusion_for(char c, const Vocabulary& vocab, Rng& rng) {
  std::vector<int> options;
  if (auto it = confusable_letters().find(c); it != confusable_letters().end())
    for (char o : it->second)
      if (int id = vocab.find(std::string(1, o)); id >= 0) options.push_back(id);
  if (options.empty())
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const auto& tok = vocab.token(static_cast<int>(i));
      if (tok.size() == 1 && tok[0] >= 'a' && tok[0] <= 'z' && tok[0] != c) options.push_back(static_cast<int>(i));
    }
  return options[static_cast<std::size_t>(rng.uniform_index(options.size()))];
}

}  // namespace detail

// Each token gets 1..max_repeat frames, optionally followed by a blank frame;
// a blank always separates equal neighbours. A confused letter keeps the same
// wrong winner on all of its frames.
inline ctc::PosteriorMatrix render_posteriors(const NormalizedText& text, const Vocabulary& vocab,
                                              const NoiseConfig& noise, Rng& rng) {
  const auto labels = textnorm::encode(text, vocab);
  const int blank = vocab.blank_id();
  std::vector<double> values;
  std::size_t frames = 0;
  auto push = [&](const std::vector<double>& row) {
    values.insert(values.end(), row.begin(), row.end());
    ++frames;
  };
  push(detail::row_with(vocab, blank, noise.blank_mass));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    const std::string& tok = vocab.token(label);
    const bool letter = tok.size() == 1 && tok[0] >= 'a' && tok[0] <= 'z';
    std::vector<double> row;
    if (letter && rng.bernoulli(noise.confusion_prob))
      row = detail::row_with(vocab, detail::confusion_for(tok[0], vocab, rng), noise.confused_mass, label,
                             noise.runner_up_min + (noise.runner_up_max - noise.runner_up_min) * rng.uniform_open());
    else
      row = detail::row_with(vocab, label, noise.clean_mass);
    const auto repeat = 1 + rng.uniform_index(std::max<std::size_t>(noise.max_repeat, 1));
    for (std::uint64_t r = 0; r < repeat; ++r) push(row);
    const bool same_next = i + 1 < labels.size() && labels[i + 1] == label;
    if (same_next || rng.bernoulli(0.5)) push(detail::row_with(vocab, blank, noise.blank_mass));
  }
  push(detail::row_with(vocab, blank, noise.blank_mass));
  return ctc::PosteriorMatrix::from_probs(frames, vocab.size(), values);
}

struct BenchmarkConfig {
  std::size_t lm_sentences = 200;
  std::size_t test_utterances = 100;
  double rare_rate = 0.3;  // test sentences only
  NoiseConfig noise;
  std::uint64_t seed = 53;
};

struct Benchmark {
  std::vector<NormalizedText> lm_corpus;
  Vocabulary vocab;
  std::vector<std::string> ids;
  std::vector<NormalizedText> references;
  std::vector<ctc::PosteriorMatrix> posteriors;
};

// Test sentences never repeat an LM-corpus sentence.
inline Benchmark make_benchmark(const BenchmarkConfig& cfg = {}) {
  Rng rng(cfg.seed);
  const auto grammar = Grammar::indonesian();
  Benchmark b;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < cfg.lm_sentences; ++i) {
    b.lm_corpus.push_back(grammar.sample(rng));
    seen.insert(b.lm_corpus.back().str());
  }
  while (b.references.size() < cfg.test_utterances) {
    auto s = grammar.sample(rng, cfg.rare_rate);
    if (seen.count(s.str())) continue;
    b.references.push_back(std::move(s));
  }
  std::vector<NormalizedText> all;
  for (const auto& w : grammar.words()) all.push_back(NormalizedText::assume_normalized(w));
  b.vocab = textnorm::build_vocab(all);
  for (std::size_t i = 0; i < b.references.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn%04zu", i);
    b.ids.emplace_back(id);
    b.posteriors.push_back(render_posteriors(b.references[i], b.vocab, cfg.noise, rng));
  }
  return b;
}

}  // namespace indoasr::synthetic
