// xlsr_math.hpp
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
// Building-block arithmetic of the XLSR pre-training setup: convolutional
// encoder geometry, Gumbel-Softmax product quantization, span masking, and
// the contrastive and diversity losses. No learned weights.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "indoasr/error.hpp"
#include "indoasr/random.hpp"

namespace indoasr::xlsr {

// ---------------------------------------------------------------------------
// Encoder geometry

struct EncoderConfig {
  int channels = 512;
  std::vector<int> strides{5, 2, 2, 2, 2, 2, 2};
  std::vector<int> kernels{10, 3, 3, 3, 3, 2, 2};
  int sample_rate_hz = 16000;
  int context_dim = 768;
  int latent_dim = 512;
  int transformer_blocks = 12;

  static EncoderConfig base() { return {}; }
  static EncoderConfig large() {
    EncoderConfig c;
    c.context_dim = 1024;
    c.transformer_blocks = 24;
    return c;
  }

  void validate() const {
    if (strides.size() != kernels.size() || strides.empty())
      throw DimensionMismatch("encoder needs one stride per kernel");
    for (std::size_t i = 0; i < strides.size(); ++i)
      if (strides[i] < 1 || kernels[i] < 1) throw DimensionMismatch("strides and kernels must be positive");
  }

  // Samples between consecutive frames.
  long long hop() const {
    return std::accumulate(strides.begin(), strides.end(), 1LL, std::multiplies<>());
  }

  // Samples seen by one output frame.
  long long receptive_field() const {
    long long rf = 1, jump = 1;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      rf += (kernels[i] - 1) * jump;
      jump *= strides[i];
    }
    return rf;
  }

  double frame_period_ms() const { return 1000.0 * double(hop()) / sample_rate_hz; }
  double receptive_field_ms() const { return 1000.0 * double(receptive_field()) / sample_rate_hz; }
};

// floor((L - kernel) / stride) + 1 applied layer by layer.
inline long long frame_count(long long samples, const EncoderConfig& cfg = {}) {
  cfg.validate();
  if (samples < cfg.receptive_field())
    throw TooShort(std::to_string(samples) + " samples is shorter than the " +
                   std::to_string(cfg.receptive_field()) + "-sample receptive field");
  long long len = samples;
  for (std::size_t i = 0; i < cfg.kernels.size(); ++i) len = (len - cfg.kernels[i]) / cfg.strides[i] + 1;
  return len;
}

// ---------------------------------------------------------------------------
// Gumbel-Softmax

struct GumbelSample {
  std::vector<double> soft;
  std::size_t index = 0;     // argmax of the perturbed logits
  std::vector<double> hard;  // one-hot at index
};

inline std::vector<double> softmax(std::span<const double> x, double temperature = 1.0) {
  if (x.empty()) return {};
  const double top = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += out[i] = std::exp((x[i] - top) / temperature);
  for (auto& v : out) v /= sum;
  return out;
}

// Deterministic core: noise is the Gumbel sample per logit.
inline GumbelSample gumbel_softmax(std::span<const double> logits, std::span<const double> noise,
                                   double temperature) {
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
  if (logits.size() != noise.size() || logits.empty())
    throw DimensionMismatch("logits and noise differ in length");
  std::vector<double> perturbed(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) perturbed[i] = logits[i] + noise[i];
  GumbelSample s;
  s.soft = softmax(perturbed, temperature);
  s.index = static_cast<std::size_t>(std::max_element(perturbed.begin(), perturbed.end()) - perturbed.begin());
  s.hard.assign(logits.size(), 0.0);
  s.hard[s.index] = 1.0;
  return s;
}

inline GumbelSample gumbel_softmax(std::span<const double> logits, double temperature, Rng& rng) {
  std::vector<double> noise(logits.size());
  for (auto& g : noise) g = rng.gumbel();
  return gumbel_softmax(logits, noise, temperature);
}

// ---------------------------------------------------------------------------
// Product quantization

struct QuantizerConfig {
  std::size_t groups = 2;
  std::size_t entries = 320;
  double temperature = 2.0;
  std::size_t codeword_dim = 256;  // per group; q has groups * codeword_dim

  // V^G distinct concatenations.
  std::uint64_t unit_count() const {
    std::uint64_t n = 1;
    for (std::size_t g = 0; g < groups; ++g) n *= entries;
    return n;
  }
};

struct Quantizer {
  QuantizerConfig config;
  std::size_t latent_dim = 0;
  std::vector<double> weight;     // (groups * entries) x latent_dim
  std::vector<double> bias;       // groups * entries
  std::vector<double> codewords;  // groups x entries x codeword_dim

  void validate() const {
    const std::size_t rows = config.groups * config.entries;
    if (config.groups == 0 || config.entries == 0 || config.codeword_dim == 0 || latent_dim == 0)
      throw DimensionMismatch("quantizer dimensions must be positive");
    if (weight.size() != rows * latent_dim) throw DimensionMismatch("quantizer weight has the wrong size");
    if (bias.size() != rows) throw DimensionMismatch("quantizer bias has the wrong size");
    if (codewords.size() != rows * config.codeword_dim)
      throw DimensionMismatch("codeword table has the wrong size");
  }

  std::span<const double> codeword(std::size_t group, std::size_t entry) const {
    return std::span<const double>(codewords)
        .subspan((group * config.entries + entry) * config.codeword_dim, config.codeword_dim);
  }

  // Gaussian weights and codewords, zero bias.
  static Quantizer random(const QuantizerConfig& cfg, std::size_t latent_dim, Rng& rng) {
    Quantizer q{cfg, latent_dim, {}, {}, {}};
    const std::size_t rows = cfg.groups * cfg.entries;
    q.weight.resize(rows * latent_dim);
    for (auto& w : q.weight) w = rng.normal() / std::sqrt(double(latent_dim));
    q.bias.assign(rows, 0.0);
    q.codewords.resize(rows * cfg.codeword_dim);
    for (auto& c : q.codewords) c = rng.normal();
    return q;
  }
};

struct Quantized {
  std::vector<double> q;
  std::vector<std::size_t> indices;         // per group
  std::vector<std::vector<double>> probs;   // soft distribution per group
};

inline std::vector<std::vector<double>> quantizer_logits(const Quantizer& quant, std::span<const double> z) {
  quant.validate();
  if (z.size() != quant.latent_dim)
    throw DimensionMismatch("latent has " + std::to_string(z.size()) + " dims, quantizer expects " +
                            std::to_string(quant.latent_dim));
  const auto& c = quant.config;
  std::vector<std::vector<double>> out(c.groups, std::vector<double>(c.entries));
  for (std::size_t g = 0; g < c.groups; ++g)
    for (std::size_t v = 0; v < c.entries; ++v) {
      const std::size_t row = g * c.entries + v;
      double acc = quant.bias[row];
      for (std::size_t k = 0; k < z.size(); ++k) acc += quant.weight[row * quant.latent_dim + k] * z[k];
      out[g][v] = acc;
    }
  return out;
}

// One hard Gumbel-Softmax choice per group; the chosen codewords are
// concatenated in group order.
inline Quantized quantize(std::span<const double> z, const Quantizer& quant, Rng& rng) {
  const auto logits = quantizer_logits(quant, z);
  Quantized out;
  for (std::size_t g = 0; g < logits.size(); ++g) {
    auto s = gumbel_softmax(logits[g], quant.config.temperature, rng);
    const auto cw = quant.codeword(g, s.index);
    out.q.insert(out.q.end(), cw.begin(), cw.end());
    out.indices.push_back(s.index);
    out.probs.push_back(std::move(s.soft));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Span masking

struct MaskConfig {
  double start_prob = 0.0;
  std::size_t span = 10;

  // Start probability p with 1 - (1 - p)^span equal to the target coverage.
  static MaskConfig for_coverage(double coverage, std::size_t span = 10) {
    if (!(coverage > 0.0 && coverage < 1.0) || span == 0) throw Error("coverage must lie in (0, 1)");
    return {1.0 - std::pow(1.0 - coverage, 1.0 / double(span)), span};
  }
  static MaskConfig defaults() { return for_coverage(0.5, 10); }

  double expected_coverage() const { return 1.0 - std::pow(1.0 - start_prob, double(span)); }
};

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * cols, cols); }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(data).subspan(i * cols, cols); }
};

struct Masked {
  Matrix values;
  std::vector<bool> mask;

  double coverage() const {
    return mask.empty() ? 0.0 : double(std::count(mask.begin(), mask.end(), true)) / double(mask.size());
  }
};

// Each frame starts a span with probability start_prob; spans are clipped at
// the end and overlaps merge. Masked rows become the fill vector.
inline Masked apply_mask(const Matrix& latents, const MaskConfig& cfg, std::span<const double> fill, Rng& rng) {
  if (!(cfg.start_prob > 0.0 && cfg.start_prob < 1.0) || cfg.span == 0)
    throw Error("mask start probability must lie in (0, 1) and span must be positive");
  if (fill.size() != latents.cols) throw DimensionMismatch("mask vector width differs from latents");
  Masked out{latents, std::vector<bool>(latents.rows, false)};
  for (std::size_t t = 0; t < latents.rows; ++t) {
    if (!rng.bernoulli(cfg.start_prob)) continue;
    for (std::size_t k = t; k < std::min(latents.rows, t + cfg.span); ++k) out.mask[k] = true;
  }
  for (std::size_t t = 0; t < latents.rows; ++t)
    if (out.mask[t]) std::copy(fill.begin(), fill.end(), out.values.row(t).begin());
  return out;
}

// ---------------------------------------------------------------------------
// Losses

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine of vectors with different lengths");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine similarity of a zero vector");
  return dot(a, b) / (na * nb);
}

struct ContrastiveBatch {
  std::vector<double> context;
  std::vector<double> positive;
  std::vector<std::vector<double>> distractors;  // K = 100 in pre-training
  double temperature = 0.1;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // d loss / d context
};

// -log softmax of the positive among cos(c, q) / temperature.
inline LossAndGradient contrastive_loss(const ContrastiveBatch& b) {
  if (b.distractors.empty()) throw Error("contrastive loss needs at least one distractor");
  if (!(b.temperature > 0.0)) throw Error("temperature must be positive");
  const std::size_t d = b.context.size();
  std::vector<const std::vector<double>*> targets{&b.positive};
  for (const auto& q : b.distractors) targets.push_back(&q);
  for (const auto* q : targets)
    if (q->size() != d) throw DimensionMismatch("contrastive vectors differ in dimension");

  const double nc = norm(b.context);
  if (nc == 0.0) throw ZeroVector("context vector has zero norm");
  std::vector<double> sims(targets.size()), norms(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    sims[i] = cosine(b.context, *targets[i]);
    norms[i] = norm(*targets[i]);
  }
  std::vector<double> logits(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) logits[i] = sims[i] / b.temperature;
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - top);
  const double log_z = top + std::log(z);
  const auto p = softmax(logits);

  LossAndGradient out;
  out.loss = log_z - logits[0];
  out.gradient.assign(d, 0.0);
  // d cos(c, q) / dc = q / (|c||q|) - cos(c, q) c / |c|^2
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double w = (p[i] - (i == 0 ? 1.0 : 0.0)) / b.temperature;
    for (std::size_t k = 0; k < d; ++k)
      out.gradient[k] += w * ((*targets[i])[k] / (nc * norms[i]) - sims[i] * b.context[k] / (nc * nc));
  }
  return out;
}

// Average of per-sample group distributions: samples[s][g] is a distribution.
inline std::vector<std::vector<double>> average_usage(const std::vector<std::vector<std::vector<double>>>& samples) {
  if (samples.empty()) throw EmptyInput("no samples to average");
  auto out = samples.front();
  for (std::size_t s = 1; s < samples.size(); ++s) {
    if (samples[s].size() != out.size()) throw DimensionMismatch("samples differ in group count");
    for (std::size_t g = 0; g < out.size(); ++g) {
      if (samples[s][g].size() != out[g].size()) throw DimensionMismatch("samples differ in codebook size");
      for (std::size_t v = 0; v < out[g].size(); ++v) out[g][v] += samples[s][g][v];
    }
  }
  for (auto& g : out)
    for (auto& v : g) v /= double(samples.size());
  return out;
}

// sum_g (1 - H(p_g) / ln V); 0 for uniform usage, G when every group
// collapses onto one entry.
inline double diversity_loss(const std::vector<std::vector<double>>& usage, double tolerance = 1e-6) {
  if (usage.empty()) throw EmptyInput("no codebook groups");
  double loss = 0.0;
  for (std::size_t g = 0; g < usage.size(); ++g) {
    const auto& p = usage[g];
    if (p.size() < 2) throw DimensionMismatch("codebook groups need at least two entries");
    double sum = 0.0, h = 0.0;
    for (double v : p) {
      if (v < 0.0) throw NotNormalized("group " + std::to_string(g) + " has a negative probability");
      sum += v;
      if (v > 0.0) h -= v * std::log(v);
    }
    if (std::abs(sum - 1.0) > tolerance)
      throw NotNormalized("group " + std::to_string(g) + " sums to " + std::to_string(sum));
    loss += 1.0 - h / std::log(double(p.size()));
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Self-check

inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max |a - b| / max(|a|, |b|) over all coordinates.
inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale > 0.0 ? diff / scale : diff;
}

inline std::vector<double> random_vector(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.normal();
  return v;
}

struct CheckRow {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
};

// Gradient, invariance and limit checks of the quantizer and losses.
inline std::vector<CheckRow> losscheck(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckRow> rows;
  auto row = [&](std::string name, double value, double limit, bool pass) {
    rows.push_back({std::move(name), value, limit, pass});
  };

  double worst_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto logits = random_vector(1 + rng.uniform_index(50), rng);
    const auto s = gumbel_softmax(logits, 0.05 + 5.0 * rng.uniform_open(), rng);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(s.soft.begin(), s.soft.end(), 0.0) - 1.0));
  }
  row("gumbel_softmax sums to one", worst_sum, 1e-9, worst_sum <= 1e-9);

  const std::vector<double> peaked{10.0, 0.0, 0.0};
  std::size_t hits = 0;
  double mass = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = gumbel_softmax(peaked, 0.01, rng);
    hits += s.index == 0;
    mass += s.soft[0] / 1000.0;
  }
  // Two Gumbel draws differ by more than 10 with probability about 4.5e-5.
  row("low temperature one-hot at index 0", double(hits) / 1000.0, 0.995, hits >= 995 && mass >= 0.99);

  {
    ContrastiveBatch b{random_vector(8, rng), {}, {}, 0.1};
    b.positive = b.context;
    for (int k = 0; k < 100; ++k) b.distractors.push_back(b.context);
    const double err = std::abs(contrastive_loss(b).loss - std::log(101.0));
    row("contrastive equal similarity = ln 101", err, 1e-9, err <= 1e-9);
  }

  double worst_grad = 0.0;
  for (int i = 0; i < 50; ++i) {
    ContrastiveBatch b{random_vector(8, rng), random_vector(8, rng), {}, 0.1 + rng.uniform_open()};
    for (int k = 0; k < 100; ++k) b.distractors.push_back(random_vector(8, rng));
    const auto analytic = contrastive_loss(b).gradient;
    const auto numeric = central_difference(
        [&](const std::vector<double>& c) {
          auto copy = b;
          copy.context = c;
          return contrastive_loss(copy).loss;
        },
        b.context);
    worst_grad = std::max(worst_grad, max_relative_error(analytic, numeric));
  }
  row("contrastive gradient vs finite differences", worst_grad, 1e-4, worst_grad < 1e-4);

  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::vector<double>> usage;
    for (int g = 0; g < 2; ++g) {
      auto logits = random_vector(8, rng);
      usage.push_back(softmax(logits, 0.1 + 3.0 * rng.uniform_open()));
    }
    const double l = diversity_loss(usage);
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  row("diversity loss within [0, G]", hi, 2.0, lo >= 0.0 && hi <= 2.0);
  const double uniform = diversity_loss({std::vector<double>(320, 1.0 / 320), std::vector<double>(320, 1.0 / 320)});
  row("diversity loss of uniform usage", std::abs(uniform), 1e-12, std::abs(uniform) <= 1e-12);

  const auto mcfg = MaskConfig::defaults();
  Matrix latents(1000, 4, 1.0);
  const std::vector<double> fill(4, -1.0);
  double covered = 0.0;
  for (int i = 0; i < 200; ++i) covered += apply_mask(latents, mcfg, fill, rng).coverage();
  covered /= 200.0;
  row("mask coverage near one half", covered, 0.05, std::abs(covered - 0.5) <= 0.05);
  return rows;
}

}  // namespace indoasr::xlsr
