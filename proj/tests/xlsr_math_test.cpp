// xlsr_math_test.cpp
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

#include "indoasr/xlsr_math.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace {

using namespace indoasr::xlsr;
using indoasr::Rng;

TEST(Geometry, HopAndReceptiveField) {
  const EncoderConfig c;
  EXPECT_EQ(c.hop(), 320);
  EXPECT_EQ(c.receptive_field(), 400);
  EXPECT_DOUBLE_EQ(c.frame_period_ms(), 20.0);
  EXPECT_DOUBLE_EQ(c.receptive_field_ms(), 25.0);
  EXPECT_EQ(EncoderConfig::large().context_dim, 1024);
  EXPECT_EQ(EncoderConfig::large().transformer_blocks, 24);
  EXPECT_EQ(EncoderConfig::base().context_dim, 768);
}

TEST(Geometry, FrameCounts) {
  EXPECT_EQ(frame_count(400), 1);
  // 16000 -> 3199 -> 1599 -> 799 -> 399 -> 199 -> 99 -> 49
  EXPECT_EQ(frame_count(16000), 49);
  EXPECT_THROW(frame_count(399), indoasr::TooShort);
  EXPECT_THROW(frame_count(0), indoasr::TooShort);
}

TEST(Geometry, MatchesSlidingWindowSimulation) {
  const EncoderConfig c;
  for (long long n = 400; n <= 2000; ++n)
    ASSERT_EQ(frame_count(n), oracle::simulate_frames(n, c.kernels, c.strides)) << n;
  for (long long n : {16000LL, 48000LL, 160000LL, 160001LL, 160319LL, 160320LL})
    EXPECT_EQ(frame_count(n), oracle::simulate_frames(n, c.kernels, c.strides)) << n;
}

TEST(Gumbel, SoftOutputIsADistribution) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto logits = random_vector(1 + rng.uniform_index(40), rng);
    const auto s = gumbel_softmax(logits, 0.5 + 2.0 * rng.uniform_open(), rng);
    ASSERT_NEAR(std::accumulate(s.soft.begin(), s.soft.end(), 0.0), 1.0, 1e-9);
    for (double p : s.soft) {
      ASSERT_GT(p, 0.0);
      ASSERT_LT(p, logits.size() == 1 ? 1.0 + 1e-12 : 1.0);
    }
    ASSERT_EQ(s.hard[s.index], 1.0);
    ASSERT_EQ(std::accumulate(s.hard.begin(), s.hard.end(), 0.0), 1.0);
  }
  Rng bad(2);
  EXPECT_THROW(gumbel_softmax(std::vector<double>{1.0}, 0.0, bad), indoasr::Error);
}

TEST(Gumbel, LowTemperatureIsOneHot) {
  Rng rng(53);
  const std::vector<double> logits{10.0, 0.0, 0.0};
  int hits = 0;
  double mass = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = gumbel_softmax(logits, 0.01, rng);
    hits += s.index == 0;
    mass += s.soft[0];
  }
  // A flip needs a Gumbel gap above 10 (probability about 4.5e-5 per pair).
  EXPECT_GE(hits, 995);
  EXPECT_GE(mass / 1000.0, 0.99);
}

TEST(Gumbel, CoolingSharpensTheMaximum) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto logits = random_vector(6, rng);
    std::vector<double> noise(6);
    for (auto& g : noise) g = rng.gumbel();
    double prev = 0.0;
    for (double tau = 10.0; tau > 0.01; tau *= 0.8) {
      const auto s = gumbel_softmax(logits, noise, tau);
      const double top = *std::max_element(s.soft.begin(), s.soft.end());
      ASSERT_GE(top, prev - 1e-15);
      prev = top;
    }
  }
}

TEST(Gumbel, EqualLogitsPickUniformly) {
  Rng rng(17);
  const std::size_t V = 4, n = 100000;
  const std::vector<double> logits(V, 0.3);
  std::vector<std::size_t> freq(V, 0);
  for (std::size_t i = 0; i < n; ++i) ++freq[gumbel_softmax(logits, 1.0, rng).index];
  const double mean = double(n) / V;
  const double sigma = std::sqrt(double(n) * (1.0 / V) * (1.0 - 1.0 / V));
  for (auto f : freq) EXPECT_LT(std::abs(double(f) - mean), 3.0 * sigma) << f;
}

Quantizer engineered(std::size_t pick0, std::size_t pick1) {
  Rng rng(3);
  Quantizer q = Quantizer::random({2, 3, 0.01, 2}, 4, rng);
  std::fill(q.weight.begin(), q.weight.end(), 0.0);
  q.bias[0 * 3 + pick0] = 60.0;
  q.bias[1 * 3 + pick1] = 60.0;
  return q;
}

TEST(Quantize, LimitPicksArgmaxCodewords) {
  Rng rng(8);
  const std::vector<double> z{0.1, -0.2, 0.3, 0.4};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      const auto quant = engineered(a, b);
      const auto out = quantize(z, quant, rng);
      std::vector<double> expect;
      for (auto [g, e] : {std::pair{std::size_t{0}, a}, std::pair{std::size_t{1}, b}}) {
        const auto cw = quant.codeword(g, e);
        expect.insert(expect.end(), cw.begin(), cw.end());
      }
      EXPECT_EQ(out.q, expect);
      EXPECT_EQ(out.indices, (std::vector<std::size_t>{a, b}));
      ASSERT_EQ(out.probs.size(), 2u);
      EXPECT_NEAR(out.probs[0][a], 1.0, 1e-12);
    }
}

TEST(Quantize, LogitsAreAffineInTheLatent) {
  Rng rng(4);
  auto quant = Quantizer::random({2, 5, 1.0, 3}, 6, rng);
  for (double b : quant.bias) EXPECT_EQ(b, 0.0);
  const auto z = random_vector(6, rng);
  const auto logits = quantizer_logits(quant, z);
  for (std::size_t g = 0; g < 2; ++g)
    for (std::size_t v = 0; v < 5; ++v) {
      double expect = 0.0;
      for (std::size_t k = 0; k < 6; ++k) expect += quant.weight[(g * 5 + v) * 6 + k] * z[k];
      EXPECT_NEAR(logits[g][v], expect, 1e-12);
    }
  quant.bias[7] = 2.5;
  EXPECT_NEAR(quantizer_logits(quant, z)[1][2], logits[1][2] + 2.5, 1e-12);
}

TEST(Quantize, PaperCodebookHas102400Units) {
  const QuantizerConfig cfg{2, 320, 2.0, 2};
  EXPECT_EQ(cfg.unit_count(), 102400u);
  Rng rng(6);
  const auto quant = Quantizer::random(cfg, 4, rng);
  std::set<std::vector<double>> distinct;
  for (std::size_t a = 0; a < 320; ++a)
    for (std::size_t b = 0; b < 320; ++b) {
      std::vector<double> q;
      for (auto [g, e] : {std::pair{std::size_t{0}, a}, std::pair{std::size_t{1}, b}}) {
        const auto cw = quant.codeword(g, e);
        q.insert(q.end(), cw.begin(), cw.end());
      }
      distinct.insert(std::move(q));
    }
  EXPECT_EQ(distinct.size(), 102400u);
}

TEST(Quantize, SeededRunsAgree) {
  Rng setup(9);
  const auto quant = Quantizer::random({2, 320, 2.0, 8}, 16, setup);
  const auto z = random_vector(16, setup);
  Rng a(123), b(123);
  const auto qa = quantize(z, quant, a), qb = quantize(z, quant, b);
  EXPECT_EQ(qa.q, qb.q);
  EXPECT_EQ(qa.indices, qb.indices);
  EXPECT_EQ(qa.q.size(), 16u);
}

TEST(Quantize, DimensionChecks) {
  Rng rng(10);
  auto quant = Quantizer::random({2, 3, 1.0, 2}, 4, rng);
  EXPECT_THROW(quantize(std::vector<double>(5, 1.0), quant, rng), indoasr::DimensionMismatch);
  quant.codewords.pop_back();
  EXPECT_THROW(quantize(std::vector<double>(4, 1.0), quant, rng), indoasr::DimensionMismatch);
}

TEST(Mask, DefaultsGiveHalfCoverage) {
  const auto cfg = MaskConfig::defaults();
  EXPECT_EQ(cfg.span, 10u);
  EXPECT_NEAR(cfg.start_prob, 1.0 - std::pow(0.5, 0.1), 1e-15);
  EXPECT_NEAR(cfg.start_prob, 0.066967, 1e-6);
  EXPECT_NEAR(cfg.expected_coverage(), 0.5, 1e-12);
}

TEST(Mask, MonteCarloCoverageMatchesFormula) {
  const auto cfg = MaskConfig::defaults();
  const std::size_t T = 1000;
  // Frame t can be covered by starts in [t - M + 1, t], fewer near the front.
  double exact = 0.0;
  for (std::size_t t = 0; t < T; ++t)
    exact += 1.0 - std::pow(1.0 - cfg.start_prob, double(std::min(t + 1, cfg.span)));
  exact /= double(T);

  Rng rng(53);
  const Matrix latents(T, 3, 0.25);
  const std::vector<double> fill{1.0, 2.0, 3.0};
  // Single runs scatter by about 0.1 because spans correlate neighbouring
  // frames; the mean over runs is what is pinned.
  double sum = 0.0;
  for (int run = 0; run < 200; ++run) sum += apply_mask(latents, cfg, fill, rng).coverage();
  const double mean = sum / 200.0;
  EXPECT_GE(mean, 0.45);
  EXPECT_LE(mean, 0.55);
  EXPECT_NEAR(mean, exact, 0.01);
}

TEST(Mask, RowsAndSpans) {
  Rng rng(12);
  Matrix latents(300, 4);
  for (auto& v : latents.data) v = rng.normal();
  const std::vector<double> fill{9.0, -9.0, 0.5, 0.0};
  const MaskConfig cfg{0.05, 7};
  const auto m = apply_mask(latents, cfg, fill, rng);
  for (std::size_t t = 0; t < 300; ++t) {
    const auto got = m.values.row(t);
    const auto want = m.mask[t] ? std::span<const double>(fill) : latents.row(t);
    ASSERT_TRUE(std::equal(got.begin(), got.end(), want.begin()));
  }
  // Every masked run is at least one span long unless it reaches the end.
  for (std::size_t t = 0; t < 300;) {
    if (!m.mask[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end < 300 && m.mask[end]) ++end;
    if (end < 300) {
      EXPECT_GE(end - t, 7u);
    }
    t = end;
  }

  Rng r2(13);
  const auto sparse = apply_mask(Matrix(1000, 2), MaskConfig{1e-4, 1}, std::vector<double>{1.0, 1.0}, r2);
  EXPECT_LT(sparse.coverage(), 0.01);
  EXPECT_THROW(apply_mask(latents, MaskConfig{0.0, 10}, fill, rng), indoasr::Error);
  EXPECT_THROW(apply_mask(latents, cfg, std::vector<double>{1.0}, rng), indoasr::DimensionMismatch);
}

ContrastiveBatch random_batch(Rng& rng, std::size_t d = 8, std::size_t k = 100) {
  ContrastiveBatch b{random_vector(d, rng), random_vector(d, rng), {}, 0.1 + rng.uniform_open()};
  for (std::size_t i = 0; i < k; ++i) b.distractors.push_back(random_vector(d, rng));
  return b;
}

TEST(Contrastive, EqualSimilaritiesGiveLogOfCount) {
  Rng rng(20);
  ContrastiveBatch b{random_vector(8, rng), random_vector(8, rng), {}, 0.1};
  for (int i = 0; i < 100; ++i) {
    auto q = b.positive;
    for (auto& x : q) x *= 1.0 + i;  // same direction, different length
    b.distractors.push_back(q);
  }
  EXPECT_NEAR(contrastive_loss(b).loss, std::log(101.0), 1e-9);
}

TEST(Contrastive, ClosedFormOrthogonalCase) {
  Rng rng(21);
  ContrastiveBatch b{{2.0, 0.0, 0.0, 0.0}, {2.0, 0.0, 0.0, 0.0}, {}, 1.0};
  for (int i = 0; i < 100; ++i) {
    auto q = random_vector(4, rng);
    q[0] = 0.0;
    b.distractors.push_back(q);
  }
  const double e = std::numbers::e;
  EXPECT_NEAR(contrastive_loss(b).loss, -std::log(e / (e + 100.0)), 1e-12);
}

TEST(Contrastive, AnalyticGradientMatchesFiniteDifferences) {
  Rng rng(22);
  for (int i = 0; i < 50; ++i) {
    const auto b = random_batch(rng);
    const auto analytic = contrastive_loss(b).gradient;
    const auto numeric = oracle::finite_difference_gradient(
        [&](const std::vector<double>& c) {
          auto copy = b;
          copy.context = c;
          return contrastive_loss(copy).loss;
        },
        b.context);
    ASSERT_LT(oracle::relative_error(analytic, numeric), 1e-4) << "batch " << i;
  }
}

TEST(Contrastive, MonotoneInPositiveAndDistractorSimilarity) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto b = random_batch(rng, 6, 10);
    b.context = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    auto at_angle = [](double theta) {
      return std::vector<double>{std::cos(theta), std::sin(theta), 0.0, 0.0, 0.0, 0.0};
    };
    double prev = std::numeric_limits<double>::infinity();
    for (double theta = 3.0; theta >= 0.0; theta -= 0.1) {
      b.positive = at_angle(theta);
      const double l = contrastive_loss(b).loss;
      ASSERT_LT(l, prev);
      prev = l;
    }
    const auto keep = b.distractors[3];
    prev = -std::numeric_limits<double>::infinity();
    for (double theta = 3.0; theta >= 0.0; theta -= 0.1) {
      b.distractors[3] = at_angle(theta);
      const double l = contrastive_loss(b).loss;
      ASSERT_GT(l, prev);
      prev = l;
    }
    b.distractors[3] = keep;
    ASSERT_GE(contrastive_loss(b).loss, 0.0);
  }
}

TEST(Contrastive, Errors) {
  Rng rng(24);
  auto b = random_batch(rng, 4, 3);
  auto zero = b;
  zero.context.assign(4, 0.0);
  EXPECT_THROW(contrastive_loss(zero), indoasr::ZeroVector);
  zero = b;
  zero.distractors[1].assign(4, 0.0);
  EXPECT_THROW(contrastive_loss(zero), indoasr::ZeroVector);
  auto wide = b;
  wide.positive.push_back(1.0);
  EXPECT_THROW(contrastive_loss(wide), indoasr::DimensionMismatch);
  auto none = b;
  none.distractors.clear();
  EXPECT_THROW(contrastive_loss(none), indoasr::Error);
}

TEST(Diversity, StatedValues) {
  const std::vector<double> uniform(320, 1.0 / 320);
  EXPECT_NEAR(diversity_loss({uniform, uniform}), 0.0, 1e-12);
  std::vector<double> one_hot(320, 0.0);
  one_hot[17] = 1.0;
  EXPECT_DOUBLE_EQ(diversity_loss({one_hot, one_hot}), 2.0);
  EXPECT_NEAR(diversity_loss({{0.5, 0.5, 0.0, 0.0}}), 1.0 - std::log(2.0) / std::log(4.0), 1e-15);
  EXPECT_NEAR(diversity_loss({{0.5, 0.5, 0.0, 0.0}}), 0.5, 1e-15);
}

TEST(Diversity, BoundedAndPermutationInvariant) {
  Rng rng(25);
  for (int i = 0; i < 500; ++i) {
    const std::size_t G = 1 + rng.uniform_index(3), V = 2 + rng.uniform_index(10);
    std::vector<std::vector<std::vector<double>>> samples;
    for (int s = 0; s < 5; ++s) {
      std::vector<std::vector<double>> groups;
      for (std::size_t g = 0; g < G; ++g) groups.push_back(softmax(random_vector(V, rng), 0.05 + rng.uniform_open()));
      samples.push_back(groups);
    }
    auto usage = average_usage(samples);
    const double l = diversity_loss(usage);
    ASSERT_GE(l, -1e-12);
    ASSERT_LE(l, double(G) + 1e-12);
    for (auto& g : usage) rng.shuffle(std::span(g));
    ASSERT_NEAR(diversity_loss(usage), l, 1e-12);
  }
}

TEST(Diversity, Errors) {
  EXPECT_THROW(diversity_loss({{0.5, 0.4}}), indoasr::NotNormalized);
  EXPECT_THROW(diversity_loss({{1.2, -0.2}}), indoasr::NotNormalized);
  EXPECT_THROW(diversity_loss({}), indoasr::EmptyInput);
}

TEST(LossCheck, AllRowsPass) {
  for (std::uint64_t seed : {1ull, 53ull}) {
    const auto rows = losscheck(seed);
    EXPECT_EQ(rows.size(), 7u);
    for (const auto& r : rows) EXPECT_TRUE(r.pass) << r.name << " " << r.value;
  }
}

}  // namespace
