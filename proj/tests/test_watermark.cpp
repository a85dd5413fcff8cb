//
// Copyright 2026 The UnlearnLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "unlearnlab/errors.hpp"
#include "unlearnlab/watermark.hpp"

using namespace unlearnlab;
using text::TokenId;

TEST_CASE("partition covers the vocabulary with the requested split") {
  const std::vector<TokenId> ctx = {5};
  const auto part = wm::partition_vocab(1234, ctx, 10, 0.5);
  CHECK(part.green.size() == 5);
  CHECK(part.red.size() == 5);
  std::set<TokenId> all(part.green.begin(), part.green.end());
  all.insert(part.red.begin(), part.red.end());
  CHECK(all.size() == 10);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 9);
}

TEST_CASE("partition is deterministic in key and context") {
  const std::vector<TokenId> ctx = {7, 3};
  const auto a = wm::partition_vocab(99, ctx, 64, 0.25);
  const auto b = wm::partition_vocab(99, ctx, 64, 0.25);
  CHECK(a.green == b.green);
  CHECK(a.red == b.red);

  const auto other_key = wm::partition_vocab(100, ctx, 64, 0.25);
  CHECK(a.green != other_key.green);
}

TEST_CASE("each token is green with frequency one half over contexts") {
  const int vocab = 20;
  const int trials = 10000;
  std::vector<int> green_counts(vocab, 0);
  for (int i = 0; i < trials; ++i) {
    const std::vector<TokenId> ctx = {static_cast<TokenId>(i)};
    const auto part = wm::partition_vocab(4242, ctx, vocab, 0.5);
    for (TokenId id : part.green) ++green_counts[static_cast<size_t>(id)];
  }
  const double sigma = std::sqrt(trials * 0.5 * 0.5);
  for (int k = 0; k < vocab; ++k) {
    CHECK(std::abs(green_counts[k] - trials * 0.5) <= 3.0 * sigma);
  }
}

TEST_CASE("red-list logits get exactly the bias") {
  const std::vector<double> logits = {1.0, 2.0, 3.0};
  const std::vector<TokenId> red = {0, 2};
  const auto biased = wm::kgw_bias_logits(logits, red, 2.0);
  CHECK(biased == std::vector<double>{3.0, 2.0, 5.0});

  const auto unchanged = wm::kgw_bias_logits(logits, red, 0.0);
  CHECK(unchanged == logits);
}

TEST_CASE("bias of two raises red-token softmax mass to e^2/(1+e^2)") {
  const std::vector<double> logits = {0.0, 0.0};
  const std::vector<TokenId> red = {1};
  const auto biased = wm::kgw_bias_logits(logits, red, 2.0);
  const auto probs = lm::softmax(biased);
  const double expected = std::exp(2.0) / (1.0 + std::exp(2.0));
  CHECK(probs[1] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(0.8808).epsilon(1e-4));
}

TEST_CASE("z statistic arithmetic") {
  CHECK(wm::kgw_z(65, 100, 0.5) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(wm::kgw_z(50, 100, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kgw_detect recomputes the per-step red lists") {
  wm::KgwConfig cfg;
  cfg.key = 777;
  const auto seq = testutil::random_seq(5, 32, 20, 40);
  const auto result = wm::kgw_detect(seq, cfg, 32);
  CHECK(result.n_tokens == static_cast<int64_t>(seq.ids.size()) - 1);

  // independent recount
  int64_t n_red = 0;
  for (size_t t = 1; t < seq.ids.size(); ++t) {
    const std::vector<TokenId> window = {seq.ids[t - 1]};
    const auto part = wm::partition_vocab(cfg.key, window, 32, 0.5);
    bool in_red = false;
    for (TokenId id : part.red) in_red = in_red || id == seq.ids[t];
    if (in_red) ++n_red;
  }
  CHECK(result.score_mean ==
        doctest::Approx(static_cast<double>(n_red) /
                        static_cast<double>(result.n_tokens)));
  CHECK(result.statistic ==
        doctest::Approx(wm::kgw_z(n_red, result.n_tokens, 0.5)));
}

TEST_CASE("detectors need at least two tokens") {
  wm::KgwConfig kgw;
  wm::SynthidConfig sid;
  text::TokenSeq seq;
  seq.ids = {1};
  CHECK_THROWS_AS(wm::kgw_detect(seq, kgw, 8), InsufficientTokensError);
  CHECK_THROWS_AS(wm::synthid_detect(seq, sid), InsufficientTokensError);
}

TEST_CASE("g bits are deterministic, fair, and layer-independent") {
  CHECK(wm::g_score(1, 2, 3, 1) == wm::g_score(1, 2, 3, 1));

  rng::Xoshiro256pp rng(8);
  const int n = 10000;
  int sum = 0;
  double corr_xy = 0, sum_x = 0, sum_y = 0, sum_xx = 0, sum_yy = 0;
  for (int i = 0; i < n; ++i) {
    const uint64_t rt = rng.next_u64();
    const TokenId token = static_cast<TokenId>(rng.below(512));
    const int g1 = wm::g_score(31337, rt, token, 1);
    const int g2 = wm::g_score(31337, rt, token, 2);
    sum += g1;
    sum_x += g1;
    sum_y += g2;
    sum_xx += g1 * g1;
    sum_yy += g2 * g2;
    corr_xy += g1 * g2;
  }
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(sum - n * 0.5) <= 3.0 * sigma);

  const double mx = sum_x / n, my = sum_y / n;
  const double cov = corr_xy / n - mx * my;
  const double sx = std::sqrt(sum_xx / n - mx * mx);
  const double sy = std::sqrt(sum_yy / n - my * my);
  CHECK(std::abs(cov / (sx * sy)) <= 0.05);
}

TEST_CASE("rt depends only on the context window") {
  const std::vector<TokenId> a = {9, 1, 2, 3, 4};
  const std::vector<TokenId> b = {8, 1, 2, 3, 4};  // differs outside width 4
  CHECK(wm::derive_rt(5, a, 4) == wm::derive_rt(5, a, 4));
  CHECK(wm::derive_rt(5, a, 4) == wm::derive_rt(5, b, 4));

  const std::vector<TokenId> c = {9, 1, 2, 3, 5};  // differs inside
  CHECK(wm::derive_rt(5, a, 4) != wm::derive_rt(5, c, 4));

  // collision scan
  rng::Xoshiro256pp rng(11);
  int collisions = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<TokenId> x = {static_cast<TokenId>(rng.below(1 << 20))};
    std::vector<TokenId> y = {static_cast<TokenId>(rng.below(1 << 20))};
    if (x == y) continue;
    if (wm::derive_rt(5, x, 1) == wm::derive_rt(5, y, 1)) ++collisions;
  }
  CHECK(collisions == 0);
}

TEST_CASE("short contexts are BOS-padded for rt derivation") {
  const std::vector<TokenId> one = {7};
  const std::vector<TokenId> padded = {text::Specials::kBos,
                                       text::Specials::kBos,
                                       text::Specials::kBos, 7};
  CHECK(wm::derive_rt(5, one, 4) == wm::derive_rt(5, padded, 4));
}

TEST_CASE("single-layer tournament picks the higher bit") {
  const std::vector<TokenId> candidates = {10, 20};
  const auto win_first = [](uint64_t, TokenId token, int) {
    return token == 10 ? 1 : 0;
  };
  CHECK(wm::tournament_select_with(candidates, 0, 1, win_first) == 10);

  const auto win_second = [](uint64_t, TokenId token, int) {
    return token == 20 ? 1 : 0;
  };
  CHECK(wm::tournament_select_with(candidates, 0, 1, win_second) == 20);

  // ties go to the earlier index
  const auto constant = [](uint64_t, TokenId, int) { return 1; };
  CHECK(wm::tournament_select_with(candidates, 0, 1, constant) == 10);
}

TEST_CASE("tournament of identical candidates returns that token") {
  const std::vector<TokenId> candidates = {4, 4, 4, 4};
  CHECK(wm::tournament_select(candidates, 123, 456, 2) == 4);
}

TEST_CASE("two-layer tournament matches the enumerated bracket") {
  for (uint64_t trial = 0; trial < 50; ++trial) {
    const uint64_t key = 1000 + trial;
    const uint64_t rt = 2000 + trial;
    const std::vector<TokenId> pool = {1, 2, 3, 4};
    const TokenId got = wm::tournament_select(pool, rt, key, 2);

    auto duel = [&](TokenId a, TokenId b, int layer) {
      return wm::g_score(key, rt, a, layer) >= wm::g_score(key, rt, b, layer)
                 ? a
                 : b;
    };
    const TokenId w1 = duel(pool[0], pool[1], 1);
    const TokenId w2 = duel(pool[2], pool[3], 1);
    CHECK(got == duel(w1, w2, 2));
  }
}

TEST_CASE("pool size must be a power of two matching the depth") {
  const std::vector<TokenId> pool = {1, 2, 3};
  CHECK_THROWS_AS(wm::tournament_select(pool, 1, 2, 2), ConfigError);
}

TEST_CASE("point-mass pools always return the forced token") {
  auto params = lm::ModelParams::zeros(
      lm::Dims{.vocab = 8, .embed = 3, .hidden = 4, .context = 4});
  params.b2[6] = 1e9;
  wm::SynthidConfig cfg;
  cfg.layers = 3;
  const std::vector<TokenId> preceding = {1, 2};
  rng::Xoshiro256pp rng(1);
  for (int i = 0; i < 20; ++i) {
    CHECK(wm::synthid_sample_step(params, preceding, cfg, rng) == 6);
  }
}

TEST_CASE("constant-g tournament sampling preserves the base distribution") {
  auto params = lm::ModelParams::zeros(
      lm::Dims{.vocab = 4, .embed = 3, .hidden = 4, .context = 4});
  params.b2 = {0.4, -0.5, 1.0, 0.1};
  wm::SynthidConfig cfg;
  cfg.layers = 3;
  const std::vector<TokenId> preceding = {0};
  const auto probs =
      lm::softmax(lm::forward(params, lm::context_at(preceding, 1, 4)).logits);

  const wm::GScorer constant = [](uint64_t, TokenId, int) { return 1; };
  rng::Xoshiro256pp rng(5);
  const int n = 50000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) {
    ++counts[static_cast<size_t>(
        wm::synthid_sample_step_scored(params, preceding, cfg, rng,
                                       constant))];
  }
  for (int k = 0; k < 4; ++k) {
    const double sigma = std::sqrt(n * probs[k] * (1.0 - probs[k]));
    CHECK(std::abs(counts[k] - n * probs[k]) <= 3.0 * sigma);
  }
}

TEST_CASE("synthid detector scores clean text near the null") {
  wm::SynthidConfig cfg;
  cfg.layers = 4;
  cfg.key = 97531;
  const auto seq = testutil::random_seq(21, 64, 200, 200);
  const auto result = wm::synthid_detect(seq, cfg);
  const double n_scores =
      static_cast<double>(result.n_tokens) * cfg.layers;
  CHECK(std::abs(result.score_mean - 0.5) <= 3.0 * 0.5 / std::sqrt(n_scores));
  CHECK(std::abs(result.statistic) <= 3.0);
  CHECK_FALSE(result.watermarked);
}

TEST_CASE("all-ones g bits give a mean score of exactly one") {
  wm::SynthidConfig cfg;
  cfg.layers = 2;
  const auto seq = testutil::random_seq(3, 16, 50, 50);
  const wm::GScorer ones = [](uint64_t, TokenId, int) { return 1; };
  const auto result = wm::synthid_detect_scored(seq, cfg, ones);
  CHECK(result.score_mean == 1.0);
  CHECK(result.watermarked);
}

TEST_CASE("watermarked text outscores clean text in paired trials") {
  auto params = testutil::random_tiny_model(31, /*vocab=*/32,
                                            /*embed=*/4, /*hidden=*/8);
  params.b2[text::Specials::kEos] = -1e9;  // full-length generations
  wm::SynthidConfig cfg;
  cfg.layers = 4;
  cfg.key = 2468;
  const wm::SynthidDecoder wm_dec(cfg);
  const lm::PlainDecoder plain;
  int wins = 0;
  const int trials = 100;
  for (int i = 0; i < trials; ++i) {
    text::TokenSeq prompt;
    prompt.ids = {static_cast<TokenId>(i % 32)};
    rng::Xoshiro256pp r1(9000 + i);
    rng::Xoshiro256pp r2(9100 + i);
    const auto marked = lm::sample(params, prompt, wm_dec, 200, r1);
    const auto clean = lm::sample(params, prompt, plain, 200, r2);
    if (marked.ids.size() < 2 || clean.ids.size() < 2) continue;
    if (wm::synthid_detect(marked, cfg).statistic >
        wm::synthid_detect(clean, cfg).statistic) {
      ++wins;
    }
  }
  CHECK(wins >= 95);
}

TEST_CASE("deeper tournaments raise the mean detector statistic") {
  auto params = testutil::random_tiny_model(77, /*vocab=*/32,
                                            /*embed=*/4, /*hidden=*/8);
  params.b2[text::Specials::kEos] = -1e9;
  auto mean_stat = [&](int layers) {
    wm::SynthidConfig cfg;
    cfg.layers = layers;
    cfg.key = 1357;
    const wm::SynthidDecoder dec(cfg);
    double sum = 0.0;
    int counted = 0;
    const int trials = 50;
    for (int i = 0; i < trials; ++i) {
      text::TokenSeq prompt;
      prompt.ids = {static_cast<TokenId>(i % 32)};
      rng::Xoshiro256pp rng(5000 + i);
      const auto out = lm::sample(params, prompt, dec, 150, rng);
      if (out.ids.size() < 2) continue;  // EOS can fire immediately
      sum += wm::synthid_detect(out, cfg).statistic;
      ++counted;
    }
    return sum / counted;
  };
  CHECK(mean_stat(2) < mean_stat(6));
}

TEST_CASE("kgw decode with zero bias equals plain decode bit-for-bit") {
  const auto params = testutil::random_tiny_model(55, /*vocab=*/16);
  wm::KgwConfig cfg;
  cfg.delta = 0.0;
  cfg.key = 808;
  const wm::KgwDecoder kgw(cfg);
  const lm::PlainDecoder plain;
  text::TokenSeq prompt;
  prompt.ids = {3, 1};
  rng::Xoshiro256pp r1(123);
  rng::Xoshiro256pp r2(123);
  const auto a = lm::sample(params, prompt, kgw, 64, r1);
  const auto b = lm::sample(params, prompt, plain, 64, r2);
  CHECK(a.ids == b.ids);
}

TEST_CASE("config json round-trips") {
  wm::KgwConfig kgw;
  kgw.delta = 4.0;
  kgw.key = 0xDEADBEEF;
  const auto kgw_round =
      wm::watermark_config_from_json(wm::watermark_config_to_json(kgw));
  const auto& kgw2 = std::get<wm::KgwConfig>(kgw_round);
  CHECK(kgw2.delta == 4.0);
  CHECK(kgw2.key == 0xDEADBEEF);

  wm::SynthidConfig sid;
  sid.layers = 6;
  sid.key = 42;
  const auto sid_round =
      wm::watermark_config_from_json(wm::watermark_config_to_json(sid));
  const auto& sid2 = std::get<wm::SynthidConfig>(sid_round);
  CHECK(sid2.layers == 6);
  CHECK(sid2.key == 42);

  CHECK_THROWS_AS(wm::watermark_config_from_json("{\"type\":\"nope\"}"),
                  ConfigError);
}

TEST_CASE("clean-text false positive rate stays at or below five percent") {
  wm::KgwConfig kgw;
  kgw.key = 13579;
  wm::SynthidConfig sid;
  sid.layers = 4;
  sid.key = 13579;
  int kgw_fp = 0;
  int sid_fp = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    const auto seq = testutil::random_seq(4000 + i, 64, 200, 200);
    if (wm::kgw_detect(seq, kgw, 64).watermarked) ++kgw_fp;
    if (wm::synthid_detect(seq, sid).watermarked) ++sid_fp;
  }
  CHECK(kgw_fp <= 10);
  CHECK(sid_fp <= 10);
}
