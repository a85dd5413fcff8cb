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

#include <algorithm>
#include <cmath>

#include "test_util.hpp"
#include "unlearnlab/errors.hpp"
#include "unlearnlab/perturb.hpp"

using namespace unlearnlab;
using text::Specials;
using text::TokenId;

namespace {

text::TokenSeq make_seq(std::vector<TokenId> ids, const std::string& id) {
  text::TokenSeq seq;
  seq.ids = std::move(ids);
  seq.source_id = id;
  return seq;
}

size_t count_masks(const text::TokenSeq& seq) {
  return static_cast<size_t>(
      std::count(seq.ids.begin(), seq.ids.end(), Specials::kMask));
}

text::Corpus forget_corpus(int n_docs, uint64_t seed, int vocab = 32) {
  text::Corpus corpus;
  corpus.role = text::CorpusRole::kForget;
  for (int i = 0; i < n_docs; ++i) {
    auto seq = testutil::random_seq(seed + i, vocab, 5, 12);
    seq.source_id = "doc" + std::to_string(i);
    // keep MASK out of the raw docs so mask counts are unambiguous
    for (auto& id : seq.ids) {
      if (id == Specials::kMask) id = Specials::kMask + 4;
    }
    corpus.docs.push_back(std::move(seq));
  }
  return corpus;
}

}  // namespace

TEST_CASE("mask ratio zero is the identity") {
  const auto seq = make_seq({5, 6, 7, 8}, "d");
  rng::Xoshiro256pp rng(1);
  const auto out = perturb::mask_sample(seq, 0.0, rng);
  CHECK(out.ids == seq.ids);
}

TEST_CASE("mask ratio one masks everything") {
  const auto seq = make_seq({5, 6, 7, 8, 9}, "d");
  rng::Xoshiro256pp rng(1);
  const auto out = perturb::mask_sample(seq, 1.0, rng);
  REQUIRE(out.ids.size() == 5);
  CHECK(count_masks(out) == 5);
}

TEST_CASE("mask count is exactly round(ratio * length)") {
  rng::Xoshiro256pp meta(9);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t len = 1 + meta.below(40);
    const double ratio = meta.uniform();
    auto seq = testutil::random_seq(3000 + trial, 64, len, len);
    for (auto& id : seq.ids) {
      if (id == Specials::kMask) id = Specials::kMask + 7;
    }
    rng::Xoshiro256pp rng(trial);
    const auto out = perturb::mask_sample(seq, ratio, rng);
    const auto expected = static_cast<size_t>(
        std::floor(ratio * static_cast<double>(len) + 0.5));
    CHECK(count_masks(out) == expected);
    CHECK(out.ids.size() == seq.ids.size());
  }
}

TEST_CASE("masked positions match an independent Fisher-Yates oracle") {
  const size_t len = 10;
  const double ratio = 0.3;
  auto seq = make_seq({10, 11, 12, 13, 14, 15, 16, 17, 18, 19}, "d");
  rng::Xoshiro256pp rng(42);
  const auto out = perturb::mask_sample(seq, ratio, rng);
  CHECK(count_masks(out) == 3);

  // oracle: same shuffle contract, independently coded
  std::vector<size_t> order(len);
  for (size_t i = 0; i < len; ++i) order[i] = i;
  rng::Xoshiro256pp oracle_rng(42);
  for (size_t i = len - 1; i > 0; --i) {
    const size_t j = oracle_rng.below(i + 1);
    const size_t tmp = order[i];
    order[i] = order[j];
    order[j] = tmp;
  }
  for (size_t i = 0; i < 3; ++i) {
    CHECK(out.ids[order[i]] == Specials::kMask);
  }
  // and determinism: same seed, same bytes
  rng::Xoshiro256pp rng2(42);
  CHECK(perturb::mask_sample(seq, ratio, rng2).ids == out.ids);
}

TEST_CASE("mask rejects out-of-range ratios") {
  const auto seq = make_seq({1, 2, 3}, "d");
  rng::Xoshiro256pp rng(1);
  CHECK_THROWS_AS(perturb::mask_sample(seq, -0.1, rng), ConfigError);
  CHECK_THROWS_AS(perturb::mask_sample(seq, 1.1, rng), ConfigError);
}

TEST_CASE("perturb_corpus preserves document count and ids") {
  const auto corpus = forget_corpus(7, 100);
  perturb::PerturbSpec spec;
  spec.kind = perturb::PerturbKind::kMask;
  spec.mask_ratio = 0.3;
  spec.seed = 5;
  const auto out = perturb::perturb_corpus(corpus, spec, {});
  REQUIRE(out.docs.size() == corpus.docs.size());
  size_t total_masks = 0;
  size_t expected = 0;
  for (size_t i = 0; i < out.docs.size(); ++i) {
    CHECK(out.docs[i].source_id == corpus.docs[i].source_id);
    CHECK(out.docs[i].ids.size() == corpus.docs[i].ids.size());
    total_masks += count_masks(out.docs[i]);
    expected += static_cast<size_t>(std::floor(
        0.3 * static_cast<double>(corpus.docs[i].ids.size()) + 0.5));
  }
  CHECK(total_masks == expected);
}

TEST_CASE("identity perturbation returns an equal corpus") {
  const auto corpus = forget_corpus(4, 200);
  const auto out = perturb::perturb_corpus(corpus, perturb::PerturbSpec{}, {});
  REQUIRE(out.docs.size() == corpus.docs.size());
  for (size_t i = 0; i < out.docs.size(); ++i) {
    CHECK(out.docs[i].ids == corpus.docs[i].ids);
  }
}

TEST_CASE("perturbation is deterministic in the spec seed") {
  const auto corpus = forget_corpus(5, 300);
  perturb::PerturbSpec spec;
  spec.kind = perturb::PerturbKind::kMask;
  spec.mask_ratio = 0.5;
  spec.seed = 77;
  const auto a = perturb::perturb_corpus(corpus, spec, {});
  const auto b = perturb::perturb_corpus(corpus, spec, {});
  for (size_t i = 0; i < a.docs.size(); ++i) {
    CHECK(a.docs[i].ids == b.docs[i].ids);
  }
}

TEST_CASE("perturbation only applies to forget corpora") {
  auto corpus = forget_corpus(2, 400);
  corpus.role = text::CorpusRole::kRetain;
  CHECK_THROWS_AS(perturb::perturb_corpus(corpus, perturb::PerturbSpec{}, {}),
                  ConfigError);
}

TEST_CASE("rule rewrite substitutes unprotected synonyms only") {
  const auto vocab =
      text::build_vocab({"important crucial job anthrax x risk"}, 32);
  perturb::RewriteLexicon lexicon = perturb::RewriteLexicon::build(
      {{"important", "crucial"}, {"anthrax", "x"}}, {"anthrax"}, vocab);

  // forced substitution: scan seeds until the coin lands on swap for the
  // first token, then check the protected token never changes
  const auto seq = text::tokenize("important job", vocab);
  bool swapped = false;
  for (uint64_t seed = 0; seed < 64 && !swapped; ++seed) {
    rng::Xoshiro256pp rng(seed);
    const auto out = perturb::rule_rewrite(seq, lexicon, rng);
    if (out.ids[0] == vocab.lookup("crucial")) {
      swapped = true;
      CHECK(out.ids[1] == vocab.lookup("job"));
    }
  }
  CHECK(swapped);

  const auto protected_seq = text::tokenize("anthrax risk", vocab);
  for (uint64_t seed = 0; seed < 32; ++seed) {
    rng::Xoshiro256pp rng(seed);
    const auto out = perturb::rule_rewrite(protected_seq, lexicon, rng);
    CHECK(out.ids[0] == vocab.lookup("anthrax"));
  }
}

TEST_CASE("empty synonym table is the identity") {
  const auto vocab = text::build_vocab({"a b c"}, 32);
  const perturb::RewriteLexicon lexicon;
  const auto seq = text::tokenize("a b c", vocab);
  rng::Xoshiro256pp rng(3);
  CHECK(perturb::rule_rewrite(seq, lexicon, rng).ids == seq.ids);
}

TEST_CASE("synonyms outside the vocabulary are rejected") {
  const auto vocab = text::build_vocab({"a b"}, 32);
  CHECK_THROWS_AS(
      perturb::RewriteLexicon::build({{"a", "zebra"}}, {}, vocab),
      ConfigError);
}

TEST_CASE("rewrite prompt carries the instruction and the text") {
  const auto prompt = perturb::rewrite_prompt("anthrax spreads fast");
  CHECK(prompt.find("You are an AI language model tasked with rewriting") ==
        0);
  CHECK(prompt.find("maintain the original meaning while improving "
                    "clarity") != std::string::npos);
  CHECK(prompt.find("Original Text: anthrax spreads fast") !=
        std::string::npos);
}

TEST_CASE("watermark regeneration keeps the prompt and the length") {
  auto params = testutil::random_tiny_model(10, /*vocab=*/32, /*embed=*/4,
                                            /*hidden=*/8);
  params.b2[Specials::kEos] = -1e9;
  const auto seq = testutil::random_seq(123, 32, 12, 12);

  wm::KgwConfig kgw;
  kgw.delta = 2.0;
  kgw.key = 99;
  rng::Xoshiro256pp rng(4);
  const auto out = perturb::watermark_regenerate(seq, params, kgw, rng);
  CHECK(out.ids.size() == seq.ids.size());
  const size_t keep = lm::prompt_length(seq.ids.size());
  for (size_t i = 0; i < keep; ++i) CHECK(out.ids[i] == seq.ids[i]);
  CHECK(out.ids.size() >= static_cast<size_t>(0.9 * seq.ids.size()));
  CHECK(out.ids.size() <= static_cast<size_t>(1.1 * seq.ids.size() + 1));
}

TEST_CASE("zero-bias regeneration equals plain regeneration") {
  auto params = testutil::random_tiny_model(11, /*vocab=*/32, /*embed=*/4,
                                            /*hidden=*/8);
  const auto seq = testutil::random_seq(321, 32, 10, 10);
  wm::KgwConfig zero;
  zero.delta = 0.0;
  zero.key = 5;

  rng::Xoshiro256pp r1(8);
  const auto biased = perturb::watermark_regenerate(seq, params, zero, r1);

  rng::Xoshiro256pp r2(8);
  text::TokenSeq prompt;
  prompt.source_id = seq.source_id;
  prompt.ids.assign(seq.ids.begin(),
                    seq.ids.begin() + lm::prompt_length(seq.ids.size()));
  const auto plain = lm::sample(params, prompt, lm::PlainDecoder{},
                                seq.ids.size() - prompt.ids.size(), r2);
  CHECK(biased.ids == plain.ids);
}

TEST_CASE("immediate EOS collapse raises DegenerateGeneration") {
  auto params = lm::ModelParams::zeros(
      lm::Dims{.vocab = 8, .embed = 3, .hidden = 4, .context = 4});
  params.b2[Specials::kEos] = 1e9;  // always terminates at once
  const auto seq = testutil::random_seq(5, 8, 12, 12);
  wm::KgwConfig kgw;
  rng::Xoshiro256pp rng(1);
  CHECK_THROWS_AS(perturb::watermark_regenerate(seq, params, kgw, rng),
                  DegenerateGenerationError);
}

TEST_CASE("stronger bias yields a higher red fraction on regeneration") {
  auto params = testutil::random_tiny_model(12, /*vocab=*/64, /*embed=*/4,
                                            /*hidden=*/8);
  params.b2[Specials::kEos] = -1e9;
  const auto seq = testutil::random_seq(777, 64, 40, 40);

  auto mean_red_fraction = [&](double delta) {
    wm::KgwConfig kgw;
    kgw.delta = delta;
    kgw.key = 4096;
    double sum = 0.0;
    const int trials = 50;
    for (int i = 0; i < trials; ++i) {
      rng::Xoshiro256pp rng(9999 + i);
      const auto out = perturb::watermark_regenerate(seq, params, kgw, rng);
      sum += wm::kgw_detect(out, kgw, 64).score_mean;
    }
    return sum / trials;
  };
  CHECK(mean_red_fraction(6.0) > mean_red_fraction(2.0));
}

TEST_CASE("salient-only reduction keeps salient tokens in order") {
  text::Corpus corpus;
  corpus.role = text::CorpusRole::kForget;
  corpus.docs.push_back(make_seq({10, 11, 12, 13}, "all"));
  corpus.docs.push_back(make_seq({20, 21}, "none"));
  corpus.docs.push_back(make_seq({10, 20, 12, 21}, "some"));

  const std::unordered_set<TokenId> salient = {10, 11, 12, 13};
  const auto [reduced, warnings] =
      perturb::salient_only_corpus(corpus, salient);
  REQUIRE(reduced.docs.size() == 3);
  CHECK(reduced.docs[0].ids == corpus.docs[0].ids);
  CHECK(reduced.docs[1].ids == std::vector<TokenId>{Specials::kOov});
  CHECK(reduced.docs[2].ids == std::vector<TokenId>{10, 12});
  CHECK(warnings == 1);
}

TEST_CASE("perturb spec json round-trips") {
  perturb::PerturbSpec spec;
  spec.kind = perturb::PerturbKind::kMask;
  spec.mask_ratio = 0.42;
  spec.seed = 17;
  const auto round = perturb::PerturbSpec::from_json(spec.to_json());
  CHECK(round.kind == perturb::PerturbKind::kMask);
  CHECK(round.mask_ratio == 0.42);
  CHECK(round.seed == 17);
  CHECK(round.name() == "mask42");

  perturb::PerturbSpec wm_spec;
  wm_spec.kind = perturb::PerturbKind::kWatermark;
  wm::SynthidConfig sid;
  sid.layers = 4;
  wm_spec.watermark = sid;
  const auto wm_round = perturb::PerturbSpec::from_json(wm_spec.to_json());
  CHECK(wm_round.name() == "wm_synthid_m4");
  CHECK(wm_round.fixture_key() == "wm_synthid");

  CHECK(perturb::PerturbSpec{}.name() == "original");
  CHECK(perturb::PerturbSpec{}.fixture_key() == "clean");
}
