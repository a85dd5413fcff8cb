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

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "unlearnlab/rng.hpp"
#include "unlearnlab/text.hpp"
#include "unlearnlab/tinylm.hpp"

namespace unlearnlab::wm {

using text::TokenId;
using text::TokenSeq;

/// Logit-bias watermark: a keyed hash of the preceding context splits the
/// vocabulary into green and red lists each step, and red-list logits get
/// a fixed bias added before sampling.
struct KgwConfig {
  double delta = 2.0;
  double green_fraction = 0.5;
  uint64_t key = 0;
  int context_width = 1;
  double z_threshold = 2.0;

  void validate() const;
};

/// Tournament-sampling watermark: each step draws a candidate pool of
/// 2^layers tokens from the model distribution and runs a knockout
/// bracket scored by keyed pseudorandom bits.
struct SynthidConfig {
  int layers = 4;  // tournament depth m; pool size is 2^m
  uint64_t key = 0;
  int context_width = 4;
  double z_threshold = 3.0;

  int pool_size() const { return 1 << layers; }
  void validate() const;
};

using WatermarkConfig = std::variant<KgwConfig, SynthidConfig>;

std::string watermark_config_to_json(const WatermarkConfig& config);
WatermarkConfig watermark_config_from_json(const std::string& json_text);

/// Keyed green/red split of the vocabulary for one decoding step.
struct VocabPartition {
  std::vector<TokenId> green;
  std::vector<TokenId> red;
  std::vector<uint8_t> in_green;  // vocab-sized membership mask
};

/// Deterministic keyed permutation of [0, vocab_size); the first
/// floor(green_fraction * vocab_size) ids form the green list.
VocabPartition partition_vocab(uint64_t key,
                               std::span<const TokenId> prev_context,
                               int vocab_size, double green_fraction);

/// Adds delta to every red-list logit; green logits pass through.
std::vector<double> kgw_bias_logits(std::span<const double> logits,
                                    std::span<const TokenId> red,
                                    double delta);

/// (n_red - rho*T) / sqrt(T*rho*(1-rho)), the one-sided red-count z-score.
double kgw_z(int64_t n_red, int64_t n_scored, double rho);

struct DetectionResult {
  double statistic = 0.0;   // z-score against the clean-text null
  double score_mean = 0.0;  // red fraction (KGW) or mean g bit (SynthID)
  int64_t n_tokens = 0;     // scored token count
  bool watermarked = false;
};

/// Recomputes each step's red list from the preceding context and scores
/// the red-token count. The first token has no context and is unscored.
/// vocab_size must match the vocabulary the text was generated over,
/// otherwise the recomputed partitions disagree with the embedder's.
DetectionResult kgw_detect(const TokenSeq& seq, const KgwConfig& config,
                           int vocab_size);

/// Randomness seed for one step, derived from the last context_width
/// tokens (BOS-padded on the left) and the secret key.
uint64_t derive_rt(uint64_t key, std::span<const TokenId> context,
                   int context_width);

/// Keyed pseudorandom bit for (seed, token, layer); layer is 1-based.
int g_score(uint64_t key, uint64_t rt, TokenId token, int layer);

/// Pluggable scoring function (rt, token, layer) -> bit, used to swap the
/// keyed bits for degenerate ones in statistical tests.
using GScorer = std::function<int(uint64_t rt, TokenId token, int layer)>;

GScorer keyed_scorer(uint64_t key);

/// Knockout bracket over 2^layers candidates: layer l pairs adjacent
/// survivors and the higher g_l advances, earlier index winning ties.
TokenId tournament_select(std::span<const TokenId> candidates, uint64_t rt,
                          uint64_t key, int layers);
TokenId tournament_select_with(std::span<const TokenId> candidates,
                               uint64_t rt, int layers,
                               const GScorer& scorer);

/// One decoding step: pool_size i.i.d. draws from the model distribution,
/// then a tournament pick.
TokenId synthid_sample_step(const lm::ModelParams& params,
                            std::span<const TokenId> preceding,
                            const SynthidConfig& config,
                            rng::Xoshiro256pp& rng);
TokenId synthid_sample_step_scored(const lm::ModelParams& params,
                                   std::span<const TokenId> preceding,
                                   const SynthidConfig& config,
                                   rng::Xoshiro256pp& rng,
                                   const GScorer& scorer);

/// Scores the mean g bit over positions and layers, normalized against
/// the Bernoulli(1/2) clean-text null. The first token is unscored.
DetectionResult synthid_detect(const TokenSeq& seq,
                               const SynthidConfig& config);
DetectionResult synthid_detect_scored(const TokenSeq& seq,
                                      const SynthidConfig& config,
                                      const GScorer& scorer);

/// Decoder wrappers for lm::sample.
class KgwDecoder : public lm::Decoder {
 public:
  explicit KgwDecoder(KgwConfig config);
  TokenId choose(const lm::ModelParams& params, std::span<const double> logits,
                 std::span<const TokenId> preceding,
                 rng::Xoshiro256pp& rng) const override;

 private:
  KgwConfig config_;
};

class SynthidDecoder : public lm::Decoder {
 public:
  explicit SynthidDecoder(SynthidConfig config);
  SynthidDecoder(SynthidConfig config, GScorer scorer);
  TokenId choose(const lm::ModelParams& params, std::span<const double> logits,
                 std::span<const TokenId> preceding,
                 rng::Xoshiro256pp& rng) const override;

 private:
  SynthidConfig config_;
  GScorer scorer_;
};

/// Builds the decoder matching a watermark config.
std::unique_ptr<lm::Decoder> make_decoder(const WatermarkConfig& config);

}  // namespace unlearnlab::wm
