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

#include "unlearnlab/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <json.hpp>

#include "unlearnlab/errors.hpp"

namespace unlearnlab::wm {

namespace {

// Domain separators so the partition, seed and bit hashes never collide.
constexpr uint64_t kTagPartition = 0x70617274ULL;
constexpr uint64_t kTagRt = 0x72747274ULL;
constexpr uint64_t kTagG = 0x67626974ULL;

std::vector<uint64_t> window_words(std::span<const TokenId> context,
                                   int width) {
  std::vector<uint64_t> words(static_cast<size_t>(width),
                              static_cast<uint64_t>(text::Specials::kBos));
  const size_t have = std::min(context.size(), static_cast<size_t>(width));
  for (size_t i = 0; i < have; ++i) {
    words[width - have + i] =
        static_cast<uint64_t>(context[context.size() - have + i]);
  }
  return words;
}

uint64_t parse_key_hex(const std::string& hex) {
  if (hex.empty()) return 0;
  return std::stoull(hex, nullptr, 16);
}

std::string key_to_hex(uint64_t key) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(key));
  return buf;
}

}  // namespace

void KgwConfig::validate() const {
  if (!(green_fraction > 0.0 && green_fraction < 1.0)) {
    throw ConfigError("green_fraction must lie strictly between 0 and 1");
  }
  if (!std::isfinite(delta) || delta < 0.0) {
    throw ConfigError("kgw delta must be finite and nonnegative");
  }
  if (context_width < 1) throw ConfigError("context_width must be >= 1");
}

void SynthidConfig::validate() const {
  if (layers < 1) throw ConfigError("tournament layers must be >= 1");
  if (layers > 20) throw ConfigError("tournament layers unreasonably large");
  if (context_width < 1) throw ConfigError("context_width must be >= 1");
}

std::string watermark_config_to_json(const WatermarkConfig& config) {
  nlohmann::json j;
  if (const auto* kgw = std::get_if<KgwConfig>(&config)) {
    j["type"] = "kgw";
    j["delta"] = kgw->delta;
    j["green_fraction"] = kgw->green_fraction;
    j["key"] = key_to_hex(kgw->key);
    j["context_width"] = kgw->context_width;
  } else {
    const auto& sid = std::get<SynthidConfig>(config);
    j["type"] = "synthid";
    j["m"] = sid.layers;
    j["key"] = key_to_hex(sid.key);
    j["context_width"] = sid.context_width;
  }
  return j.dump();
}

WatermarkConfig watermark_config_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  const std::string type = j.at("type");
  if (type == "kgw") {
    KgwConfig cfg;
    cfg.delta = j.value("delta", cfg.delta);
    cfg.green_fraction = j.value("green_fraction", cfg.green_fraction);
    cfg.key = parse_key_hex(j.value("key", std::string()));
    cfg.context_width = j.value("context_width", cfg.context_width);
    cfg.z_threshold = j.value("z_threshold", cfg.z_threshold);
    cfg.validate();
    return cfg;
  }
  if (type == "synthid") {
    SynthidConfig cfg;
    cfg.layers = j.value("m", cfg.layers);
    cfg.key = parse_key_hex(j.value("key", std::string()));
    cfg.context_width = j.value("context_width", cfg.context_width);
    cfg.z_threshold = j.value("z_threshold", cfg.z_threshold);
    cfg.validate();
    return cfg;
  }
  throw ConfigError("unknown watermark type: " + type);
}

VocabPartition partition_vocab(uint64_t key,
                               std::span<const TokenId> prev_context,
                               int vocab_size, double green_fraction) {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  auto words = window_words(prev_context,
                            static_cast<int>(prev_context.size()));
  std::vector<uint64_t> seeded;
  seeded.reserve(words.size() + 1);
  seeded.push_back(kTagPartition);
  seeded.insert(seeded.end(), words.begin(), words.end());
  const uint64_t seed = rng::hash_words(key, seeded);

  std::vector<TokenId> order(static_cast<size_t>(vocab_size));
  std::iota(order.begin(), order.end(), 0);
  rng::Xoshiro256pp shuffle_rng(seed);
  for (size_t i = order.size() - 1; i > 0; --i) {
    const size_t j = shuffle_rng.below(i + 1);
    std::swap(order[i], order[j]);
  }

  const auto n_green = static_cast<size_t>(
      std::floor(green_fraction * static_cast<double>(vocab_size)));
  VocabPartition part;
  part.green.assign(order.begin(), order.begin() + n_green);
  part.red.assign(order.begin() + n_green, order.end());
  part.in_green.assign(static_cast<size_t>(vocab_size), 0);
  for (TokenId id : part.green) part.in_green[static_cast<size_t>(id)] = 1;
  return part;
}

std::vector<double> kgw_bias_logits(std::span<const double> logits,
                                    std::span<const TokenId> red,
                                    double delta) {
  std::vector<double> out(logits.begin(), logits.end());
  for (TokenId id : red) out[static_cast<size_t>(id)] += delta;
  return out;
}

double kgw_z(int64_t n_red, int64_t n_scored, double rho) {
  const double t = static_cast<double>(n_scored);
  return (static_cast<double>(n_red) - rho * t) /
         std::sqrt(t * rho * (1.0 - rho));
}

DetectionResult kgw_detect(const TokenSeq& seq, const KgwConfig& config,
                           int vocab_size) {
  config.validate();
  if (seq.ids.size() < 2) {
    throw InsufficientTokensError("need at least 2 tokens to score");
  }
  const TokenId max_id = *std::max_element(seq.ids.begin(), seq.ids.end());
  if (max_id >= vocab_size) {
    throw InvalidIdError("sequence token id exceeds vocab_size");
  }

  int64_t n_red = 0;
  const int64_t scored = static_cast<int64_t>(seq.ids.size()) - 1;
  for (size_t t = 1; t < seq.ids.size(); ++t) {
    const std::span<const TokenId> prefix(seq.ids.data(), t);
    const auto words = window_words(prefix, config.context_width);
    std::vector<TokenId> window(words.size());
    for (size_t i = 0; i < words.size(); ++i) {
      window[i] = static_cast<TokenId>(words[i]);
    }
    const auto part = partition_vocab(config.key, window, vocab_size,
                                      config.green_fraction);
    if (!part.in_green[static_cast<size_t>(seq.ids[t])]) ++n_red;
  }
  const double rho = 1.0 - config.green_fraction;
  DetectionResult result;
  result.n_tokens = scored;
  result.score_mean = static_cast<double>(n_red) / static_cast<double>(scored);
  result.statistic = kgw_z(n_red, scored, rho);
  result.watermarked = result.statistic >= config.z_threshold;
  return result;
}

uint64_t derive_rt(uint64_t key, std::span<const TokenId> context,
                   int context_width) {
  auto words = window_words(context, context_width);
  std::vector<uint64_t> seeded;
  seeded.reserve(words.size() + 1);
  seeded.push_back(kTagRt);
  seeded.insert(seeded.end(), words.begin(), words.end());
  return rng::hash_words(key, seeded);
}

int g_score(uint64_t key, uint64_t rt, TokenId token, int layer) {
  const uint64_t words[] = {kTagG, rt, static_cast<uint64_t>(token),
                            static_cast<uint64_t>(layer)};
  return static_cast<int>(rng::hash_words(key, words) & 1ULL);
}

GScorer keyed_scorer(uint64_t key) {
  return [key](uint64_t rt, TokenId token, int layer) {
    return g_score(key, rt, token, layer);
  };
}

TokenId tournament_select_with(std::span<const TokenId> candidates,
                               uint64_t rt, int layers,
                               const GScorer& scorer) {
  if (candidates.size() != (1ULL << layers)) {
    throw ConfigError("candidate pool size must be 2^layers");
  }
  std::vector<TokenId> survivors(candidates.begin(), candidates.end());
  for (int layer = 1; layer <= layers; ++layer) {
    std::vector<TokenId> next;
    next.reserve(survivors.size() / 2);
    for (size_t i = 0; i + 1 < survivors.size(); i += 2) {
      const TokenId a = survivors[i];
      const TokenId b = survivors[i + 1];
      // ties go to the earlier pool index
      next.push_back(scorer(rt, a, layer) >= scorer(rt, b, layer) ? a : b);
    }
    survivors = std::move(next);
  }
  return survivors.front();
}

TokenId tournament_select(std::span<const TokenId> candidates, uint64_t rt,
                          uint64_t key, int layers) {
  return tournament_select_with(candidates, rt, layers, keyed_scorer(key));
}

TokenId synthid_sample_step_scored(const lm::ModelParams& params,
                                   std::span<const TokenId> preceding,
                                   const SynthidConfig& config,
                                   rng::Xoshiro256pp& rng,
                                   const GScorer& scorer) {
  config.validate();
  const auto ctx = lm::context_at(preceding, preceding.size(),
                                  params.dims.context);
  const auto trace = lm::forward(params, ctx);
  const auto probs = lm::softmax(trace.logits);
  std::vector<TokenId> pool(static_cast<size_t>(config.pool_size()));
  for (auto& id : pool) id = lm::sample_categorical(probs, rng);
  const uint64_t rt = derive_rt(config.key, preceding, config.context_width);
  return tournament_select_with(pool, rt, config.layers, scorer);
}

TokenId synthid_sample_step(const lm::ModelParams& params,
                            std::span<const TokenId> preceding,
                            const SynthidConfig& config,
                            rng::Xoshiro256pp& rng) {
  return synthid_sample_step_scored(params, preceding, config, rng,
                                    keyed_scorer(config.key));
}

DetectionResult synthid_detect_scored(const TokenSeq& seq,
                                      const SynthidConfig& config,
                                      const GScorer& scorer) {
  config.validate();
  if (seq.ids.size() < 2) {
    throw InsufficientTokensError("need at least 2 tokens to score");
  }
  int64_t g_sum = 0;
  const int64_t scored_tokens = static_cast<int64_t>(seq.ids.size()) - 1;
  for (size_t t = 1; t < seq.ids.size(); ++t) {
    const std::span<const TokenId> prefix(seq.ids.data(), t);
    const uint64_t rt = derive_rt(config.key, prefix, config.context_width);
    for (int layer = 1; layer <= config.layers; ++layer) {
      g_sum += scorer(rt, seq.ids[t], layer);
    }
  }
  const int64_t n_scores = scored_tokens * config.layers;
  const double mean_g =
      static_cast<double>(g_sum) / static_cast<double>(n_scores);
  DetectionResult result;
  result.n_tokens = scored_tokens;
  result.score_mean = mean_g;
  // Clean text scores i.i.d. fair bits, so the null std of the mean is
  // 0.5/sqrt(n_scores); report the normalized score.
  result.statistic = (mean_g - 0.5) * 2.0 *
                     std::sqrt(static_cast<double>(n_scores));
  result.watermarked = result.statistic >= config.z_threshold;
  return result;
}

DetectionResult synthid_detect(const TokenSeq& seq,
                               const SynthidConfig& config) {
  return synthid_detect_scored(seq, config, keyed_scorer(config.key));
}

KgwDecoder::KgwDecoder(KgwConfig config) : config_(config) {
  config_.validate();
}

TokenId KgwDecoder::choose(const lm::ModelParams& /*params*/,
                           std::span<const double> logits,
                           std::span<const TokenId> preceding,
                           rng::Xoshiro256pp& rng) const {
  const auto words = window_words(preceding, config_.context_width);
  std::vector<TokenId> window(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    window[i] = static_cast<TokenId>(words[i]);
  }
  const auto part = partition_vocab(config_.key, window,
                                    static_cast<int>(logits.size()),
                                    config_.green_fraction);
  const auto biased = kgw_bias_logits(logits, part.red, config_.delta);
  const auto probs = lm::softmax(biased);
  return lm::sample_categorical(probs, rng);
}

SynthidDecoder::SynthidDecoder(SynthidConfig config)
    : config_(config), scorer_(keyed_scorer(config.key)) {
  config_.validate();
}

SynthidDecoder::SynthidDecoder(SynthidConfig config, GScorer scorer)
    : config_(config), scorer_(std::move(scorer)) {
  config_.validate();
}

TokenId SynthidDecoder::choose(const lm::ModelParams& /*params*/,
                               std::span<const double> logits,
                               std::span<const TokenId> preceding,
                               rng::Xoshiro256pp& rng) const {
  const auto probs = lm::softmax(logits);
  std::vector<TokenId> pool(static_cast<size_t>(config_.pool_size()));
  for (auto& id : pool) id = lm::sample_categorical(probs, rng);
  const uint64_t rt = derive_rt(config_.key, preceding,
                                config_.context_width);
  return tournament_select_with(pool, rt, config_.layers, scorer_);
}

std::unique_ptr<lm::Decoder> make_decoder(const WatermarkConfig& config) {
  if (const auto* kgw = std::get_if<KgwConfig>(&config)) {
    return std::make_unique<KgwDecoder>(*kgw);
  }
  return std::make_unique<SynthidDecoder>(std::get<SynthidConfig>(config));
}

}  // namespace unlearnlab::wm
