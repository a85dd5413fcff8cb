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
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "unlearnlab/clients.hpp"
#include "unlearnlab/rng.hpp"
#include "unlearnlab/text.hpp"
#include "unlearnlab/tinylm.hpp"
#include "unlearnlab/watermark.hpp"

namespace unlearnlab::perturb {

using text::Corpus;
using text::TokenId;
using text::TokenSeq;

enum class PerturbKind {
  kIdentity,     // "Original Data"
  kMask,
  kRewrite,
  kWatermark,
  kSalientOnly,
};

/// Which corruption to apply to the forget corpus, and with what knobs.
struct PerturbSpec {
  PerturbKind kind = PerturbKind::kIdentity;
  double mask_ratio = 0.3;
  std::string rewrite_engine = "rule";  // "rule" | "endpoint"
  wm::WatermarkConfig watermark = wm::KgwConfig{};
  uint64_t seed = 0;

  void validate() const;

  /// Stable cell label, e.g. "original", "mask30", "wm_kgw_d2".
  std::string name() const;

  /// Key into the published reference tables: clean/mask/rewrite/wm_kgw/
  /// wm_synthid (salient-only cells have no table row and return "").
  std::string fixture_key() const;

  std::string to_json() const;
  static PerturbSpec from_json(const std::string& json_text);
};

/// Replaces exactly round(ratio * length) positions, chosen uniformly
/// without replacement, with MASK. Length-preserving.
TokenSeq mask_sample(const TokenSeq& seq, double ratio,
                     rng::Xoshiro256pp& rng);

/// Token-for-token synonym table plus the protected tokens that must
/// never be substituted.
struct RewriteLexicon {
  std::unordered_map<TokenId, TokenId> synonyms;
  std::unordered_set<TokenId> protected_ids;

  /// Validates that every synonym source and target is a real vocab
  /// token (OOV counts as absent). Throws ConfigError otherwise.
  static RewriteLexicon build(
      const std::vector<std::pair<std::string, std::string>>& synonym_pairs,
      const std::unordered_set<std::string>& protected_tokens,
      const text::Vocab& vocab);
};

/// Substitutes each unprotected token that has a synonym with
/// probability 1/2. No insertions or deletions.
TokenSeq rule_rewrite(const TokenSeq& seq, const RewriteLexicon& lexicon,
                      rng::Xoshiro256pp& rng);

/// The rewriting instruction sent to the endpoint, with the original
/// text substituted in.
std::string rewrite_prompt(const std::string& original_text);

/// Sends the rewrite prompt and returns the completion verbatim.
/// Throws EmptyRewriteError when the completion is empty; transport
/// errors propagate from the client. Successful rewrites are also
/// recorded under cache/rewrite/<sha256>.json keyed by (doc id, prompt).
std::string endpoint_rewrite(const std::string& doc_text,
                             const std::string& doc_id,
                             const clients::EndpointConfig& endpoint);

/// Keeps the first ceil(L/4) tokens as the prompt and regenerates the
/// rest under the watermark decoder, returning prompt + continuation of
/// total length == original length (shorter only if EOS fires; a
/// collapse below 90% of the original length throws
/// DegenerateGenerationError).
TokenSeq watermark_regenerate(const TokenSeq& seq,
                              const lm::ModelParams& params,
                              const wm::WatermarkConfig& config,
                              rng::Xoshiro256pp& rng);

/// Reduces each document to its salient tokens in original order.
/// Documents with no salient token become a single OOV token and are
/// counted in the returned warning tally.
std::pair<Corpus, int> salient_only_corpus(
    const Corpus& corpus, const std::unordered_set<TokenId>& salient_ids);

/// Everything the per-kind operations may need.
struct PerturbDeps {
  const lm::ModelParams* model = nullptr;             // watermark
  const RewriteLexicon* lexicon = nullptr;            // rule rewrite
  const std::unordered_set<TokenId>* salient_ids = nullptr;  // salient-only
  const text::Vocab* vocab = nullptr;                 // endpoint rewrite
  const clients::EndpointConfig* endpoint = nullptr;  // endpoint rewrite
};

/// Applies the spec to every document; output ids match input ids and
/// each document draws an independent per-document seed.
Corpus perturb_corpus(const Corpus& corpus, const PerturbSpec& spec,
                      const PerturbDeps& deps);

}  // namespace unlearnlab::perturb
