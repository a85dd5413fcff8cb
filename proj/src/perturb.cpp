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

#include "unlearnlab/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "unlearnlab/errors.hpp"
#include "unlearnlab/hashing.hpp"

namespace unlearnlab::perturb {

namespace {

constexpr char kRewritePromptPrefix[] =
    "You are an AI language model tasked with rewriting the following "
    "text. Your goal is to maintain the original meaning while improving "
    "clarity, coherence, and conciseness. Ensure the rewritten text "
    "sounds natural and fluent. Do not add new information or change the "
    "intended message.\nOriginal Text: ";

}  // namespace

void PerturbSpec::validate() const {
  if (kind == PerturbKind::kMask &&
      !(mask_ratio >= 0.0 && mask_ratio <= 1.0)) {
    throw ConfigError("mask ratio must lie in [0, 1]");
  }
  if (kind == PerturbKind::kRewrite && rewrite_engine != "rule" &&
      rewrite_engine != "endpoint") {
    throw ConfigError("rewrite engine must be 'rule' or 'endpoint'");
  }
}

std::string PerturbSpec::name() const {
  switch (kind) {
    case PerturbKind::kIdentity:
      return "original";
    case PerturbKind::kMask: {
      const int pct = static_cast<int>(std::lround(mask_ratio * 100.0));
      return "mask" + std::to_string(pct);
    }
    case PerturbKind::kRewrite:
      return "rewrite_" + rewrite_engine;
    case PerturbKind::kWatermark:
      if (const auto* kgw = std::get_if<wm::KgwConfig>(&watermark)) {
        return "wm_kgw_d" +
               std::to_string(static_cast<int>(std::lround(kgw->delta)));
      } else {
        const auto& sid = std::get<wm::SynthidConfig>(watermark);
        return "wm_synthid_m" + std::to_string(sid.layers);
      }
    case PerturbKind::kSalientOnly:
      return "salient_only";
  }
  throw ConfigError("unknown perturbation kind");
}

std::string PerturbSpec::fixture_key() const {
  switch (kind) {
    case PerturbKind::kIdentity:
      return "clean";
    case PerturbKind::kMask:
      return "mask";
    case PerturbKind::kRewrite:
      return "rewrite";
    case PerturbKind::kWatermark:
      return std::holds_alternative<wm::KgwConfig>(watermark) ? "wm_kgw"
                                                              : "wm_synthid";
    case PerturbKind::kSalientOnly:
      return "";
  }
  return "";
}

std::string PerturbSpec::to_json() const {
  nlohmann::json j;
  switch (kind) {
    case PerturbKind::kIdentity:
      j["kind"] = "identity";
      break;
    case PerturbKind::kMask:
      j["kind"] = "mask";
      j["ratio"] = mask_ratio;
      break;
    case PerturbKind::kRewrite:
      j["kind"] = "rewrite";
      j["engine"] = rewrite_engine;
      break;
    case PerturbKind::kWatermark:
      j["kind"] = "watermark";
      j["wm"] = nlohmann::json::parse(wm::watermark_config_to_json(watermark));
      break;
    case PerturbKind::kSalientOnly:
      j["kind"] = "salient_only";
      break;
  }
  if (seed != 0) j["seed"] = seed;
  return j.dump();
}

PerturbSpec PerturbSpec::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  PerturbSpec spec;
  const std::string kind = j.at("kind");
  if (kind == "identity") {
    spec.kind = PerturbKind::kIdentity;
  } else if (kind == "mask") {
    spec.kind = PerturbKind::kMask;
    spec.mask_ratio = j.at("ratio");
  } else if (kind == "rewrite") {
    spec.kind = PerturbKind::kRewrite;
    spec.rewrite_engine = j.value("engine", "rule");
  } else if (kind == "watermark") {
    spec.kind = PerturbKind::kWatermark;
    spec.watermark = wm::watermark_config_from_json(j.at("wm").dump());
  } else if (kind == "salient_only") {
    spec.kind = PerturbKind::kSalientOnly;
  } else {
    throw ConfigError("unknown perturbation kind: " + kind);
  }
  spec.seed = j.value("seed", 0ULL);
  spec.validate();
  return spec;
}

TokenSeq mask_sample(const TokenSeq& seq, double ratio,
                     rng::Xoshiro256pp& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw ConfigError("mask ratio must lie in [0, 1]");
  }
  const size_t length = seq.ids.size();
  // round() with half-up ties
  const auto n_mask = static_cast<size_t>(
      std::floor(ratio * static_cast<double>(length) + 0.5));

  std::vector<size_t> order(length);
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = length - 1; i > 0; --i) {
    const size_t j = rng.below(i + 1);
    std::swap(order[i], order[j]);
  }
  TokenSeq out = seq;
  for (size_t i = 0; i < n_mask; ++i) {
    out.ids[order[i]] = text::Specials::kMask;
  }
  return out;
}

RewriteLexicon RewriteLexicon::build(
    const std::vector<std::pair<std::string, std::string>>& synonym_pairs,
    const std::unordered_set<std::string>& protected_tokens,
    const text::Vocab& vocab) {
  RewriteLexicon lex;
  for (const auto& [from, to] : synonym_pairs) {
    if (!vocab.contains(from) || !vocab.contains(to)) {
      throw ConfigError("synonym pair outside vocabulary: " + from + " -> " +
                        to);
    }
    lex.synonyms[vocab.lookup(from)] = vocab.lookup(to);
  }
  for (const auto& token : protected_tokens) {
    if (vocab.contains(token)) {
      lex.protected_ids.insert(vocab.lookup(token));
    }
  }
  return lex;
}

TokenSeq rule_rewrite(const TokenSeq& seq, const RewriteLexicon& lexicon,
                      rng::Xoshiro256pp& rng) {
  TokenSeq out = seq;
  for (auto& id : out.ids) {
    if (lexicon.protected_ids.count(id) != 0) continue;
    const auto it = lexicon.synonyms.find(id);
    if (it == lexicon.synonyms.end()) continue;
    if (rng.uniform() < 0.5) id = it->second;
  }
  return out;
}

std::string rewrite_prompt(const std::string& original_text) {
  return kRewritePromptPrefix + original_text;
}

std::string endpoint_rewrite(const std::string& doc_text,
                             const std::string& doc_id,
                             const clients::EndpointConfig& endpoint) {
  const std::string prompt = rewrite_prompt(doc_text);
  const std::string completion = clients::post_completion(endpoint, prompt);
  if (completion.empty()) {
    throw EmptyRewriteError("rewrite endpoint returned an empty completion");
  }
  namespace fs = std::filesystem;
  const std::string key =
      hashing::sha256_hex(doc_id + "\n" + hashing::sha256_hex(prompt));
  const fs::path dir("cache/rewrite");
  fs::create_directories(dir);
  nlohmann::json record;
  record["doc_id"] = doc_id;
  record["prompt_sha256"] = hashing::sha256_hex(prompt);
  record["completion"] = completion;
  const fs::path path = dir / (key + ".json");
  const fs::path tmp = dir / (key + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    out << record.dump();
  }
  fs::rename(tmp, path);
  return completion;
}

TokenSeq watermark_regenerate(const TokenSeq& seq,
                              const lm::ModelParams& params,
                              const wm::WatermarkConfig& config,
                              rng::Xoshiro256pp& rng) {
  const size_t length = seq.ids.size();
  const size_t keep = lm::prompt_length(length);
  TokenSeq prompt;
  prompt.source_id = seq.source_id;
  prompt.ids.assign(seq.ids.begin(), seq.ids.begin() + keep);
  if (length == keep) return prompt;

  const auto decoder = wm::make_decoder(config);
  const TokenSeq out = lm::sample(params, prompt, *decoder, length - keep, rng);
  const auto min_len = static_cast<size_t>(
      std::ceil(0.9 * static_cast<double>(length)));
  if (out.ids.size() < min_len) {
    throw DegenerateGenerationError(
        "regeneration of " + seq.source_id + " collapsed to " +
        std::to_string(out.ids.size()) + " of " + std::to_string(length) +
        " tokens");
  }
  return out;
}

std::pair<Corpus, int> salient_only_corpus(
    const Corpus& corpus, const std::unordered_set<TokenId>& salient_ids) {
  Corpus out;
  out.role = corpus.role;
  int warnings = 0;
  for (const auto& doc : corpus.docs) {
    TokenSeq reduced;
    reduced.source_id = doc.source_id;
    for (TokenId id : doc.ids) {
      if (salient_ids.count(id) != 0) reduced.ids.push_back(id);
    }
    if (reduced.ids.empty()) {
      reduced.ids.push_back(text::Specials::kOov);
      ++warnings;
    }
    out.docs.push_back(std::move(reduced));
  }
  return {std::move(out), warnings};
}

Corpus perturb_corpus(const Corpus& corpus, const PerturbSpec& spec,
                      const PerturbDeps& deps) {
  spec.validate();
  if (corpus.role != text::CorpusRole::kForget) {
    throw ConfigError("perturbation applies to the forget corpus only");
  }

  if (spec.kind == PerturbKind::kSalientOnly) {
    if (deps.salient_ids == nullptr) {
      throw ConfigError("salient-only perturbation needs a salient token set");
    }
    return salient_only_corpus(corpus, *deps.salient_ids).first;
  }

  Corpus out;
  out.role = corpus.role;
  out.docs.reserve(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    const uint64_t doc_seed = rng::hash_bytes(spec.seed, doc.source_id);
    rng::Xoshiro256pp doc_rng(doc_seed);
    switch (spec.kind) {
      case PerturbKind::kIdentity:
        out.docs.push_back(doc);
        break;
      case PerturbKind::kMask:
        out.docs.push_back(mask_sample(doc, spec.mask_ratio, doc_rng));
        break;
      case PerturbKind::kRewrite:
        if (spec.rewrite_engine == "rule") {
          if (deps.lexicon == nullptr) {
            throw ConfigError("rule rewrite needs a synonym lexicon");
          }
          out.docs.push_back(rule_rewrite(doc, *deps.lexicon, doc_rng));
        } else {
          if (deps.vocab == nullptr || deps.endpoint == nullptr) {
            throw ConfigError("endpoint rewrite needs a vocab and endpoint");
          }
          const std::string original = text::detokenize(doc, *deps.vocab);
          const std::string rewritten =
              endpoint_rewrite(original, doc.source_id, *deps.endpoint);
          out.docs.push_back(
              text::tokenize(rewritten, *deps.vocab, doc.source_id));
        }
        break;
      case PerturbKind::kWatermark:
        if (deps.model == nullptr) {
          throw ConfigError("watermark regeneration needs a model");
        }
        out.docs.push_back(
            watermark_regenerate(doc, *deps.model, spec.watermark, doc_rng));
        break;
      case PerturbKind::kSalientOnly:
        break;  // handled above
    }
  }
  return out;
}

}  // namespace unlearnlab::perturb
