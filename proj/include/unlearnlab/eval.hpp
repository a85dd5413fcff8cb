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

#include <set>
#include <string>
#include <vector>

#include "unlearnlab/clients.hpp"
#include "unlearnlab/text.hpp"
#include "unlearnlab/tinylm.hpp"

namespace unlearnlab::eval {

using text::Corpus;
using text::TokenId;
using text::TokenSeq;

enum class ProbeTag { kForget, kRetain };

std::string probe_tag_name(ProbeTag tag);
ProbeTag probe_tag_from_name(const std::string& name);

/// Cloze-style probe: the model answers with its argmax next token after
/// the prompt.
struct QaProbe {
  std::string id;
  TokenSeq prompt;
  TokenId answer = 0;
  ProbeTag tag = ProbeTag::kForget;
};

std::vector<QaProbe> read_probes_jsonl(const std::string& path,
                                       const text::Vocab& vocab);
void write_probes_jsonl(const std::string& path,
                        const std::vector<QaProbe>& probes,
                        const text::Vocab& vocab);

/// Argmax next token after the prompt; ties break to the lowest id.
TokenId predict_answer(const lm::ModelParams& params, const TokenSeq& prompt);

/// Fraction of probes answered correctly. Throws ConfigError when empty.
double qa_accuracy(const lm::ModelParams& params,
                   const std::vector<QaProbe>& probes);

/// Ids of the probes the model answers incorrectly.
std::set<std::string> error_set(const lm::ModelParams& params,
                                const std::vector<QaProbe>& probes);

/// Percentage of response positions whose argmax prediction equals the
/// true next token.
double verbmem(const lm::ModelParams& params, const Corpus& forget);

/// Jaccard similarity |a & b| / |a | b|; 1.0 when both sets are empty.
template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Min-K document score: mean of the lowest 20% (at least one) of the
/// response-position token log-likelihoods.
double min_k_doc_score(const lm::ModelParams& params, const TokenSeq& seq,
                       double fraction = 0.2);

/// Exact pairwise AUC with 1/2 credit for ties.
double auc(const std::vector<double>& positives,
           const std::vector<double>& negatives);

/// Membership-leakage proxy: 200 * (AUC(member scores vs nonmember
/// scores) - 0.5), in [-100, 100]; 0 means no leakage.
double privleak_proxy(const lm::ModelParams& params, const Corpus& members,
                      const Corpus& nonmembers);

using SalientSet = std::set<std::string>;

/// Tokens of the text (case-insensitive) found in the domain lexicon.
SalientSet extract_salient_lexicon(const std::string& utf8_text,
                                   const SalientSet& lexicon);

/// The judge instruction with the text attached.
std::string judge_prompt(const std::string& utf8_text);

/// Asks the judge endpoint to mark domain-salient words; parses the
/// "replaced_text"/"related_words" JSON reply. Throws JudgeParseError on
/// malformed completions.
SalientSet extract_salient_judge(const std::string& utf8_text,
                                 const clients::EndpointConfig& endpoint);

/// Jaccard overlap of two salient-token sets.
double salient_overlap(const SalientSet& k_orig, const SalientSet& k_pert);

struct OverlapReport {
  double per_doc_mean = 1.0;
  double corpus_level = 1.0;
};

/// Per-document mean overlap plus the corpus-level (pooled set) overlap
/// between original and perturbed forget corpora, using the lexicon
/// extractor on detokenized text.
OverlapReport salient_overlap_corpus(const Corpus& original,
                                     const Corpus& perturbed,
                                     const text::Vocab& vocab,
                                     const SalientSet& lexicon);

/// Newline-delimited token file.
SalientSet read_lexicon(const std::string& path);

}  // namespace unlearnlab::eval
