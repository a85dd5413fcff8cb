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
#include <utility>
#include <vector>

#include "unlearnlab/text.hpp"

namespace unlearnlab::gen {

/// Synthetic fact-triple corpora: subject-relation-object sentences over
/// a disease-flavored forget domain, a disjoint nature-flavored retain
/// domain, and held-out disease subjects for membership probing. Each
/// (subject, relation) pair maps to one fixed object, so cloze probes
/// have a unique correct answer.
struct GenConfig {
  uint64_t seed = 2026;
  int templates_per_triple = 4;  // forget/retain docs per triple
};

struct ProbeRecord {
  std::string id;
  std::string prompt;
  std::string answer;
  std::string tag;  // forget | retain
};

struct GeneratedData {
  std::vector<text::CorpusRecord> forget;
  std::vector<text::CorpusRecord> retain;
  std::vector<text::CorpusRecord> holdout;
  std::vector<ProbeRecord> probes;
  std::vector<std::string> salient_lexicon;  // forget-domain tokens
  std::vector<std::pair<std::string, std::string>> synonyms;
};

GeneratedData generate(const GenConfig& config);

/// Writes forget/retain/holdout JSONL files, probes.jsonl, lexicon.txt
/// and synonyms.txt under the directory.
void write_all(const GeneratedData& data, const std::string& dir);

/// Every word the corpus, lexicon and synonym table can produce; vocab
/// construction feeds these to build_vocab alongside the corpus texts so
/// synonym targets are always in-vocabulary.
std::vector<std::string> extra_vocab_texts(const GeneratedData& data);

}  // namespace unlearnlab::gen
