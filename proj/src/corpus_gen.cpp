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

#include "unlearnlab/corpus_gen.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "unlearnlab/errors.hpp"
#include "unlearnlab/rng.hpp"

namespace unlearnlab::gen {

namespace {

const std::vector<std::string> kForgetSubjects = {
    "anthrax", "ebola",   "measles", "rabies",  "cholera",
    "typhus",  "smallpox", "dengue",  "malaria", "influenza"};

const std::vector<std::string> kForgetRelations = {
    "causes", "triggers", "induces", "produces", "spreads"};

const std::vector<std::string> kForgetObjects = {
    "fever",    "cough",    "rash",      "fatigue",  "nausea",  "chills",
    "headache", "seizures", "paralysis", "swelling", "dizziness",
    "bleeding"};

const std::vector<std::string> kRetainSubjects = {
    "copper", "granite", "willow", "falcon", "maple",
    "quartz", "cedar",   "sparrow", "basalt", "iron"};

const std::vector<std::string> kRetainRelations = {
    "contains", "yields", "supports", "shelters", "anchors"};

const std::vector<std::string> kRetainObjects = {
    "rivers",  "meadows",  "harbors", "bridges", "gardens", "towers",
    "valleys", "orchards", "mills",   "canals",  "terraces", "groves"};

const std::vector<std::string> kHoldoutSubjects = {
    "listeria",   "shigella",  "norovirus", "rotavirus",  "pertussis",
    "legionella", "salmonella", "giardia",   "leprosy",    "ringworm",
    "scabies",    "trachoma",  "brucella",  "adenovirus", "rhinovirus",
    "echovirus",  "hantavirus", "psittacosis", "candida",  "aspergillus"};

// Five-token tails keep each document at 8 tokens: the prompt split
// keeps the first 2, so the object lands in the scored response region.
// Four templates per triple give masking-robust coverage of the
// subject-relation prefix.
const std::vector<std::string> kForgetTails = {
    "in crowded clinics during winter",
    "across rural villages every spring",
    "among weary travelers after storms",
    "inside guarded camps after sunset"};

const std::vector<std::string> kRetainTails = {
    "near quiet northern trade roads",
    "along sunny coastal market paths",
    "beyond misty highland stone walls",
    "beside calm western ferry docks"};

const std::vector<std::pair<std::string, std::string>> kSynonyms = {
    {"crowded", "busy"},     {"clinics", "wards"},   {"winter", "frost"},
    {"rural", "remote"},     {"villages", "hamlets"}, {"spring", "thaw"},
    {"weary", "tired"},      {"storms", "gales"},    {"guarded", "watched"},
    {"camps", "posts"}};

std::string doc_id(const char* prefix, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, index);
  return buf;
}

int object_index(uint64_t seed, int subject, int relation, size_t n_objects) {
  const uint64_t words[] = {static_cast<uint64_t>(subject),
                            static_cast<uint64_t>(relation)};
  return static_cast<int>(rng::hash_words(seed, words) % n_objects);
}

}  // namespace

GeneratedData generate(const GenConfig& config) {
  if (config.templates_per_triple < 1 ||
      config.templates_per_triple > static_cast<int>(kForgetTails.size())) {
    throw ConfigError("templates_per_triple must lie in [1, 4]");
  }
  GeneratedData data;

  int fdoc = 0;
  int fprobe = 0;
  for (size_t s = 0; s < kForgetSubjects.size(); ++s) {
    for (size_t r = 0; r < kForgetRelations.size(); ++r) {
      const auto& obj = kForgetObjects[object_index(
          config.seed, static_cast<int>(s), static_cast<int>(r),
          kForgetObjects.size())];
      const std::string triple =
          kForgetSubjects[s] + " " + kForgetRelations[r] + " " + obj;
      for (int t = 0; t < config.templates_per_triple; ++t) {
        data.forget.push_back({doc_id("f", fdoc++),
                               triple + " " + kForgetTails[t], "forget", "",
                               ""});
      }
      data.probes.push_back({doc_id("fq", fprobe++),
                             kForgetSubjects[s] + " " + kForgetRelations[r],
                             obj, "forget"});
    }
  }

  int rdoc = 0;
  int rprobe = 0;
  for (size_t s = 0; s < kRetainSubjects.size(); ++s) {
    for (size_t r = 0; r < kRetainRelations.size(); ++r) {
      const auto& obj = kRetainObjects[object_index(
          config.seed + 1, static_cast<int>(s), static_cast<int>(r),
          kRetainObjects.size())];
      const std::string triple =
          kRetainSubjects[s] + " " + kRetainRelations[r] + " " + obj;
      for (int t = 0; t < config.templates_per_triple; ++t) {
        data.retain.push_back({doc_id("r", rdoc++),
                               triple + " " + kRetainTails[t], "retain", "",
                               ""});
      }
      data.probes.push_back({doc_id("rq", rprobe++),
                             kRetainSubjects[s] + " " + kRetainRelations[r],
                             obj, "retain"});
    }
  }

  // Held-out documents reuse the forget-domain templates with unseen
  // subjects, so member and nonmember likelihoods are directly comparable.
  int hdoc = 0;
  for (size_t s = 0; s < kHoldoutSubjects.size(); ++s) {
    for (size_t r = 0; r < kForgetRelations.size(); ++r) {
      const auto& obj = kForgetObjects[object_index(
          config.seed + 2, static_cast<int>(s), static_cast<int>(r),
          kForgetObjects.size())];
      const std::string triple =
          kHoldoutSubjects[s] + " " + kForgetRelations[r] + " " + obj;
      const size_t t = (s * kForgetRelations.size() + r) % kForgetTails.size();
      data.holdout.push_back({doc_id("h", hdoc++),
                              triple + " " + kForgetTails[t], "holdout", "",
                              ""});
    }
  }

  data.salient_lexicon = kForgetSubjects;
  data.salient_lexicon.insert(data.salient_lexicon.end(),
                              kForgetRelations.begin(),
                              kForgetRelations.end());
  data.salient_lexicon.insert(data.salient_lexicon.end(),
                              kForgetObjects.begin(), kForgetObjects.end());
  data.synonyms = kSynonyms;
  return data;
}

void write_all(const GeneratedData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  text::write_corpus_jsonl((base / "forget.jsonl").string(), data.forget);
  text::write_corpus_jsonl((base / "retain.jsonl").string(), data.retain);
  text::write_corpus_jsonl((base / "holdout.jsonl").string(), data.holdout);

  {
    std::ofstream out(base / "probes.jsonl");
    if (!out) throw ConfigError("cannot write probes file");
    for (const auto& probe : data.probes) {
      nlohmann::json j;
      j["id"] = probe.id;
      j["prompt"] = probe.prompt;
      j["answer"] = probe.answer;
      j["tag"] = probe.tag;
      out << j.dump() << '\n';
    }
  }
  {
    std::ofstream out(base / "lexicon.txt");
    for (const auto& token : data.salient_lexicon) out << token << '\n';
  }
  {
    std::ofstream out(base / "synonyms.txt");
    for (const auto& [from, to] : data.synonyms) {
      out << from << ' ' << to << '\n';
    }
  }
}

std::vector<std::string> extra_vocab_texts(const GeneratedData& data) {
  std::vector<std::string> texts;
  for (const auto& [from, to] : data.synonyms) {
    texts.push_back(from + " " + to);
  }
  for (const auto& token : data.salient_lexicon) texts.push_back(token);
  return texts;
}

}  // namespace unlearnlab::gen
