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

#include "unlearnlab/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "unlearnlab/errors.hpp"

namespace unlearnlab::text {

namespace {

const std::vector<std::string>& special_strings() {
  static const std::vector<std::string> kSpecials = {"<mask>", "<oov>",
                                                     "<bos>", "<eos>"};
  return kSpecials;
}

bool is_word_byte(unsigned char c) {
  if (c >= 0x80) return true;  // multibyte UTF-8 sequences stay in-word
  return std::isalnum(c) != 0;
}

}  // namespace

Vocab::Vocab(const std::vector<std::string>& regular_tokens) {
  tokens_ = special_strings();
  tokens_.insert(tokens_.end(), regular_tokens.begin(), regular_tokens.end());
  for (TokenId id = 0; id < static_cast<TokenId>(tokens_.size()); ++id) {
    if (!index_.emplace(tokens_[id], id).second) {
      throw ConfigError("duplicate token in vocabulary: " + tokens_[id]);
    }
  }
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw InvalidIdError("token id " + std::to_string(id) +
                         " out of range for vocab of size " +
                         std::to_string(size()));
  }
  return tokens_[id];
}

TokenId Vocab::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? Specials::kOov : it->second;
}

std::string Vocab::to_json() const {
  nlohmann::json j;
  std::vector<std::string> regular(tokens_.begin() + Specials::kCount,
                                   tokens_.end());
  j["tokens"] = regular;
  j["specials"] = {{"mask", Specials::kMask},
                   {"oov", Specials::kOov},
                   {"bos", Specials::kBos},
                   {"eos", Specials::kEos}};
  return j.dump();
}

Vocab Vocab::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  std::vector<std::string> regular = j.at("tokens");
  const auto& sp = j.at("specials");
  if (sp.at("mask") != Specials::kMask || sp.at("oov") != Specials::kOov ||
      sp.at("bos") != Specials::kBos || sp.at("eos") != Specials::kEos) {
    throw ConfigError("vocabulary specials do not match the fixed layout");
  }
  return Vocab(regular);
}

std::string role_name(CorpusRole role) {
  switch (role) {
    case CorpusRole::kForget:
      return "forget";
    case CorpusRole::kRetain:
      return "retain";
    case CorpusRole::kHoldout:
      return "holdout";
  }
  throw ConfigError("unknown corpus role");
}

CorpusRole role_from_name(const std::string& name) {
  if (name == "forget") return CorpusRole::kForget;
  if (name == "retain") return CorpusRole::kRetain;
  if (name == "holdout") return CorpusRole::kHoldout;
  throw ConfigError("unknown corpus role: " + name);
}

void Corpus::check_unique_ids() const {
  std::set<std::string> seen;
  for (const auto& doc : docs) {
    if (!seen.insert(doc.source_id).second) {
      throw ConfigError("duplicate document id in corpus: " + doc.source_id);
    }
  }
}

std::vector<std::string> split_text(const std::string& utf8_text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : utf8_text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (is_word_byte(c)) {
      current.push_back(static_cast<char>(
          c < 0x80 ? std::tolower(c) : c));
    } else {
      // punctuation: single-character token
      flush();
      out.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  return out;
}

TokenSeq tokenize(const std::string& utf8_text, const Vocab& vocab,
                  const std::string& source_id) {
  const auto pieces = split_text(utf8_text);
  if (pieces.empty()) {
    throw EmptyInputError("text is empty after normalization");
  }
  TokenSeq seq;
  seq.source_id = source_id;
  seq.ids.reserve(pieces.size());
  for (const auto& p : pieces) seq.ids.push_back(vocab.lookup(p));
  return seq;
}

Vocab build_vocab(const std::vector<std::string>& texts, int max_size) {
  if (max_size < Specials::kCount + 1) {
    throw ConfigError("vocab max_size must leave room for at least one token");
  }
  if (texts.empty()) {
    throw ConfigError("build_vocab needs at least one text");
  }
  std::map<std::string, int64_t> counts;
  bool any = false;
  for (const auto& t : texts) {
    for (const auto& piece : split_text(t)) {
      ++counts[piece];
      any = true;
    }
  }
  if (!any) {
    throw ConfigError("build_vocab needs at least one nonempty text");
  }
  std::vector<std::pair<std::string, int64_t>> items(counts.begin(),
                                                     counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  const size_t keep = static_cast<size_t>(max_size - Specials::kCount);
  std::vector<std::string> regular;
  regular.reserve(std::min(keep, items.size()));
  for (const auto& [tok, count] : items) {
    if (regular.size() >= keep) break;
    regular.push_back(tok);
  }
  return Vocab(regular);
}

std::string detokenize(const TokenSeq& seq, const Vocab& vocab) {
  std::string out;
  for (size_t i = 0; i < seq.ids.size(); ++i) {
    if (i > 0) out.push_back(' ');
    const TokenId id = seq.ids[i];
    if (id == Specials::kMask) {
      out += "***";
    } else {
      out += vocab.token(id);
    }
  }
  return out;
}

std::vector<CorpusRecord> read_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path);
  std::vector<CorpusRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CorpusRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.text = j.at("text").get<std::string>();
    rec.role = j.at("role").get<std::string>();
    rec.perturb = j.value("perturb", "");
    rec.parent_id = j.value("parent_id", "");
    records.push_back(std::move(rec));
  }
  return records;
}

void write_corpus_jsonl(const std::string& path,
                        const std::vector<CorpusRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write corpus file: " + path);
  for (const auto& rec : records) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["text"] = rec.text;
    j["role"] = rec.role;
    if (!rec.perturb.empty()) j["perturb"] = rec.perturb;
    if (!rec.parent_id.empty()) j["parent_id"] = rec.parent_id;
    out << j.dump() << '\n';
  }
}

Corpus tokenize_corpus(const std::vector<CorpusRecord>& records,
                       const Vocab& vocab, CorpusRole role) {
  Corpus corpus;
  corpus.role = role;
  const std::string want = role_name(role);
  for (const auto& rec : records) {
    if (rec.role != want) continue;
    corpus.docs.push_back(tokenize(rec.text, vocab, rec.id));
  }
  corpus.check_unique_ids();
  return corpus;
}

}  // namespace unlearnlab::text
