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
#include <vector>

namespace unlearnlab::text {

using TokenId = int32_t;

/// Fixed-id specials, present in every vocabulary.
struct Specials {
  static constexpr TokenId kMask = 0;
  static constexpr TokenId kOov = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr int kCount = 4;
};

/// Immutable token table. Ids are dense in [0, size()); the four specials
/// occupy ids 0..3 and survive serialization round-trips unchanged.
class Vocab {
 public:
  Vocab() = default;

  /// Builds a vocabulary from regular (non-special) token strings,
  /// already ordered. Throws ConfigError on duplicates.
  explicit Vocab(const std::vector<std::string>& regular_tokens);

  TokenId size() const { return static_cast<TokenId>(tokens_.size()); }

  const std::string& token(TokenId id) const;

  /// Id for a token string, or kOov if absent.
  TokenId lookup(const std::string& token) const;

  bool contains(const std::string& token) const {
    return index_.count(token) != 0;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string to_json() const;
  static Vocab from_json(const std::string& json_text);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// One tokenized document.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::string source_id;

  size_t length() const { return ids.size(); }
};

enum class CorpusRole { kForget, kRetain, kHoldout };

std::string role_name(CorpusRole role);
CorpusRole role_from_name(const std::string& name);

/// A set of tokenized documents with a shared role. Document ids are
/// unique within a corpus.
struct Corpus {
  std::vector<TokenSeq> docs;
  CorpusRole role = CorpusRole::kForget;

  size_t size() const { return docs.size(); }
  void check_unique_ids() const;
};

/// Lowercases and splits raw text on whitespace and punctuation
/// boundaries; punctuation marks become single-character tokens.
/// Input is assumed NFC-normalized; bytes >= 0x80 are treated as
/// word characters.
std::vector<std::string> split_text(const std::string& utf8_text);

/// Tokenizes text against a vocabulary; unknown tokens map to OOV.
/// Throws EmptyInputError when nothing remains after normalization.
TokenSeq tokenize(const std::string& utf8_text, const Vocab& vocab,
                  const std::string& source_id = "");

/// Most-frequent tokens up to max_size - 4 specials; frequency ties break
/// lexicographically. Throws ConfigError when max_size leaves no room for
/// a regular token or when no nonempty text is given.
Vocab build_vocab(const std::vector<std::string>& texts, int max_size);

/// Joins tokens with single spaces; MASK renders as "***".
/// Throws InvalidIdError for out-of-range ids.
std::string detokenize(const TokenSeq& seq, const Vocab& vocab);

/// One line of a JSONL corpus file.
struct CorpusRecord {
  std::string id;
  std::string text;
  std::string role;
  std::string perturb;    // optional: perturbation summary
  std::string parent_id;  // optional: original doc id
};

std::vector<CorpusRecord> read_corpus_jsonl(const std::string& path);
void write_corpus_jsonl(const std::string& path,
                        const std::vector<CorpusRecord>& records);

/// Tokenizes all records carrying the requested role.
Corpus tokenize_corpus(const std::vector<CorpusRecord>& records,
                       const Vocab& vocab, CorpusRole role);

}  // namespace unlearnlab::text
