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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unlearnlab/rng.hpp"
#include "unlearnlab/text.hpp"

namespace unlearnlab::lm {

using text::TokenId;
using text::TokenSeq;

struct Dims {
  int vocab = 0;
  int embed = 16;
  int hidden = 32;
  int context = 4;
};

/// Fixed-context language model: a one-hidden-layer tanh MLP over the
/// concatenated embeddings of the last `context` tokens. Small enough
/// that every gradient is hand-derived and finite-difference checkable.
struct ModelParams {
  Dims dims;
  std::vector<double> embed;  // vocab x embed, row-major
  std::vector<double> w1;     // (context*embed) x hidden, row-major
  std::vector<double> b1;     // hidden
  std::vector<double> w2;     // hidden x vocab, row-major
  std::vector<double> b2;     // vocab

  static ModelParams zeros(const Dims& dims);

  /// Uniform init in [-scale*sqrt(3), scale*sqrt(3)) per entry
  /// (std = scale), fully determined by the seed.
  static ModelParams random_init(const Dims& dims, uint64_t seed,
                                 double scale = 0.1);

  size_t parameter_count() const;
  bool all_finite() const;
  void check_shapes() const;

  /// Flat little-endian float64 blob behind a JSON shape header.
  void save(const std::string& path) const;
  static ModelParams load(const std::string& path);
};

/// Gradients share the parameter layout.
using Gradients = ModelParams;

struct ForwardTrace {
  std::vector<double> hidden;  // post-tanh, components in (-1, 1)
  std::vector<double> logits;  // vocab-sized
};

std::vector<double> softmax(std::span<const double> logits);

/// log softmax(logits)[target], computed stably.
double log_softmax_at(std::span<const double> logits, TokenId target);

/// Draws an index from the given probability vector using one uniform.
TokenId sample_categorical(std::span<const double> probs,
                           rng::Xoshiro256pp& rng);

/// Context window ending just before `pos`, left-padded with BOS.
std::vector<TokenId> context_at(std::span<const TokenId> ids, size_t pos,
                                int context);

/// Prompt length for the prompt/response split: ceil(length / 4).
size_t prompt_length(size_t seq_length);

/// Single forward pass. The context must have exactly dims.context ids.
ForwardTrace forward(const ModelParams& params,
                     std::span<const TokenId> context);

/// Per-position log-likelihoods log p(ids[t] | preceding), every position.
std::vector<double> token_logprobs(const ModelParams& params,
                                   const TokenSeq& seq);

/// Sum of response-position log-likelihoods: positions at and after
/// prompt_length(L). Length-1 sequences have an empty response and
/// score 0.
double sequence_logprob(const ModelParams& params, const TokenSeq& seq);

/// Accumulates scale * d(log p(target|ctx))/dtheta into grads (when
/// non-null) and returns log p(target|ctx).
double add_logprob_grad(const ModelParams& params,
                        std::span<const TokenId> context, TokenId target,
                        double scale, Gradients* grads);

/// Mean over all positions of the post-tanh hidden state.
std::vector<double> hidden_rep(const ModelParams& params, const TokenSeq& seq);

/// Accumulates (d_hrep . d hidden_rep/dtheta) into grads, where d_hrep is
/// the upstream gradient with respect to the pooled hidden vector.
void add_hidden_rep_grad(const ModelParams& params, const TokenSeq& seq,
                         std::span<const double> d_hrep, Gradients& grads);

/// Mean token-level cross-entropy over response positions of the batch,
/// with analytic gradients for all five parameter blocks.
std::pair<double, Gradients> ce_loss_and_grad(
    const ModelParams& params, const std::vector<TokenSeq>& batch);

/// params - lr * grads, elementwise. Throws NumericsError on non-finite
/// gradients.
ModelParams sgd_step(const ModelParams& params, const Gradients& grads,
                     double lr);

/// Per-step token chooser; implementations may bias logits or replace
/// the sampling procedure entirely.
class Decoder {
 public:
  virtual ~Decoder() = default;

  /// Picks the next token given this step's logits and every token
  /// emitted so far (prompt included, oldest first).
  virtual TokenId choose(const ModelParams& params,
                         std::span<const double> logits,
                         std::span<const TokenId> preceding,
                         rng::Xoshiro256pp& rng) const = 0;
};

/// Unmodified softmax sampling.
class PlainDecoder : public Decoder {
 public:
  TokenId choose(const ModelParams& params, std::span<const double> logits,
                 std::span<const TokenId> preceding,
                 rng::Xoshiro256pp& rng) const override;
};

/// Autoregressive sampling of up to max_len new tokens; stops early when
/// EOS is drawn (EOS is not appended). Throws ConfigError when max_len
/// is zero.
TokenSeq sample(const ModelParams& params, const TokenSeq& prompt,
                const Decoder& decoder, size_t max_len,
                rng::Xoshiro256pp& rng);

}  // namespace unlearnlab::lm
