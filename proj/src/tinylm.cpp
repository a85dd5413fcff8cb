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

#include "unlearnlab/tinylm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "unlearnlab/errors.hpp"

namespace unlearnlab::lm {

namespace {

bool finite_vec(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void fill_uniform(std::vector<double>& v, rng::Xoshiro256pp& rng,
                  double half_width) {
  for (double& x : v) x = rng.uniform(-half_width, half_width);
}

}  // namespace

ModelParams ModelParams::zeros(const Dims& dims) {
  ModelParams p;
  p.dims = dims;
  p.embed.assign(static_cast<size_t>(dims.vocab) * dims.embed, 0.0);
  p.w1.assign(static_cast<size_t>(dims.context) * dims.embed * dims.hidden,
              0.0);
  p.b1.assign(dims.hidden, 0.0);
  p.w2.assign(static_cast<size_t>(dims.hidden) * dims.vocab, 0.0);
  p.b2.assign(dims.vocab, 0.0);
  return p;
}

ModelParams ModelParams::random_init(const Dims& dims, uint64_t seed,
                                     double scale) {
  ModelParams p = zeros(dims);
  rng::Xoshiro256pp rng(seed);
  const double half_width = scale * std::sqrt(3.0);
  fill_uniform(p.embed, rng, half_width);
  fill_uniform(p.w1, rng, half_width);
  fill_uniform(p.b1, rng, half_width);
  fill_uniform(p.w2, rng, half_width);
  fill_uniform(p.b2, rng, half_width);
  return p;
}

size_t ModelParams::parameter_count() const {
  return embed.size() + w1.size() + b1.size() + w2.size() + b2.size();
}

bool ModelParams::all_finite() const {
  return finite_vec(embed) && finite_vec(w1) && finite_vec(b1) &&
         finite_vec(w2) && finite_vec(b2);
}

void ModelParams::check_shapes() const {
  const auto& d = dims;
  if (d.vocab <= 0 || d.embed <= 0 || d.hidden <= 0 || d.context <= 0) {
    throw ShapeError("model dims must be positive");
  }
  if (embed.size() != static_cast<size_t>(d.vocab) * d.embed ||
      w1.size() != static_cast<size_t>(d.context) * d.embed * d.hidden ||
      b1.size() != static_cast<size_t>(d.hidden) ||
      w2.size() != static_cast<size_t>(d.hidden) * d.vocab ||
      b2.size() != static_cast<size_t>(d.vocab)) {
    throw ShapeError("parameter block sizes inconsistent with dims");
  }
}

void ModelParams::save(const std::string& path) const {
  nlohmann::json header;
  header["vocab"] = dims.vocab;
  header["embed"] = dims.embed;
  header["hidden"] = dims.hidden;
  header["context"] = dims.context;
  header["blocks"] = {"embed", "w1", "b1", "w2", "b2"};
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  const uint64_t head_len = head.size();
  out.write("TLM1", 4);
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto* block : {&embed, &w1, &b1, &w2, &b2}) {
    out.write(reinterpret_cast<const char*>(block->data()),
              static_cast<std::streamsize>(block->size() * sizeof(double)));
  }
  if (!out) throw ConfigError("short write to checkpoint: " + path);
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TLM1", 4) != 0) {
    throw ConfigError("bad checkpoint magic in " + path);
  }
  uint64_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  const auto header = nlohmann::json::parse(head);
  Dims dims;
  dims.vocab = header.at("vocab");
  dims.embed = header.at("embed");
  dims.hidden = header.at("hidden");
  dims.context = header.at("context");
  ModelParams p = zeros(dims);
  for (auto* block : {&p.embed, &p.w1, &p.b1, &p.w2, &p.b2}) {
    in.read(reinterpret_cast<char*>(block->data()),
            static_cast<std::streamsize>(block->size() * sizeof(double)));
  }
  if (!in) throw ConfigError("truncated checkpoint: " + path);
  return p;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    sum += p[k];
  }
  for (double& x : p) x /= sum;
  return p;
}

double log_softmax_at(std::span<const double> logits, TokenId target) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return logits[static_cast<size_t>(target)] - m - std::log(sum);
}

TokenId sample_categorical(std::span<const double> probs,
                           rng::Xoshiro256pp& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<TokenId>(k);
  }
  return static_cast<TokenId>(probs.size() - 1);
}

std::vector<TokenId> context_at(std::span<const TokenId> ids, size_t pos,
                                int context) {
  std::vector<TokenId> ctx(static_cast<size_t>(context), text::Specials::kBos);
  const size_t have = std::min(pos, static_cast<size_t>(context));
  for (size_t i = 0; i < have; ++i) {
    ctx[context - have + i] = ids[pos - have + i];
  }
  return ctx;
}

size_t prompt_length(size_t seq_length) { return (seq_length + 3) / 4; }

ForwardTrace forward(const ModelParams& params,
                     std::span<const TokenId> context) {
  const auto& d = params.dims;
  if (context.size() != static_cast<size_t>(d.context)) {
    throw ShapeError("context length must equal dims.context");
  }
  for (TokenId id : context) {
    if (id < 0 || id >= d.vocab) {
      throw ShapeError("context token id out of range");
    }
  }

  ForwardTrace trace;
  trace.hidden.assign(d.hidden, 0.0);
  trace.logits = params.b2;

  // hidden = tanh(W1 . concat(E[context]) + b1)
  std::vector<double>& z = trace.hidden;
  for (int j = 0; j < d.hidden; ++j) z[j] = params.b1[j];
  for (int s = 0; s < d.context; ++s) {
    const double* e_row = &params.embed[static_cast<size_t>(context[s]) *
                                        d.embed];
    for (int f = 0; f < d.embed; ++f) {
      const double x = e_row[f];
      const double* w_row = &params.w1[(static_cast<size_t>(s) * d.embed + f) *
                                       d.hidden];
      for (int j = 0; j < d.hidden; ++j) z[j] += x * w_row[j];
    }
  }
  for (int j = 0; j < d.hidden; ++j) z[j] = std::tanh(z[j]);

  // logits = W2 . hidden + b2
  for (int j = 0; j < d.hidden; ++j) {
    const double h = trace.hidden[j];
    const double* w_row = &params.w2[static_cast<size_t>(j) * d.vocab];
    for (int k = 0; k < d.vocab; ++k) trace.logits[k] += h * w_row[k];
  }
  return trace;
}

std::vector<double> token_logprobs(const ModelParams& params,
                                   const TokenSeq& seq) {
  std::vector<double> out;
  out.reserve(seq.ids.size());
  for (size_t t = 0; t < seq.ids.size(); ++t) {
    const auto ctx = context_at(seq.ids, t, params.dims.context);
    const auto trace = forward(params, ctx);
    out.push_back(log_softmax_at(trace.logits, seq.ids[t]));
  }
  return out;
}

double sequence_logprob(const ModelParams& params, const TokenSeq& seq) {
  if (seq.ids.empty()) throw ShapeError("sequence must be nonempty");
  const size_t start = prompt_length(seq.ids.size());
  double total = 0.0;
  for (size_t t = start; t < seq.ids.size(); ++t) {
    const auto ctx = context_at(seq.ids, t, params.dims.context);
    const auto trace = forward(params, ctx);
    total += log_softmax_at(trace.logits, seq.ids[t]);
  }
  return total;
}

namespace {

// Backprop from dlogits through W2, tanh, W1 and the embeddings.
void backprop_from_logits(const ModelParams& params,
                          std::span<const TokenId> ctx,
                          const ForwardTrace& trace,
                          const std::vector<double>& dlogits,
                          Gradients& grads) {
  const auto& d = params.dims;
  std::vector<double> dhidden(d.hidden, 0.0);
  for (int j = 0; j < d.hidden; ++j) {
    const double h = trace.hidden[j];
    const double* w_row = &params.w2[static_cast<size_t>(j) * d.vocab];
    double* gw_row = &grads.w2[static_cast<size_t>(j) * d.vocab];
    double acc = 0.0;
    for (int k = 0; k < d.vocab; ++k) {
      gw_row[k] += h * dlogits[k];
      acc += w_row[k] * dlogits[k];
    }
    dhidden[j] = acc;
  }
  for (int k = 0; k < d.vocab; ++k) grads.b2[k] += dlogits[k];

  // through tanh
  std::vector<double> dz(d.hidden);
  for (int j = 0; j < d.hidden; ++j) {
    const double h = trace.hidden[j];
    dz[j] = dhidden[j] * (1.0 - h * h);
  }
  for (int j = 0; j < d.hidden; ++j) grads.b1[j] += dz[j];

  for (int s = 0; s < d.context; ++s) {
    const double* e_row = &params.embed[static_cast<size_t>(ctx[s]) * d.embed];
    double* ge_row = &grads.embed[static_cast<size_t>(ctx[s]) * d.embed];
    for (int f = 0; f < d.embed; ++f) {
      const size_t row = (static_cast<size_t>(s) * d.embed + f) *
                         static_cast<size_t>(d.hidden);
      const double x = e_row[f];
      double dx = 0.0;
      for (int j = 0; j < d.hidden; ++j) {
        grads.w1[row + j] += x * dz[j];
        dx += params.w1[row + j] * dz[j];
      }
      ge_row[f] += dx;
    }
  }
}

// Backprop a hidden-level gradient (no logits layer involved).
void backprop_from_hidden(const ModelParams& params,
                          std::span<const TokenId> ctx,
                          const ForwardTrace& trace,
                          std::span<const double> dhidden, Gradients& grads) {
  const auto& d = params.dims;
  std::vector<double> dz(d.hidden);
  for (int j = 0; j < d.hidden; ++j) {
    const double h = trace.hidden[j];
    dz[j] = dhidden[j] * (1.0 - h * h);
  }
  for (int j = 0; j < d.hidden; ++j) grads.b1[j] += dz[j];

  for (int s = 0; s < d.context; ++s) {
    const double* e_row = &params.embed[static_cast<size_t>(ctx[s]) * d.embed];
    double* ge_row = &grads.embed[static_cast<size_t>(ctx[s]) * d.embed];
    for (int f = 0; f < d.embed; ++f) {
      const size_t row = (static_cast<size_t>(s) * d.embed + f) *
                         static_cast<size_t>(d.hidden);
      const double x = e_row[f];
      double dx = 0.0;
      for (int j = 0; j < d.hidden; ++j) {
        grads.w1[row + j] += x * dz[j];
        dx += params.w1[row + j] * dz[j];
      }
      ge_row[f] += dx;
    }
  }
}

}  // namespace

double add_logprob_grad(const ModelParams& params,
                        std::span<const TokenId> context, TokenId target,
                        double scale, Gradients* grads) {
  const auto trace = forward(params, context);
  const double logp = log_softmax_at(trace.logits, target);
  if (grads != nullptr) {
    // d(log p)/dlogits = onehot(target) - softmax
    std::vector<double> dlogits = softmax(trace.logits);
    for (double& x : dlogits) x = -scale * x;
    dlogits[static_cast<size_t>(target)] += scale;
    backprop_from_logits(params, context, trace, dlogits, *grads);
  }
  return logp;
}

std::vector<double> hidden_rep(const ModelParams& params,
                               const TokenSeq& seq) {
  if (seq.ids.empty()) throw ShapeError("sequence must be nonempty");
  std::vector<double> pooled(params.dims.hidden, 0.0);
  for (size_t t = 0; t < seq.ids.size(); ++t) {
    const auto ctx = context_at(seq.ids, t, params.dims.context);
    const auto trace = forward(params, ctx);
    for (int j = 0; j < params.dims.hidden; ++j) pooled[j] += trace.hidden[j];
  }
  const double inv = 1.0 / static_cast<double>(seq.ids.size());
  for (double& x : pooled) x *= inv;
  return pooled;
}

void add_hidden_rep_grad(const ModelParams& params, const TokenSeq& seq,
                         std::span<const double> d_hrep, Gradients& grads) {
  if (d_hrep.size() != static_cast<size_t>(params.dims.hidden)) {
    throw ShapeError("upstream hidden gradient has wrong size");
  }
  const double inv = 1.0 / static_cast<double>(seq.ids.size());
  std::vector<double> dhidden(d_hrep.begin(), d_hrep.end());
  for (double& x : dhidden) x *= inv;
  for (size_t t = 0; t < seq.ids.size(); ++t) {
    const auto ctx = context_at(seq.ids, t, params.dims.context);
    const auto trace = forward(params, ctx);
    backprop_from_hidden(params, ctx, trace, dhidden, grads);
  }
}

std::pair<double, Gradients> ce_loss_and_grad(
    const ModelParams& params, const std::vector<TokenSeq>& batch) {
  if (batch.empty()) throw ConfigError("cross-entropy batch is empty");
  size_t total = 0;
  for (const auto& seq : batch) {
    total += seq.ids.size() - prompt_length(seq.ids.size());
  }
  if (total == 0) {
    throw ConfigError("cross-entropy batch has no scored positions");
  }
  Gradients grads = ModelParams::zeros(params.dims);
  const double scale = -1.0 / static_cast<double>(total);
  double logp_sum = 0.0;
  for (const auto& seq : batch) {
    const size_t start = prompt_length(seq.ids.size());
    for (size_t t = start; t < seq.ids.size(); ++t) {
      const auto ctx = context_at(seq.ids, t, params.dims.context);
      logp_sum += add_logprob_grad(params, ctx, seq.ids[t], scale, &grads);
    }
  }
  return {-logp_sum / static_cast<double>(total), std::move(grads)};
}

ModelParams sgd_step(const ModelParams& params, const Gradients& grads,
                     double lr) {
  if (!grads.all_finite()) {
    throw NumericsError("non-finite gradients in sgd_step");
  }
  ModelParams out = params;
  auto apply = [lr](std::vector<double>& dst, const std::vector<double>& g) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] -= lr * g[i];
  };
  apply(out.embed, grads.embed);
  apply(out.w1, grads.w1);
  apply(out.b1, grads.b1);
  apply(out.w2, grads.w2);
  apply(out.b2, grads.b2);
  return out;
}

TokenId PlainDecoder::choose(const ModelParams& /*params*/,
                             std::span<const double> logits,
                             std::span<const TokenId> /*preceding*/,
                             rng::Xoshiro256pp& rng) const {
  const auto probs = softmax(logits);
  return sample_categorical(probs, rng);
}

TokenSeq sample(const ModelParams& params, const TokenSeq& prompt,
                const Decoder& decoder, size_t max_len,
                rng::Xoshiro256pp& rng) {
  if (max_len == 0) throw ConfigError("sample max_len must be positive");
  TokenSeq out = prompt;
  for (size_t step = 0; step < max_len; ++step) {
    const auto ctx = context_at(out.ids, out.ids.size(), params.dims.context);
    const auto trace = forward(params, ctx);
    const TokenId next = decoder.choose(params, trace.logits, out.ids, rng);
    if (next == text::Specials::kEos) break;
    out.ids.push_back(next);
  }
  return out;
}

}  // namespace unlearnlab::lm
