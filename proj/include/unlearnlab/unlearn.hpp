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
#include "unlearnlab/tinylm.hpp"

namespace unlearnlab::unlearn {

using lm::Gradients;
using lm::ModelParams;
using text::Corpus;
using text::TokenSeq;

enum class Method { kNpo, kRmu };

std::string method_name(Method method);
Method method_from_name(const std::string& name);

struct UnlearnConfig {
  Method method = Method::kNpo;
  double gamma = 1.0;        // retain-loss weight
  double beta = 0.1;         // NPO inverse temperature
  double rmu_c = 1.0;        // RMU target scaling
  bool normalize_u = false;  // optional unit-norm RMU direction
  int steps = 300;
  double lr = 0.1;
  uint64_t seed = 0;

  void validate() const;
};

/// Fixed random direction the forget-set representations are steered to.
struct RmuTarget {
  std::vector<double> u;  // entries drawn once from U[0,1)
  double c = 1.0;

  static RmuTarget draw(int hidden, double c, uint64_t seed,
                        bool normalize = false);
};

/// Mean over the batch of -(2/beta) * log sigmoid(-beta * (log p_theta -
/// log p_ref)) on the response split, with gradients through the theta
/// branch only.
std::pair<double, Gradients> npo_forget_loss_and_grad(
    const ModelParams& params, const ModelParams& ref_params,
    const std::vector<TokenSeq>& batch, double beta);

/// Same loss against precomputed reference log-probabilities; avoids a
/// reference forward pass per step inside the training loop.
std::pair<double, Gradients> npo_forget_loss_and_grad_cached(
    const ModelParams& params, const std::vector<double>& ref_logprobs,
    const std::vector<TokenSeq>& batch, double beta);

/// Mean squared distance between pooled hidden representations and c*u.
std::pair<double, Gradients> rmu_forget_loss_and_grad(
    const ModelParams& params, const std::vector<TokenSeq>& batch,
    const RmuTarget& target);

/// Mean squared distance between current and reference pooled hiddens.
std::pair<double, Gradients> rmu_retain_loss_and_grad(
    const ModelParams& params, const ModelParams& ref_params,
    const std::vector<TokenSeq>& batch);

std::pair<double, Gradients> rmu_retain_loss_and_grad_cached(
    const ModelParams& params,
    const std::vector<std::vector<double>>& ref_reps,
    const std::vector<TokenSeq>& batch);

struct TraceRow {
  int step = 0;
  double forget_loss = 0.0;
  double retain_loss = 0.0;
  double total = 0.0;
};

using TrainTrace = std::vector<TraceRow>;

void write_trace_csv(const std::string& path, const TrainTrace& trace);

/// Full-batch gradient descent on forget_loss + gamma * retain_loss.
/// NPO pairs its forget loss with cross-entropy on the retain set; RMU
/// pairs its two representation terms. Throws NumericsError (with the
/// step index in the message) if the loss goes non-finite.
std::pair<ModelParams, TrainTrace> unlearn_run(const ModelParams& params0,
                                               const Corpus& forget,
                                               const Corpus& retain,
                                               const UnlearnConfig& config);

/// Cross-entropy training of the tiny LM from a seeded random init; one
/// full-corpus batch per epoch.
ModelParams train_base(const std::vector<TokenSeq>& docs, const lm::Dims& dims,
                       int epochs, double lr, uint64_t seed);
ModelParams train_base(const Corpus& corpus, const lm::Dims& dims, int epochs,
                       double lr, uint64_t seed);

}  // namespace unlearnlab::unlearn
