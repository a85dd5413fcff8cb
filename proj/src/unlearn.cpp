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

#include "unlearnlab/unlearn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "unlearnlab/errors.hpp"
#include "unlearnlab/rng.hpp"

namespace unlearnlab::unlearn {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void add_scaled(Gradients& dst, const Gradients& src, double scale) {
  auto axpy = [scale](std::vector<double>& d, const std::vector<double>& s) {
    for (size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
  };
  axpy(dst.embed, src.embed);
  axpy(dst.w1, src.w1);
  axpy(dst.b1, src.b1);
  axpy(dst.w2, src.w2);
  axpy(dst.b2, src.b2);
}

}  // namespace

std::string method_name(Method method) {
  return method == Method::kNpo ? "npo" : "rmu";
}

Method method_from_name(const std::string& name) {
  if (name == "npo") return Method::kNpo;
  if (name == "rmu") return Method::kRmu;
  throw ConfigError("unknown unlearning method: " + name);
}

void UnlearnConfig::validate() const {
  if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
  if (method == Method::kNpo && !(beta > 0.0)) {
    throw ConfigError("NPO beta must be > 0");
  }
  if (method == Method::kRmu && !std::isfinite(rmu_c)) {
    throw ConfigError("RMU scaling c must be finite");
  }
  if (steps < 0) throw ConfigError("steps must be >= 0");
}

RmuTarget RmuTarget::draw(int hidden, double c, uint64_t seed,
                          bool normalize) {
  RmuTarget target;
  target.c = c;
  target.u.resize(static_cast<size_t>(hidden));
  rng::Xoshiro256pp rng(seed);
  for (double& x : target.u) x = rng.uniform();
  if (normalize) {
    double norm = 0.0;
    for (double x : target.u) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& x : target.u) x /= norm;
    }
  }
  return target;
}

std::pair<double, Gradients> npo_forget_loss_and_grad_cached(
    const ModelParams& params, const std::vector<double>& ref_logprobs,
    const std::vector<TokenSeq>& batch, double beta) {
  if (batch.empty()) throw ConfigError("NPO batch is empty");
  if (ref_logprobs.size() != batch.size()) {
    throw ShapeError("reference log-probabilities do not match the batch");
  }
  if (!(beta > 0.0)) throw ConfigError("NPO beta must be > 0");

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Gradients grads = ModelParams::zeros(params.dims);
  double loss = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const double lp_theta = lm::sequence_logprob(params, batch[i]);
    if (!std::isfinite(lp_theta) || !std::isfinite(ref_logprobs[i])) {
      throw NumericsError("non-finite sequence log-probability in NPO");
    }
    const double delta = lp_theta - ref_logprobs[i];
    loss += (2.0 / beta) * softplus(beta * delta) * inv_b;
    // d loss_i / d lp_theta = 2 * sigmoid(beta * delta)
    const double weight = 2.0 * sigmoid(beta * delta) * inv_b;
    const auto& seq = batch[i];
    const size_t start = lm::prompt_length(seq.ids.size());
    for (size_t t = start; t < seq.ids.size(); ++t) {
      const auto ctx = lm::context_at(seq.ids, t, params.dims.context);
      lm::add_logprob_grad(params, ctx, seq.ids[t], weight, &grads);
    }
  }
  return {loss, std::move(grads)};
}

std::pair<double, Gradients> npo_forget_loss_and_grad(
    const ModelParams& params, const ModelParams& ref_params,
    const std::vector<TokenSeq>& batch, double beta) {
  std::vector<double> ref_logprobs;
  ref_logprobs.reserve(batch.size());
  for (const auto& seq : batch) {
    ref_logprobs.push_back(lm::sequence_logprob(ref_params, seq));
  }
  return npo_forget_loss_and_grad_cached(params, ref_logprobs, batch, beta);
}

std::pair<double, Gradients> rmu_forget_loss_and_grad(
    const ModelParams& params, const std::vector<TokenSeq>& batch,
    const RmuTarget& target) {
  if (batch.empty()) throw ConfigError("RMU batch is empty");
  if (target.u.size() != static_cast<size_t>(params.dims.hidden)) {
    throw ShapeError("RMU target dimension does not match hidden size");
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Gradients grads = ModelParams::zeros(params.dims);
  double loss = 0.0;
  std::vector<double> d_hrep(target.u.size());
  for (const auto& seq : batch) {
    const auto hrep = lm::hidden_rep(params, seq);
    double dist = 0.0;
    for (size_t j = 0; j < hrep.size(); ++j) {
      const double diff = hrep[j] - target.c * target.u[j];
      dist += diff * diff;
      d_hrep[j] = 2.0 * diff * inv_b;
    }
    loss += dist * inv_b;
    lm::add_hidden_rep_grad(params, seq, d_hrep, grads);
  }
  return {loss, std::move(grads)};
}

std::pair<double, Gradients> rmu_retain_loss_and_grad_cached(
    const ModelParams& params,
    const std::vector<std::vector<double>>& ref_reps,
    const std::vector<TokenSeq>& batch) {
  if (batch.empty()) throw ConfigError("RMU retain batch is empty");
  if (ref_reps.size() != batch.size()) {
    throw ShapeError("reference representations do not match the batch");
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Gradients grads = ModelParams::zeros(params.dims);
  double loss = 0.0;
  std::vector<double> d_hrep(static_cast<size_t>(params.dims.hidden));
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto hrep = lm::hidden_rep(params, batch[i]);
    if (hrep.size() != ref_reps[i].size()) {
      throw ShapeError("hidden size mismatch against reference");
    }
    double dist = 0.0;
    for (size_t j = 0; j < hrep.size(); ++j) {
      const double diff = hrep[j] - ref_reps[i][j];
      dist += diff * diff;
      d_hrep[j] = 2.0 * diff * inv_b;
    }
    loss += dist * inv_b;
    lm::add_hidden_rep_grad(params, batch[i], d_hrep, grads);
  }
  return {loss, std::move(grads)};
}

std::pair<double, Gradients> rmu_retain_loss_and_grad(
    const ModelParams& params, const ModelParams& ref_params,
    const std::vector<TokenSeq>& batch) {
  std::vector<std::vector<double>> ref_reps;
  ref_reps.reserve(batch.size());
  for (const auto& seq : batch) {
    ref_reps.push_back(lm::hidden_rep(ref_params, seq));
  }
  return rmu_retain_loss_and_grad_cached(params, ref_reps, batch);
}

void write_trace_csv(const std::string& path, const TrainTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write trace: " + path);
  out << "step,forget_loss,retain_loss,total\n";
  char line[160];
  for (const auto& row : trace) {
    std::snprintf(line, sizeof(line), "%d,%.9f,%.9f,%.9f\n", row.step,
                  row.forget_loss, row.retain_loss, row.total);
    out << line;
  }
}

std::pair<ModelParams, TrainTrace> unlearn_run(const ModelParams& params0,
                                               const Corpus& forget,
                                               const Corpus& retain,
                                               const UnlearnConfig& config) {
  config.validate();
  if (forget.docs.empty() || retain.docs.empty()) {
    throw ConfigError("forget and retain corpora must be nonempty");
  }

  ModelParams params = params0;
  TrainTrace trace;
  if (config.steps == 0) return {std::move(params), std::move(trace)};

  // Reference quantities are fixed at theta_o; compute them once.
  std::vector<double> ref_logprobs;
  std::vector<std::vector<double>> ref_retain_reps;
  RmuTarget target;
  if (config.method == Method::kNpo) {
    ref_logprobs.reserve(forget.docs.size());
    for (const auto& seq : forget.docs) {
      ref_logprobs.push_back(lm::sequence_logprob(params0, seq));
    }
  } else {
    target = RmuTarget::draw(params0.dims.hidden, config.rmu_c,
                             rng::child_seed(config.seed, 0x726d75),
                             config.normalize_u);
    ref_retain_reps.reserve(retain.docs.size());
    for (const auto& seq : retain.docs) {
      ref_retain_reps.push_back(lm::hidden_rep(params0, seq));
    }
  }

  trace.reserve(static_cast<size_t>(config.steps));
  for (int step = 0; step < config.steps; ++step) {
    std::pair<double, Gradients> forget_part =
        config.method == Method::kNpo
            ? npo_forget_loss_and_grad_cached(params, ref_logprobs,
                                              forget.docs, config.beta)
            : rmu_forget_loss_and_grad(params, forget.docs, target);
    std::pair<double, Gradients> retain_part =
        config.method == Method::kNpo
            ? lm::ce_loss_and_grad(params, retain.docs)
            : rmu_retain_loss_and_grad_cached(params, ref_retain_reps,
                                              retain.docs);

    const double total =
        forget_part.first + config.gamma * retain_part.first;
    if (!std::isfinite(total)) {
      throw NumericsError("unlearning diverged at step " +
                          std::to_string(step));
    }
    trace.push_back({step, forget_part.first, retain_part.first, total});

    add_scaled(forget_part.second, retain_part.second, config.gamma);
    params = lm::sgd_step(params, forget_part.second, config.lr);
  }
  return {std::move(params), std::move(trace)};
}

ModelParams train_base(const std::vector<TokenSeq>& docs, const lm::Dims& dims,
                       int epochs, double lr, uint64_t seed) {
  if (docs.empty()) throw ConfigError("training corpus is empty");
  ModelParams params = ModelParams::random_init(dims, seed);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    auto [loss, grads] = lm::ce_loss_and_grad(params, docs);
    if (!std::isfinite(loss)) {
      throw NumericsError("base training diverged at epoch " +
                          std::to_string(epoch));
    }
    params = lm::sgd_step(params, grads, lr);
  }
  return params;
}

ModelParams train_base(const Corpus& corpus, const lm::Dims& dims, int epochs,
                       double lr, uint64_t seed) {
  return train_base(corpus.docs, dims, epochs, lr, seed);
}

}  // namespace unlearnlab::unlearn
