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
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "unlearnlab/clients.hpp"
#include "unlearnlab/eval.hpp"
#include "unlearnlab/perturb.hpp"
#include "unlearnlab/text.hpp"
#include "unlearnlab/tinylm.hpp"
#include "unlearnlab/unlearn.hpp"

namespace unlearnlab::runner {

/// Key used for watermarked-regeneration cells unless WM_KEY or the
/// config says otherwise.
inline constexpr uint64_t kDefaultWatermarkKey = 0x756c6162ULL;

/// Per-method optimization knobs. The defaults are the tuned desk-scale
/// protocol: NPO pairs its forget loss with cross-entropy retention at
/// unit weight; RMU needs a heavier retain weight and a steering scale
/// that outruns the tanh range.
struct MethodParams {
  double gamma = 1.0;
  double lr = 0.2;
  int steps = 400;
  double beta = 0.1;   // NPO only
  double rmu_c = 2.0;  // RMU only
  bool normalize_u = false;
};

inline MethodParams default_npo_params() { return MethodParams{}; }
inline MethodParams default_rmu_params() {
  MethodParams p;
  p.gamma = 12.0;
  p.lr = 0.1;
  return p;
}

/// The standard perturbation protocol: original data, 30% masking,
/// rule rewriting, and both watermark schemes at default strength.
std::vector<perturb::PerturbSpec> default_protocol();

struct ExperimentConfig {
  std::string forget_corpus = "data/forget.jsonl";
  std::string retain_corpus = "data/retain.jsonl";
  std::string holdout_corpus = "data/holdout.jsonl";
  std::string probes = "data/probes.jsonl";
  std::string lexicon = "data/lexicon.txt";
  std::string synonyms = "data/synonyms.txt";

  std::vector<unlearn::Method> methods = {unlearn::Method::kNpo,
                                          unlearn::Method::kRmu};
  std::vector<perturb::PerturbSpec> perturbations = default_protocol();
  MethodParams npo = default_npo_params();
  MethodParams rmu = default_rmu_params();

  int vocab_max = 512;
  int embed_dim = 16;
  int hidden_dim = 32;
  int context = 4;
  int base_epochs = 700;
  double base_lr = 2.0;

  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = "out";
  int workers = 0;  // 0: hardware concurrency
  clients::EndpointConfig rewrite_endpoint;

  void validate() const;
  std::string to_canonical_json() const;
  std::string config_hash() const;

  static ExperimentConfig from_json(const std::string& json_text);
  static ExperimentConfig from_json_file(const std::string& path);

  const MethodParams& params_for(unlearn::Method method) const {
    return method == unlearn::Method::kNpo ? npo : rmu;
  }
};

/// Metrics for one (method, perturbation, seed) cell.
struct EvalReport {
  std::string method;
  std::string perturbation;
  uint64_t seed = 0;
  double ue = 0.0;
  double ut = 0.0;
  double verbmem = 0.0;
  double privleak = 0.0;
  std::set<std::string> error_ids;
  int n_forget_probes = 0;
  double salient_overlap_mean = 1.0;
  double salient_overlap_corpus = 1.0;
  double wall_time_s = 0.0;
  std::string error;  // nonempty when the cell failed

  std::string cell_key() const;
  std::string to_json(bool include_wall_time) const;
  static EvalReport from_json(const std::string& json_text);
};

/// Pre-unlearning reference metrics for one seed.
struct BaseReport {
  uint64_t seed = 0;
  double ue = 0.0;
  double ut = 0.0;
  double verbmem = 0.0;
  double privleak = 0.0;
};

/// Loaded experiment state: vocabulary, tokenized corpora, probes,
/// lexicons, and lazily trained base models (one per seed, shared by all
/// cells of that seed).
class Lab {
 public:
  explicit Lab(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const text::Vocab& vocab() const { return vocab_; }
  const text::Corpus& forget() const { return forget_; }
  const text::Corpus& retain() const { return retain_; }
  const text::Corpus& holdout() const { return holdout_; }
  const std::vector<eval::QaProbe>& forget_probes() const {
    return forget_probes_;
  }
  const std::vector<eval::QaProbe>& retain_probes() const {
    return retain_probes_;
  }
  const eval::SalientSet& lexicon() const { return lexicon_; }
  lm::Dims dims() const;

  /// Trains (once) and returns the base model for a seed.
  const lm::ModelParams& base_model(uint64_t seed);

  BaseReport base_report(uint64_t seed);

  /// Applies the perturbation to the forget corpus with a per-cell seed.
  text::Corpus perturbed_forget(const perturb::PerturbSpec& spec,
                                uint64_t seed);

  /// Runs one experiment cell end to end. With reduce_to_salient the
  /// perturbed corpus is additionally cut down to its salient tokens
  /// before unlearning. Failures are captured in the report's error
  /// field. When cell_dir is nonempty the unlearned checkpoint and loss
  /// trace are written there.
  EvalReport run_cell(unlearn::Method method,
                      const perturb::PerturbSpec& spec, uint64_t seed,
                      bool reduce_to_salient = false,
                      const std::string& cell_dir = "");

 private:
  ExperimentConfig config_;
  text::Vocab vocab_;
  text::Corpus forget_;
  text::Corpus retain_;
  text::Corpus holdout_;
  std::vector<eval::QaProbe> forget_probes_;
  std::vector<eval::QaProbe> retain_probes_;
  eval::SalientSet lexicon_;
  std::unordered_set<text::TokenId> salient_ids_;
  perturb::RewriteLexicon rewrite_lexicon_;
  std::map<uint64_t, lm::ModelParams> base_models_;
};

struct ExperimentResult {
  std::string out_dir;  // out/<config-hash>
  std::vector<BaseReport> base;
  std::vector<EvalReport> cells;

  bool all_ok() const;
};

/// Full grid: trains one base model per seed, runs every
/// (method, perturbation, seed) cell, writes per-cell outputs plus
/// summary.csv and summary.json under out/<config-hash>/.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Rebuilds summary.csv/summary.json from existing cell report files.
ExperimentResult reassemble_reports(const ExperimentConfig& config);

struct SweepRow {
  std::string scheme;  // "mask", "kgw", "synthid"
  double strength = 0.0;
  std::string method;
  double ue = 0.0;
  double ut = 0.0;
  double detector_stat = 0.0;  // watermark sweeps only
};

/// One row per (ratio, method), metrics averaged over seeds. Writes
/// mask_sweep.csv under the experiment output directory.
std::vector<SweepRow> mask_ratio_sweep(const ExperimentConfig& config,
                                       const std::vector<double>& ratios);

/// One row per (scheme, strength, method); detector_stat is the mean
/// detection statistic over the perturbed forget documents. Writes
/// wm_sweep.csv.
std::vector<SweepRow> watermark_strength_sweep(
    const ExperimentConfig& config, const std::vector<double>& kgw_deltas,
    const std::vector<int>& synthid_ms);

struct CompareRow {
  std::string method;
  std::string perturbation;  // fixture key
  double fixture_delta = 0.0;
  double desk_delta = 0.0;
  bool robust = false;  // |desk_delta| <= 0.05
};

/// Reads a summary.json and the reference-number fixtures, prints the
/// side-by-side delta table, and returns the rows. Throws FixtureError
/// when a needed fixture key is missing.
std::vector<CompareRow> compare_to_reference(const std::string& summary_path,
                                             const std::string& fixtures_path,
                                             std::ostream& out);

struct OverlapMatrix {
  std::string method;
  std::vector<std::string> perturbations;
  std::vector<std::vector<double>> values;  // mean Jaccard over seeds
};

/// Pairwise error-set overlap between perturbations, per method, averaged
/// over seeds. Cells must share the probe universe.
std::vector<OverlapMatrix> overlap_analysis(
    const std::vector<EvalReport>& reports);

void write_overlap_csv(const std::string& path,
                       const std::vector<OverlapMatrix>& matrices);

struct SalientPair {
  std::string method;
  std::string perturbation;
  double ue_full = 0.0;
  double ue_salient = 0.0;
};

/// For every configured perturbation and method, pairs the full-data cell
/// with its salient-tokens-only counterpart (mean UE over seeds). Throws
/// ConfigError before any training when the lexicon is empty.
std::vector<SalientPair> salient_only_experiment(
    const ExperimentConfig& config);

/// Loads summary.json cells back into reports.
std::vector<EvalReport> read_summary_cells(const std::string& summary_path);

}  // namespace unlearnlab::runner
