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

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "unlearnlab/corpus_gen.hpp"
#include "unlearnlab/errors.hpp"
#include "unlearnlab/eval.hpp"
#include "unlearnlab/perturb.hpp"
#include "unlearnlab/runner.hpp"
#include "unlearnlab/text.hpp"
#include "unlearnlab/unlearn.hpp"
#include "unlearnlab/watermark.hpp"

namespace {

using namespace unlearnlab;

uint64_t watermark_key_from_env() {
  if (const char* key = std::getenv("WM_KEY"); key != nullptr && *key) {
    return std::stoull(key, nullptr, 16);
  }
  return runner::kDefaultWatermarkKey;
}

runner::ExperimentConfig load_config(const std::string& config_path) {
  runner::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = runner::ExperimentConfig::from_json_file(config_path);
  }
  if (const char* url = std::getenv("LLM_ENDPOINT");
      url != nullptr && cfg.rewrite_endpoint.base_url.empty()) {
    cfg.rewrite_endpoint.base_url = url;
  }
  return cfg;
}

wm::WatermarkConfig parse_wm_arg(const std::string& wm_json) {
  auto config = wm::watermark_config_from_json(wm_json);
  if (auto* kgw = std::get_if<wm::KgwConfig>(&config)) {
    if (kgw->key == 0) kgw->key = watermark_key_from_env();
  } else if (auto* sid = std::get_if<wm::SynthidConfig>(&config)) {
    if (sid->key == 0) sid->key = watermark_key_from_env();
  }
  return config;
}

void print_report(const runner::EvalReport& report) {
  std::printf(
      "%-36s ue=%.4f ut=%.4f verbmem=%.2f privleak=%7.2f overlap=%.3f%s%s\n",
      report.cell_key().c_str(), report.ue, report.ut, report.verbmem,
      report.privleak, report.salient_overlap_mean,
      report.error.empty() ? "" : " ERROR: ", report.error.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "unlearnlab: desk-scale robustness experiments for language-model "
      "unlearning on noisy forget sets"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "experiment config JSON (overrides built-in defaults)")
      ->envname("UNLEARNLAB_CONFIG");

  auto* gen_cmd =
      app.add_subcommand("gen-corpus", "generate the synthetic corpora");
  std::string gen_dir = "data";
  uint64_t gen_seed = 2026;
  gen_cmd->add_option("--dir", gen_dir, "output directory");
  gen_cmd->add_option("--seed", gen_seed, "generator seed");

  auto* train_cmd =
      app.add_subcommand("train-base", "train the base model for one seed");
  uint64_t train_seed = 1;
  std::string train_out = "model-base.bin";
  train_cmd->add_option("--seed", train_seed, "training seed");
  train_cmd->add_option("--out", train_out, "checkpoint path");

  auto* perturb_cmd =
      app.add_subcommand("perturb", "write a perturbed forget corpus");
  std::string perturb_spec_json = R"({"kind":"mask","ratio":0.3})";
  std::string perturb_out = "perturbed.jsonl";
  uint64_t perturb_seed = 1;
  perturb_cmd->add_option("--spec", perturb_spec_json,
                          "perturbation spec JSON");
  perturb_cmd->add_option("--out", perturb_out, "output JSONL path");
  perturb_cmd->add_option("--seed", perturb_seed, "cell seed");

  auto* detect_cmd =
      app.add_subcommand("detect", "run a watermark detector over a corpus");
  std::string detect_wm =
      R"({"type":"kgw","delta":2.0,"green_fraction":0.5,"context_width":1})";
  std::string detect_in;
  detect_cmd->add_option("--wm", detect_wm, "watermark config JSON");
  detect_cmd->add_option("--in", detect_in, "corpus JSONL to score")
      ->required();

  auto* unlearn_cmd = app.add_subcommand("unlearn", "run one unlearning cell");
  std::string unlearn_method = "npo";
  std::string unlearn_spec_json = R"({"kind":"identity"})";
  uint64_t unlearn_seed = 1;
  std::string unlearn_dir;
  unlearn_cmd->add_option("--method", unlearn_method, "npo or rmu");
  unlearn_cmd->add_option("--perturb", unlearn_spec_json,
                          "perturbation spec JSON");
  unlearn_cmd->add_option("--seed", unlearn_seed, "cell seed");
  unlearn_cmd->add_option("--out-dir", unlearn_dir,
                          "optional cell output directory");

  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint against the probes");
  std::string eval_model;
  eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();

  auto* mask_cmd = app.add_subcommand("sweep-mask", "mask-ratio sweep");
  std::vector<double> mask_ratios = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
  mask_cmd->add_option("--ratios", mask_ratios, "mask ratios");

  auto* wm_cmd = app.add_subcommand("sweep-wm", "watermark-strength sweep");
  std::vector<double> wm_deltas = {2.0, 4.0, 6.0};
  std::vector<int> wm_ms = {2, 4, 6};
  wm_cmd->add_option("--deltas", wm_deltas, "logit biases for KGW");
  wm_cmd->add_option("--ms", wm_ms, "tournament depths for SynthID");

  auto* overlap_cmd = app.add_subcommand(
      "overlap", "error-set overlap matrix from a summary.json");
  std::string overlap_summary;
  std::string overlap_out = "overlap.csv";
  overlap_cmd->add_option("--summary", overlap_summary, "summary.json path")
      ->required();
  overlap_cmd->add_option("--out", overlap_out, "CSV output path");

  auto* salient_cmd = app.add_subcommand(
      "salient", "full-data vs salient-tokens-only unlearning");

  auto* compare_cmd = app.add_subcommand(
      "compare", "compare desk-scale deltas to the published reference");
  std::string compare_summary;
  std::string compare_fixtures = "fixtures/paper_tables.json";
  compare_cmd->add_option("--summary", compare_summary, "summary.json path")
      ->required();
  compare_cmd->add_option("--fixtures", compare_fixtures,
                          "reference-number fixtures");

  auto* report_cmd = app.add_subcommand(
      "report", "run the full experiment grid and write summaries");
  bool report_reassemble = false;
  report_cmd->add_flag("--reassemble", report_reassemble,
                       "rebuild summaries from existing cell outputs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      gen::GenConfig gcfg;
      gcfg.seed = gen_seed;
      gen::write_all(gen::generate(gcfg), gen_dir);
      std::printf("wrote corpora, probes, lexicon and synonyms under %s\n",
                  gen_dir.c_str());
      return 0;
    }

    auto cfg = load_config(config_path);

    if (*train_cmd) {
      runner::Lab lab(cfg);
      lab.base_model(train_seed).save(train_out);
      const auto base = lab.base_report(train_seed);
      std::printf(
          "base seed %llu: ue=%.4f ut=%.4f verbmem=%.2f privleak=%.2f -> %s\n",
          static_cast<unsigned long long>(train_seed), base.ue, base.ut,
          base.verbmem, base.privleak, train_out.c_str());
      return 0;
    }

    if (*perturb_cmd) {
      runner::Lab lab(cfg);
      const auto spec = perturb::PerturbSpec::from_json(perturb_spec_json);
      const auto noisy = lab.perturbed_forget(spec, perturb_seed);
      std::vector<text::CorpusRecord> records;
      for (size_t i = 0; i < noisy.docs.size(); ++i) {
        text::CorpusRecord rec;
        rec.id = noisy.docs[i].source_id + "-" + spec.name();
        rec.text = text::detokenize(noisy.docs[i], lab.vocab());
        rec.role = "forget";
        rec.perturb = spec.name();
        rec.parent_id = lab.forget().docs[i].source_id;
        records.push_back(std::move(rec));
      }
      text::write_corpus_jsonl(perturb_out, records);
      std::printf("wrote %zu perturbed documents to %s\n", records.size(),
                  perturb_out.c_str());
      return 0;
    }

    if (*detect_cmd) {
      runner::Lab lab(cfg);
      const auto config = parse_wm_arg(detect_wm);
      const auto records = text::read_corpus_jsonl(detect_in);
      double stat_sum = 0.0;
      int n_scored = 0;
      int n_flagged = 0;
      for (const auto& rec : records) {
        const auto seq = text::tokenize(rec.text, lab.vocab(), rec.id);
        if (seq.ids.size() < 2) continue;
        const auto result =
            std::holds_alternative<wm::KgwConfig>(config)
                ? wm::kgw_detect(seq, std::get<wm::KgwConfig>(config),
                                 lab.vocab().size())
                : wm::synthid_detect(seq,
                                     std::get<wm::SynthidConfig>(config));
        std::printf("%-16s statistic=%8.3f score_mean=%.4f tokens=%lld %s\n",
                    rec.id.c_str(), result.statistic, result.score_mean,
                    static_cast<long long>(result.n_tokens),
                    result.watermarked ? "WATERMARKED" : "clean");
        stat_sum += result.statistic;
        ++n_scored;
        n_flagged += result.watermarked ? 1 : 0;
      }
      if (n_scored > 0) {
        std::printf("mean statistic %.3f; flagged %d/%d\n",
                    stat_sum / n_scored, n_flagged, n_scored);
      }
      return 0;
    }

    if (*unlearn_cmd) {
      runner::Lab lab(cfg);
      const auto method = unlearn::method_from_name(unlearn_method);
      const auto spec = perturb::PerturbSpec::from_json(unlearn_spec_json);
      const auto report =
          lab.run_cell(method, spec, unlearn_seed, false, unlearn_dir);
      print_report(report);
      return report.error.empty() ? 0 : 1;
    }

    if (*eval_cmd) {
      runner::Lab lab(cfg);
      const auto params = lm::ModelParams::load(eval_model);
      std::printf("ue=%.4f ut=%.4f verbmem=%.2f privleak=%.2f\n",
                  eval::qa_accuracy(params, lab.forget_probes()),
                  eval::qa_accuracy(params, lab.retain_probes()),
                  eval::verbmem(params, lab.forget()),
                  eval::privleak_proxy(params, lab.forget(), lab.holdout()));
      return 0;
    }

    if (*mask_cmd) {
      const auto rows = runner::mask_ratio_sweep(cfg, mask_ratios);
      for (const auto& row : rows) {
        std::printf("mask=%.2f %-4s ue=%.4f ut=%.4f\n", row.strength,
                    row.method.c_str(), row.ue, row.ut);
      }
      return 0;
    }

    if (*wm_cmd) {
      const auto rows =
          runner::watermark_strength_sweep(cfg, wm_deltas, wm_ms);
      for (const auto& row : rows) {
        std::printf("%-8s strength=%.1f %-4s ue=%.4f ut=%.4f detector=%.3f\n",
                    row.scheme.c_str(), row.strength, row.method.c_str(),
                    row.ue, row.ut, row.detector_stat);
      }
      return 0;
    }

    if (*overlap_cmd) {
      const auto cells = runner::read_summary_cells(overlap_summary);
      const auto matrices = runner::overlap_analysis(cells);
      runner::write_overlap_csv(overlap_out, matrices);
      for (const auto& matrix : matrices) {
        std::printf("method %s: %zu perturbations -> %s\n",
                    matrix.method.c_str(), matrix.perturbations.size(),
                    overlap_out.c_str());
      }
      return 0;
    }

    if (*salient_cmd) {
      const auto pairs = runner::salient_only_experiment(cfg);
      for (const auto& pair : pairs) {
        std::printf("%-4s %-16s ue_full=%.4f ue_salient=%.4f delta=%+.4f\n",
                    pair.method.c_str(), pair.perturbation.c_str(),
                    pair.ue_full, pair.ue_salient,
                    pair.ue_salient - pair.ue_full);
      }
      return 0;
    }

    if (*compare_cmd) {
      runner::compare_to_reference(compare_summary, compare_fixtures,
                                   std::cout);
      return 0;
    }

    if (*report_cmd) {
      const auto result = report_reassemble ? runner::reassemble_reports(cfg)
                                            : runner::run_experiment(cfg);
      for (const auto& base : result.base) {
        std::printf(
            "base s%llu: ue=%.4f ut=%.4f verbmem=%.2f privleak=%.2f\n",
            static_cast<unsigned long long>(base.seed), base.ue, base.ut,
            base.verbmem, base.privleak);
      }
      for (const auto& cell : result.cells) print_report(cell);
      std::printf("summaries under %s\n", result.out_dir.c_str());
      return result.all_ok() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
