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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "unlearnlab/corpus_gen.hpp"
#include "unlearnlab/errors.hpp"
#include "unlearnlab/runner.hpp"

using namespace unlearnlab;

namespace {

namespace fs = std::filesystem;

const char* kDataDir = "/tmp/unlearnlab_runner_data";
const char* kOutDir = "/tmp/unlearnlab_runner_out";

/// Small but real configuration: fast enough for unit testing, trained
/// enough that unlearning visibly bites.
runner::ExperimentConfig small_config() {
  static bool generated = false;
  if (!generated) {
    gen::GenConfig gcfg;
    gen::write_all(gen::generate(gcfg), kDataDir);
    generated = true;
  }
  runner::ExperimentConfig cfg;
  cfg.forget_corpus = std::string(kDataDir) + "/forget.jsonl";
  cfg.retain_corpus = std::string(kDataDir) + "/retain.jsonl";
  cfg.holdout_corpus = std::string(kDataDir) + "/holdout.jsonl";
  cfg.probes = std::string(kDataDir) + "/probes.jsonl";
  cfg.lexicon = std::string(kDataDir) + "/lexicon.txt";
  cfg.synonyms = std::string(kDataDir) + "/synonyms.txt";
  cfg.base_epochs = 250;
  cfg.base_lr = 2.0;
  cfg.npo.steps = 60;
  cfg.npo.lr = 0.2;
  cfg.rmu.steps = 60;
  cfg.rmu.lr = 0.1;
  cfg.rmu.gamma = 8.0;
  cfg.seeds = {1};
  cfg.out_dir = kOutDir;
  cfg.workers = 1;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("a 1x1x1 grid produces exactly one report") {
  auto cfg = small_config();
  cfg.methods = {unlearn::Method::kRmu};
  cfg.perturbations = {perturb::PerturbSpec{}};
  fs::remove_all(cfg.out_dir);
  const auto result = runner::run_experiment(cfg);
  CHECK(result.cells.size() == 1);
  CHECK(result.base.size() == 1);
  CHECK(result.all_ok());
  CHECK(fs::exists(fs::path(result.out_dir) / "summary.json"));
  CHECK(fs::exists(fs::path(result.out_dir) / "summary.csv"));
  const auto cell_dir = fs::path(result.out_dir) / "cells" /
                        result.cells[0].cell_key();
  CHECK(fs::exists(cell_dir / "model.bin"));
  CHECK(fs::exists(cell_dir / "trace.csv"));
  CHECK(fs::exists(cell_dir / "report.json"));
}

TEST_CASE("the clean cell improves unlearning efficacy over the base") {
  auto cfg = small_config();
  cfg.methods = {unlearn::Method::kNpo};
  cfg.perturbations = {perturb::PerturbSpec{}};
  runner::Lab lab(cfg);
  const auto base = lab.base_report(1);
  const auto cell = lab.run_cell(unlearn::Method::kNpo,
                                 perturb::PerturbSpec{}, 1);
  REQUIRE(cell.error.empty());
  CHECK(cell.ue < base.ue);
  // identity perturbation leaves the forget text untouched
  CHECK(cell.salient_overlap_mean == 1.0);
  CHECK(cell.salient_overlap_corpus == 1.0);
}

TEST_CASE("two runs of the same config produce identical summary bytes") {
  auto cfg = small_config();
  cfg.methods = {unlearn::Method::kRmu};
  perturb::PerturbSpec mask;
  mask.kind = perturb::PerturbKind::kMask;
  mask.mask_ratio = 0.3;
  cfg.perturbations = {perturb::PerturbSpec{}, mask};
  fs::remove_all(cfg.out_dir);

  const auto first = runner::run_experiment(cfg);
  const auto summary_path = fs::path(first.out_dir) / "summary.json";
  const std::string once = slurp(summary_path.string());
  REQUIRE_FALSE(once.empty());

  const auto second = runner::run_experiment(cfg);
  const std::string twice = slurp(summary_path.string());
  CHECK(once == twice);

  // cell independence: wipe one cell and reassemble from the rest, then
  // re-run to reproduce it
  const auto victim = fs::path(first.out_dir) / "cells" /
                      first.cells[0].cell_key();
  fs::remove_all(victim);
  const auto third = runner::run_experiment(cfg);
  CHECK(slurp(summary_path.string()) == once);
}

TEST_CASE("mask sweep emits one row per ratio and method") {
  auto cfg = small_config();
  cfg.methods = {unlearn::Method::kNpo, unlearn::Method::kRmu};
  const auto rows = runner::mask_ratio_sweep(cfg, {0.0, 0.3});
  CHECK(rows.size() == 4);
  CHECK(rows[0].scheme == "mask");
  CHECK_THROWS_AS(runner::mask_ratio_sweep(cfg, {1.5}), ConfigError);
}

TEST_CASE("watermark sweep carries a detector statistic") {
  auto cfg = small_config();
  cfg.methods = {unlearn::Method::kNpo};
  const auto rows = runner::watermark_strength_sweep(cfg, {2.0}, {2});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].scheme == "kgw");
  CHECK(rows[1].scheme == "synthid");
  // watermarked regenerations must carry detectable signal on average
  CHECK(rows[0].detector_stat > 0.0);
  CHECK_THROWS_AS(runner::watermark_strength_sweep(cfg, {}, {}), ConfigError);
}

TEST_CASE("reference comparison reproduces the published deltas") {
  // synthetic summary with one rmu clean cell and one mask cell
  const std::string dir = "/tmp/unlearnlab_compare_test";
  fs::create_directories(dir);
  runner::EvalReport clean;
  clean.method = "rmu";
  clean.perturbation = "original";
  clean.seed = 1;
  clean.ue = 0.10;
  runner::EvalReport mask = clean;
  mask.perturbation = "mask30";
  mask.ue = 0.12;
  runner::EvalReport rewrite = clean;
  rewrite.perturbation = "rewrite_rule";
  rewrite.ue = 0.11;
  runner::EvalReport kgw = clean;
  kgw.perturbation = "wm_kgw_d2";
  kgw.ue = 0.105;

  nlohmann::json summary;
  summary["config_hash"] = "test";
  summary["base"] = nlohmann::json::array();
  summary["cells"] = nlohmann::json::array();
  for (const auto* cell : {&clean, &mask, &rewrite, &kgw}) {
    summary["cells"].push_back(nlohmann::json::parse(cell->to_json(false)));
  }
  const std::string summary_path = dir + std::string("/summary.json");
  {
    std::ofstream out(summary_path);
    out << summary.dump();
  }

  std::ostringstream table;
  const auto rows = runner::compare_to_reference(
      summary_path, "fixtures/paper_tables.json", table);
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    CHECK(row.method == "rmu");
    CHECK(row.robust);
    if (row.perturbation == "mask") {
      CHECK(row.fixture_delta == doctest::Approx(0.0153).epsilon(1e-9));
      CHECK(row.desk_delta == doctest::Approx(0.02).epsilon(1e-9));
    } else if (row.perturbation == "rewrite") {
      CHECK(row.fixture_delta == doctest::Approx(-0.0087).epsilon(1e-9));
    } else if (row.perturbation == "wm_kgw") {
      CHECK(row.fixture_delta == doctest::Approx(-0.0095).epsilon(1e-9));
    }
  }
  CHECK(table.str().find("paper values are 7B-scale, not reproduced") !=
        std::string::npos);

  // a perturbation with no fixture row is an error
  runner::EvalReport odd = clean;
  odd.perturbation = "mask90";
  odd.ue = 0.9;
  summary["cells"] = {nlohmann::json::parse(clean.to_json(false)),
                      nlohmann::json::parse(odd.to_json(false))};
  {
    std::ofstream out(summary_path);
    out << summary.dump();
  }
  std::ostringstream sink;
  // mask90 maps onto the mask fixture row, so this still works; a
  // missing fixtures file is the error path
  CHECK_THROWS_AS(
      runner::compare_to_reference(summary_path, "/nonexistent.json", sink),
      FixtureError);
  fs::remove_all(dir);
}

TEST_CASE("overlap analysis computes pairwise error-set jaccard") {
  std::vector<runner::EvalReport> reports;
  auto make = [](const std::string& pert, std::set<std::string> errors) {
    runner::EvalReport r;
    r.method = "rmu";
    r.perturbation = pert;
    r.seed = 1;
    r.n_forget_probes = 4;
    r.error_ids = std::move(errors);
    return r;
  };
  reports.push_back(make("original", {"a", "b", "c"}));
  reports.push_back(make("mask30", {"b", "c", "d"}));
  reports.push_back(make("rewrite_rule", {"x"}));

  const auto matrices = runner::overlap_analysis(reports);
  REQUIRE(matrices.size() == 1);
  const auto& m = matrices[0];
  REQUIRE(m.perturbations.size() == 3);
  CHECK(m.perturbations[0] == "original");
  for (size_t i = 0; i < 3; ++i) CHECK(m.values[i][i] == 1.0);
  CHECK(m.values[0][1] == 0.5);  // {a,b,c} vs {b,c,d}
  CHECK(m.values[0][2] == 0.0);  // disjoint

  runner::write_overlap_csv("/tmp/unlearnlab_overlap.csv", matrices);
  CHECK(slurp("/tmp/unlearnlab_overlap.csv").find("original") !=
        std::string::npos);
  fs::remove("/tmp/unlearnlab_overlap.csv");

  reports.push_back(make("odd", {"a"}));
  reports.back().n_forget_probes = 99;
  CHECK_THROWS_AS(runner::overlap_analysis(reports), ConfigError);
}

TEST_CASE("a lexicon covering every token makes salient cells identical") {
  auto cfg = small_config();
  cfg.methods = {unlearn::Method::kRmu};
  cfg.perturbations = {perturb::PerturbSpec{}};
  cfg.seeds = {1};

  // full-coverage lexicon: every token of the forget corpus
  const std::string full_lex = "/tmp/unlearnlab_full_lexicon.txt";
  {
    const auto records = text::read_corpus_jsonl(cfg.forget_corpus);
    std::set<std::string> tokens;
    for (const auto& rec : records) {
      for (const auto& tok : text::split_text(rec.text)) tokens.insert(tok);
    }
    std::ofstream out(full_lex);
    for (const auto& tok : tokens) out << tok << '\n';
  }
  cfg.lexicon = full_lex;

  runner::Lab lab(cfg);
  const auto full = lab.run_cell(unlearn::Method::kRmu,
                                 perturb::PerturbSpec{}, 1, false);
  const auto reduced = lab.run_cell(unlearn::Method::kRmu,
                                    perturb::PerturbSpec{}, 1, true);
  REQUIRE(full.error.empty());
  REQUIRE(reduced.error.empty());
  CHECK(full.ue == reduced.ue);
  CHECK(full.ut == reduced.ut);
  fs::remove(full_lex);
}

TEST_CASE("an empty lexicon stops the salient experiment before training") {
  auto cfg = small_config();
  const std::string empty_lex = "/tmp/unlearnlab_empty_lexicon.txt";
  {
    std::ofstream out(empty_lex);
  }
  cfg.lexicon = empty_lex;
  CHECK_THROWS_AS(runner::salient_only_experiment(cfg), ConfigError);
  fs::remove(empty_lex);
}

TEST_CASE("eval reports round-trip through json") {
  runner::EvalReport report;
  report.method = "npo";
  report.perturbation = "mask30";
  report.seed = 7;
  report.ue = 0.125;
  report.ut = 0.875;
  report.verbmem = 33.25;
  report.privleak = -12.5;
  report.error_ids = {"q1", "q9"};
  report.n_forget_probes = 50;
  report.salient_overlap_mean = 0.9;
  report.salient_overlap_corpus = 0.95;
  report.wall_time_s = 1.25;

  const auto round =
      runner::EvalReport::from_json(report.to_json(/*wall_time=*/true));
  CHECK(round.cell_key() == report.cell_key());
  CHECK(round.ue == report.ue);
  CHECK(round.error_ids == report.error_ids);
  CHECK(round.wall_time_s == report.wall_time_s);

  // wall time stays out of the summary serialization
  CHECK(report.to_json(false).find("wall_time") == std::string::npos);
}

TEST_CASE("experiment config json round-trips and hashes stably") {
  auto cfg = small_config();
  const auto hash_a = cfg.config_hash();
  const auto round = runner::ExperimentConfig::from_json(
      cfg.to_canonical_json());
  CHECK(round.config_hash() == hash_a);
  CHECK(round.base_epochs == cfg.base_epochs);
  CHECK(round.rmu.gamma == cfg.rmu.gamma);

  // out_dir and workers do not perturb the hash
  auto moved = cfg;
  moved.out_dir = "/elsewhere";
  moved.workers = 7;
  CHECK(moved.config_hash() == hash_a);

  auto changed = cfg;
  changed.base_epochs += 1;
  CHECK(changed.config_hash() != hash_a);
}
