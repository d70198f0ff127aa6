/*
 * Copyright 2026 The Pixelpoison Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pixelpoison/attack.hpp"
#include "pixelpoison/metrics.hpp"
#include "pixelpoison/synthetic.hpp"

namespace pxp {

/// Full description of one experiment. Every random choice downstream is
/// derived from `seed`, so a config + seed pair pins the run byte-for-byte.
struct ExperimentConfig {
  std::string scenario = "targeted";  // targeted | in_domain | out_of_domain
  Mode mode = Mode::kSingle;
  CorpusSpec corpus;
  CorpusSpec corpus_b;       // out_of_domain target collection
  Index groups = 10;         // targeted: query groups
  Index per_group = 10;      // targeted: queries per group
  Index train_count = 200;   // in/out of domain
  Index test_count = 100;    // in/out of domain
  Index query_len = 16;      // words per query before perturbation
  AttackConfig attack;       // rng_seed is overwritten per job
  Index injections = 1;      // m: adversarial docs injected together
  Index seed_docs = 10;      // targeted: bottom-n seed pool size
  Index patch_side = 16;
  Index embed_dim = 64;
  Index workers = 1;         // attack jobs run on this many threads
  std::uint64_t seed = 0;    // global seed
  std::string out_dir;       // empty: compute only, write nothing

  void validate() const;
};

/// Strict JSON loading: unknown keys are rejected, missing keys keep their
/// defaults. `config_to_json` round-trips everything except out_dir, which
/// is a CLI concern.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

nlohmann::json report_to_json(const PoisonReport& report);
std::string format_report_json(const PoisonReport& report);

/// One-line human-readable parameter summary, echoed into every report.
std::string config_echo(const ExperimentConfig& cfg);

/// Scenario-effective generation inputs. Downstream random streams hang off
/// the global seed keyed by the spec's own seed value, so equal corpus specs
/// collapse to the same corpus and query split in every scenario.
CorpusSpec effective_corpus_spec(const ExperimentConfig& cfg,
                                 const CorpusSpec& spec);
std::uint64_t effective_split_seed(const ExperimentConfig& cfg,
                                   const CorpusSpec& spec);
std::uint64_t effective_group_seed(const ExperimentConfig& cfg);

/// The training stage alone: one labelled attack result per adversarial
/// document of the config's scenario (targeted: one per group and seed
/// document; otherwise one per cluster, trained on the train split).
/// Adversarial images and trajectories land under out_dir when it is set.
std::vector<std::pair<std::string, AttackResult>> run_attacks(
    const ExperimentConfig& cfg);

/// One grid point of a trade-off sweep.
struct SweepPoint {
  Method method = Method::kDirect;
  double grad_fraction = 1.0;  // p (direct / noise)
  double mask_area = 0.2;      // a (mask)
  Index injections = 1;        // m
};

/// Default grid: direct and noise over a p ladder, mask over an a ladder.
std::vector<SweepPoint> default_sweep_grid(Index injections = 1);

std::string format_sweep_csv(
    const std::vector<std::pair<SweepPoint, PoisonReport>>& rows);

/// The three pipelines. Each builds its corpus and queries from the config,
/// runs the attack jobs, injects, ranks, and measures. Artifacts (report
/// JSON, adversarial images, trajectories, run files) are written when
/// out_dir is set.
PoisonReport run_targeted(const ExperimentConfig& cfg);
PoisonReport run_in_domain(const ExperimentConfig& cfg);
PoisonReport run_out_of_domain(const ExperimentConfig& cfg);

/// Dispatch on cfg.scenario.
PoisonReport run_scenario(const ExperimentConfig& cfg);

/// Runs cfg once per grid point (method/p/a/m overridden per point, no
/// per-point artifacts) and returns the reports in grid order.
std::vector<std::pair<SweepPoint, PoisonReport>> sweep(
    const ExperimentConfig& cfg, const std::vector<SweepPoint>& grid);

}  // namespace pxp
