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
#include "pixelpoison/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "pixelpoison/cluster.hpp"
#include "pixelpoison/hashing.hpp"
#include "pixelpoison/io.hpp"

namespace pxp {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Seed plumbing: every stream hangs off the global seed. Corpus-dependent
// streams are keyed by the spec's own seed *value*, so two identical specs
// land on identical corpora and query splits even across scenarios.

CorpusSpec effective_spec(const ExperimentConfig& cfg, const CorpusSpec& spec) {
  CorpusSpec out = spec;
  out.seed = derive_seed(cfg.seed, "corpus-" + std::to_string(spec.seed));
  return out;
}

std::uint64_t split_seed(const ExperimentConfig& cfg, const CorpusSpec& spec) {
  return derive_seed(cfg.seed, "queries-split-" + std::to_string(spec.seed));
}

// ---------------------------------------------------------------------------
// JSON <-> config

void check_keys(const nlohmann::json& j,
                std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument(where + ": unknown key \"" + item.key() +
                                  "\"");
  }
}

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->get<T>();
}

CorpusSpec corpus_from_json(const nlohmann::json& j,
                            const CorpusSpec& defaults,
                            const std::string& where) {
  check_keys(j,
             {"size", "height", "width", "glyph_side", "topic_count",
              "topic_words", "filler_words", "topic_fraction", "seed"},
             where);
  CorpusSpec spec = defaults;
  maybe(j, "size", spec.size);
  maybe(j, "height", spec.height);
  maybe(j, "width", spec.width);
  maybe(j, "glyph_side", spec.glyph_side);
  maybe(j, "topic_count", spec.topic_count);
  maybe(j, "topic_words", spec.topic_words);
  maybe(j, "filler_words", spec.filler_words);
  maybe(j, "topic_fraction", spec.topic_fraction);
  maybe(j, "seed", spec.seed);
  return spec;
}

nlohmann::json corpus_to_json(const CorpusSpec& spec) {
  return {{"size", spec.size},
          {"height", spec.height},
          {"width", spec.width},
          {"glyph_side", spec.glyph_side},
          {"topic_count", spec.topic_count},
          {"topic_words", spec.topic_words},
          {"filler_words", spec.filler_words},
          {"topic_fraction", spec.topic_fraction},
          {"seed", spec.seed}};
}

AttackConfig attack_from_json(const nlohmann::json& j,
                              const AttackConfig& defaults) {
  check_keys(j, {"method", "steps", "lr0", "p", "a"}, "attack");
  AttackConfig cfg = defaults;
  if (auto it = j.find("method"); it != j.end())
    cfg.method = method_from_name(it->get<std::string>());
  maybe(j, "steps", cfg.steps);
  maybe(j, "lr0", cfg.lr0);
  maybe(j, "p", cfg.grad_fraction);
  maybe(j, "a", cfg.mask_area);
  return cfg;
}

}  // namespace

std::string config_echo(const ExperimentConfig& cfg) {
  std::string echo;
  echo += "scenario=" + cfg.scenario;
  echo += " mode=" + std::string(mode_name(cfg.mode));
  echo += " method=" + std::string(method_name(cfg.attack.method));
  echo += " p=" + fmt_double(cfg.attack.grad_fraction);
  echo += " a=" + fmt_double(cfg.attack.mask_area);
  echo += " m=" + std::to_string(cfg.injections);
  echo += " steps=" + std::to_string(cfg.attack.steps);
  echo += " lr0=" + fmt_double(cfg.attack.lr0);
  echo += " corpus=" + std::to_string(cfg.corpus.size) + "x" +
          std::to_string(cfg.corpus.height) + "x" +
          std::to_string(cfg.corpus.width);
  echo += " seed=" + std::to_string(cfg.seed);
  return echo;
}

namespace {

// ---------------------------------------------------------------------------
// Attack job scheduling: jobs are pure, results land in per-job slots, so
// the merged output is identical for any worker count.

struct AttackJob {
  std::string label;
  const Image* start = nullptr;
  const std::vector<QueryEmbedding>* queries = nullptr;
  AttackConfig attack;
};

std::vector<AttackResult> run_jobs(const std::vector<AttackJob>& jobs,
                                   const ScorerWeights& weights,
                                   Index workers) {
  std::vector<AttackResult> results(jobs.size());
  auto run_one = [&](std::size_t i) {
    results[i] =
        run_attack(*jobs[i].start, *jobs[i].queries, weights, jobs[i].attack);
  };
  if (workers <= 1 || jobs.size() <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < jobs.size();
         i = next.fetch_add(1)) {
      try {
        run_one(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min<std::size_t>(
      static_cast<std::size_t>(workers), jobs.size());
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

// ---------------------------------------------------------------------------
// Artifact output (no-op when the directory is empty).

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::string dir) : dir_(std::move(dir)) {
    if (enabled()) {
      namespace fs = std::filesystem;
      fs::create_directories(dir_ + "/adv");
      fs::create_directories(dir_ + "/trajectories");
      fs::create_directories(dir_ + "/runs");
    }
  }

  bool enabled() const { return !dir_.empty(); }

  void attack_outputs(const std::string& label, const AttackResult& res) {
    if (!enabled()) return;
    save_image(res.adversarial, dir_ + "/adv/" + label + ".png");
    save_raw(res.adversarial, dir_ + "/adv/" + label + ".pxp");
    save_text(format_trajectory_csv(res.trajectory),
              dir_ + "/trajectories/" + label + ".csv");
  }

  void add_run(const RankedList& list, const std::string& tag) {
    if (!enabled()) return;
    runs_ += format_trec_run(list, tag);
  }

  void finish(const std::string& scenario, const PoisonReport& report,
              const ExperimentConfig& cfg) {
    if (!enabled()) return;
    save_text(runs_, dir_ + "/runs/" + scenario + ".trec");
    save_text(format_report_json(report), dir_ + "/report.json");
    save_text(config_to_json(cfg).dump(2) + "\n", dir_ + "/config.json");
  }

 private:
  std::string dir_;
  std::string runs_;
};

// ---------------------------------------------------------------------------
// Shared pipeline pieces

std::vector<QueryEmbedding> encode_all(const std::vector<std::string>& texts,
                                       Mode mode,
                                       const ScorerWeights& weights) {
  std::vector<QueryEmbedding> out;
  out.reserve(texts.size());
  for (const std::string& t : texts)
    out.push_back(encode_query(t, mode, weights));
  return out;
}

struct TrainedAttack {
  std::vector<std::string> labels;       // one per adversarial doc
  std::vector<AttackResult> results;
};

/// The m-document training protocol: one bottom-RRF seed document; the train
/// queries are clustered into m groups (skipped for m=1) and each cluster
/// optimises its own copy of that seed.
TrainedAttack train_adversarial(const ExperimentConfig& cfg,
                                const SyntheticCorpus& synth,
                                const ScorerWeights& weights,
                                const std::vector<QueryEmbedding>& train) {
  const std::vector<std::string> seed_ids =
      select_seed_documents(synth.corpus, train, 1, weights);
  const Image& start = synth.corpus.doc(seed_ids.front()).image;

  std::vector<std::vector<QueryEmbedding>> subsets;
  if (cfg.injections == 1) {
    subsets.push_back(train);
  } else {
    const Clustering clustering =
        kmeans(pooled_query_matrix(train), cfg.injections, 100,
               derive_seed(cfg.seed, "kmeans"));
    subsets = split_queries(train, clustering);
  }

  std::vector<AttackJob> jobs;
  jobs.reserve(subsets.size());
  for (std::size_t c = 0; c < subsets.size(); ++c) {
    AttackJob job;
    job.label = "cluster" + std::to_string(c);
    job.start = &start;
    job.queries = &subsets[c];
    job.attack = cfg.attack;
    job.attack.rng_seed = derive_seed(cfg.seed, "attack-" + job.label);
    jobs.push_back(std::move(job));
  }

  TrainedAttack trained;
  trained.results = run_jobs(jobs, weights, cfg.workers);
  for (const AttackJob& job : jobs) trained.labels.push_back(job.label);
  return trained;
}

/// Injects every trained doc into `corpus`, ranks the evaluation queries,
/// and measures. The corpus is the caller's local copy and stays poisoned.
PoisonReport evaluate_injection(const ExperimentConfig& cfg, Corpus& corpus,
                                const ScorerWeights& weights,
                                const std::vector<QueryEmbedding>& eval_queries,
                                const TrainedAttack& trained,
                                const std::string& echo, ArtifactWriter& art) {
  std::unordered_set<std::string> adv_ids;
  for (std::size_t c = 0; c < trained.results.size(); ++c) {
    const std::string id = "adv-" + trained.labels[c];
    corpus.add(id, trained.results[c].adversarial, /*injected=*/true);
    adv_ids.insert(id);
    art.attack_outputs(trained.labels[c], trained.results[c]);
  }
  std::vector<RankedList> lists;
  lists.reserve(eval_queries.size());
  for (std::size_t i = 0; i < eval_queries.size(); ++i) {
    lists.push_back(rank(eval_queries[i], corpus, weights, 100,
                         "test" + std::to_string(i)));
    art.add_run(lists.back(), cfg.scenario);
  }
  return measure_poisoning(lists, adv_ids, echo);
}

void require_disjoint(const QuerySplit& split) {
  std::unordered_set<std::string> train(split.train.begin(),
                                        split.train.end());
  for (const std::string& t : split.test)
    if (train.count(t))
      throw std::logic_error(
          "query split: train and test share the text \"" + t + "\"");
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (scenario != "targeted" && scenario != "in_domain" &&
      scenario != "out_of_domain")
    throw std::invalid_argument("ExperimentConfig: unknown scenario \"" +
                                scenario + "\"");
  corpus.validate();
  attack.validate();
  if (patch_side < 1 || embed_dim < 1)
    throw std::invalid_argument(
        "ExperimentConfig: patch side and embed dim must be >= 1");
  if (corpus.height % patch_side != 0 || corpus.width % patch_side != 0)
    throw std::invalid_argument(
        "ExperimentConfig: corpus dims must be divisible by the patch side");
  if (scenario == "out_of_domain") {
    corpus_b.validate();
    if (corpus_b.height % patch_side != 0 || corpus_b.width % patch_side != 0)
      throw std::invalid_argument(
          "ExperimentConfig: corpus_b dims must be divisible by the patch "
          "side");
  }
  if (groups < 1 || per_group < 1)
    throw std::invalid_argument(
        "ExperimentConfig: groups and per_group must be >= 1");
  if (train_count < 1 || test_count < 1)
    throw std::invalid_argument(
        "ExperimentConfig: train and test counts must be >= 1");
  if (query_len < 1)
    throw std::invalid_argument("ExperimentConfig: query_len must be >= 1");
  if (injections < 1)
    throw std::invalid_argument("ExperimentConfig: injections must be >= 1");
  if (injections > train_count && scenario != "targeted")
    throw std::invalid_argument(
        "ExperimentConfig: cannot cluster into more groups than train "
        "queries");
  if (seed_docs < 1)
    throw std::invalid_argument("ExperimentConfig: seed_docs must be >= 1");
  if (seed_docs > corpus.size)
    throw std::invalid_argument(
        "ExperimentConfig: seed_docs exceeds the corpus size");
  if (workers < 1)
    throw std::invalid_argument("ExperimentConfig: workers must be >= 1");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"scenario", "mode", "seed", "corpus", "corpus_b", "groups",
              "per_group", "train_count", "test_count", "query_len", "attack",
              "injections", "seed_docs", "patch_side", "embed_dim", "workers",
              "out_dir"},
             "config");
  ExperimentConfig cfg;
  maybe(j, "scenario", cfg.scenario);
  if (auto it = j.find("mode"); it != j.end())
    cfg.mode = mode_from_name(it->get<std::string>());
  maybe(j, "seed", cfg.seed);
  if (auto it = j.find("corpus"); it != j.end())
    cfg.corpus = corpus_from_json(*it, CorpusSpec{}, "corpus");
  // The second collection defaults to the first with a shifted vocabulary
  // seed; an explicit corpus_b block overrides fields starting from corpus.
  cfg.corpus_b = cfg.corpus;
  cfg.corpus_b.seed = cfg.corpus.seed + 1;
  if (auto it = j.find("corpus_b"); it != j.end())
    cfg.corpus_b = corpus_from_json(*it, cfg.corpus, "corpus_b");
  maybe(j, "groups", cfg.groups);
  maybe(j, "per_group", cfg.per_group);
  maybe(j, "train_count", cfg.train_count);
  maybe(j, "test_count", cfg.test_count);
  maybe(j, "query_len", cfg.query_len);
  if (auto it = j.find("attack"); it != j.end())
    cfg.attack = attack_from_json(*it, AttackConfig{});
  maybe(j, "injections", cfg.injections);
  maybe(j, "seed_docs", cfg.seed_docs);
  maybe(j, "patch_side", cfg.patch_side);
  maybe(j, "embed_dim", cfg.embed_dim);
  maybe(j, "workers", cfg.workers);
  maybe(j, "out_dir", cfg.out_dir);
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  return {{"scenario", cfg.scenario},
          {"mode", mode_name(cfg.mode)},
          {"seed", cfg.seed},
          {"corpus", corpus_to_json(cfg.corpus)},
          {"corpus_b", corpus_to_json(cfg.corpus_b)},
          {"groups", cfg.groups},
          {"per_group", cfg.per_group},
          {"train_count", cfg.train_count},
          {"test_count", cfg.test_count},
          {"query_len", cfg.query_len},
          {"attack",
           {{"method", method_name(cfg.attack.method)},
            {"steps", cfg.attack.steps},
            {"lr0", cfg.attack.lr0},
            {"p", cfg.attack.grad_fraction},
            {"a", cfg.attack.mask_area}}},
          {"injections", cfg.injections},
          {"seed_docs", cfg.seed_docs},
          {"patch_side", cfg.patch_side},
          {"embed_dim", cfg.embed_dim},
          {"workers", cfg.workers}};
}

nlohmann::json report_to_json(const PoisonReport& report) {
  return {{"cutoffs", std::vector<Index>(kSuccessCutoffs.begin(),
                                         kSuccessCutoffs.end())},
          {"success",
           std::vector<double>(report.success.begin(), report.success.end())},
          {"success_std", std::vector<double>(report.success_std.begin(),
                                              report.success_std.end())},
          {"mrra100", report.mrra100},
          {"mrra100_std", report.mrra100_std},
          {"query_count", report.query_count},
          {"repeats", report.repeats},
          {"injected_ids", report.injected_ids},
          {"config_echo", report.config_echo}};
}

std::string format_report_json(const PoisonReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

std::vector<SweepPoint> default_sweep_grid(Index injections) {
  std::vector<SweepPoint> grid;
  for (const Method method : {Method::kDirect, Method::kNoise})
    for (const double p : {0.001, 0.01, 0.1, 1.0})
      grid.push_back({method, p, 0.2, injections});
  for (const double a : {0.005, 0.05, 0.2})
    grid.push_back({Method::kMask, 1.0, a, injections});
  return grid;
}

std::string format_sweep_csv(
    const std::vector<std::pair<SweepPoint, PoisonReport>>& rows) {
  std::string csv =
      "scenario,mode,method,p,a,m,steps,lr0,success@1,success@5,success@10,"
      "success@100,success_std@1,success_std@5,success_std@10,"
      "success_std@100,mrra100,mrra100_std,query_count\n";
  for (const auto& [point, report] : rows) {
    // The echo carries the per-point scenario/mode/steps/lr0; re-derive the
    // leading columns from it rather than trusting the caller to match.
    std::string scenario = "?", mode = "?", steps = "?", lr0 = "?";
    for (const std::string_view field :
         detail::whitespace_tokens(report.config_echo)) {
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string_view key = field.substr(0, eq);
      const std::string value(field.substr(eq + 1));
      if (key == "scenario") scenario = value;
      else if (key == "mode") mode = value;
      else if (key == "steps") steps = value;
      else if (key == "lr0") lr0 = value;
    }
    csv += scenario + "," + mode + "," + method_name(point.method) + "," +
           fmt_double(point.grad_fraction) + "," + fmt_double(point.mask_area) +
           "," + std::to_string(point.injections) + "," + steps + "," + lr0;
    for (double s : report.success) csv += "," + fmt_double(s);
    for (double s : report.success_std) csv += "," + fmt_double(s);
    csv += "," + fmt_double(report.mrra100) + "," +
           fmt_double(report.mrra100_std) + "," +
           std::to_string(report.query_count) + "\n";
  }
  return csv;
}

CorpusSpec effective_corpus_spec(const ExperimentConfig& cfg,
                                 const CorpusSpec& spec) {
  return effective_spec(cfg, spec);
}

std::uint64_t effective_split_seed(const ExperimentConfig& cfg,
                                   const CorpusSpec& spec) {
  return split_seed(cfg, spec);
}

std::uint64_t effective_group_seed(const ExperimentConfig& cfg) {
  return derive_seed(cfg.seed, "queries-groups");
}

namespace {

/// Everything the targeted protocol shares between full runs and the
/// train-only entry point. Jobs point into the other members, so instances
/// are filled in place and never moved.
struct TargetedSetup {
  SyntheticCorpus synth;
  std::vector<std::vector<QueryEmbedding>> group_embeddings;
  std::vector<std::string> seed_ids;
  std::vector<AttackJob> jobs;
};

void targeted_setup(const ExperimentConfig& cfg, const ScorerWeights& weights,
                    TargetedSetup& out) {
  out.synth = gen_corpus(effective_spec(cfg, cfg.corpus));
  const std::vector<QueryGroup> qgroups =
      gen_query_groups(out.synth, cfg.groups, cfg.per_group,
                       effective_group_seed(cfg), cfg.query_len);

  std::vector<QueryEmbedding> all_queries;
  out.group_embeddings.reserve(qgroups.size());
  for (const QueryGroup& group : qgroups) {
    out.group_embeddings.push_back(encode_all(group.texts, cfg.mode, weights));
    all_queries.insert(all_queries.end(), out.group_embeddings.back().begin(),
                       out.group_embeddings.back().end());
  }

  out.seed_ids = select_seed_documents(out.synth.corpus, all_queries,
                                       cfg.seed_docs, weights);

  out.jobs.reserve(static_cast<std::size_t>(cfg.groups * cfg.seed_docs));
  for (Index g = 0; g < cfg.groups; ++g)
    for (const std::string& seed_id : out.seed_ids) {
      AttackJob job;
      job.label = "g" + std::to_string(g) + "-" + seed_id;
      job.start = &out.synth.corpus.doc(seed_id).image;
      job.queries = &out.group_embeddings[static_cast<std::size_t>(g)];
      job.attack = cfg.attack;
      job.attack.rng_seed = derive_seed(cfg.seed, "attack-" + job.label);
      out.jobs.push_back(std::move(job));
    }
}

}  // namespace

PoisonReport run_targeted(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != "targeted")
    throw std::invalid_argument("run_targeted: scenario is " + cfg.scenario);
  const ScorerWeights weights = ScorerWeights::seeded(
      cfg.patch_side, cfg.embed_dim, derive_seed(cfg.seed, "weights"));
  TargetedSetup setup;
  targeted_setup(cfg, weights, setup);
  SyntheticCorpus& synth = setup.synth;
  const std::vector<std::vector<QueryEmbedding>>& group_embeddings =
      setup.group_embeddings;
  const std::vector<AttackJob>& jobs = setup.jobs;
  const std::vector<AttackResult> results =
      run_jobs(jobs, weights, cfg.workers);

  ArtifactWriter art(cfg.out_dir);
  const std::string echo = config_echo(cfg);
  std::vector<PoisonReport> reports;
  reports.reserve(results.size());
  std::size_t ji = 0;
  for (Index g = 0; g < cfg.groups; ++g)
    for (Index s = 0; s < cfg.seed_docs; ++s, ++ji) {
      art.attack_outputs(jobs[ji].label, results[ji]);
      const std::string adv_id = "adv-" + jobs[ji].label;
      synth.corpus.add(adv_id, results[ji].adversarial, /*injected=*/true);
      const auto& queries = group_embeddings[static_cast<std::size_t>(g)];
      std::vector<RankedList> lists;
      lists.reserve(queries.size());
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        lists.push_back(rank(queries[qi], synth.corpus, weights, 100,
                             jobs[ji].label + "-q" + std::to_string(qi)));
        art.add_run(lists.back(), cfg.scenario);
      }
      reports.push_back(measure_poisoning(lists, {adv_id}, echo));
      synth.corpus.remove(adv_id);
    }

  PoisonReport report = aggregate(reports);
  // Every seed document repeats the same group queries; the report counts
  // each distinct query once and folds the seeds into `repeats`.
  report.query_count = cfg.groups * cfg.per_group;
  art.finish(cfg.scenario, report, cfg);
  return report;
}

PoisonReport run_in_domain(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != "in_domain")
    throw std::invalid_argument("run_in_domain: scenario is " + cfg.scenario);
  SyntheticCorpus synth = gen_corpus(effective_spec(cfg, cfg.corpus));
  const ScorerWeights weights = ScorerWeights::seeded(
      cfg.patch_side, cfg.embed_dim, derive_seed(cfg.seed, "weights"));
  const QuerySplit split =
      gen_query_split(synth, cfg.train_count, cfg.test_count,
                      split_seed(cfg, cfg.corpus), cfg.query_len);
  require_disjoint(split);
  const std::vector<QueryEmbedding> train =
      encode_all(split.train, cfg.mode, weights);
  const std::vector<QueryEmbedding> test =
      encode_all(split.test, cfg.mode, weights);

  const TrainedAttack trained =
      train_adversarial(cfg, synth, weights, train);

  ArtifactWriter art(cfg.out_dir);
  const PoisonReport report = evaluate_injection(
      cfg, synth.corpus, weights, test, trained, config_echo(cfg), art);
  art.finish(cfg.scenario, report, cfg);
  return report;
}

PoisonReport run_out_of_domain(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != "out_of_domain")
    throw std::invalid_argument("run_out_of_domain: scenario is " +
                                cfg.scenario);
  SyntheticCorpus synth_a = gen_corpus(effective_spec(cfg, cfg.corpus));
  SyntheticCorpus synth_b = gen_corpus(effective_spec(cfg, cfg.corpus_b));
  const ScorerWeights weights = ScorerWeights::seeded(
      cfg.patch_side, cfg.embed_dim, derive_seed(cfg.seed, "weights"));

  // Train on collection A's train queries...
  const QuerySplit split_a =
      gen_query_split(synth_a, cfg.train_count, cfg.test_count,
                      split_seed(cfg, cfg.corpus), cfg.query_len);
  require_disjoint(split_a);
  const std::vector<QueryEmbedding> train =
      encode_all(split_a.train, cfg.mode, weights);
  const TrainedAttack trained =
      train_adversarial(cfg, synth_a, weights, train);

  // ...then poison collection B and evaluate on B's test queries.
  const QuerySplit split_b =
      gen_query_split(synth_b, cfg.train_count, cfg.test_count,
                      split_seed(cfg, cfg.corpus_b), cfg.query_len);
  require_disjoint(split_b);
  const std::vector<QueryEmbedding> test =
      encode_all(split_b.test, cfg.mode, weights);

  ArtifactWriter art(cfg.out_dir);
  const PoisonReport report = evaluate_injection(
      cfg, synth_b.corpus, weights, test, trained, config_echo(cfg), art);
  art.finish(cfg.scenario, report, cfg);
  return report;
}

std::vector<std::pair<std::string, AttackResult>> run_attacks(
    const ExperimentConfig& cfg) {
  cfg.validate();
  const ScorerWeights weights = ScorerWeights::seeded(
      cfg.patch_side, cfg.embed_dim, derive_seed(cfg.seed, "weights"));
  ArtifactWriter art(cfg.out_dir);
  std::vector<std::pair<std::string, AttackResult>> out;
  if (cfg.scenario == "targeted") {
    TargetedSetup setup;
    targeted_setup(cfg, weights, setup);
    std::vector<AttackResult> results =
        run_jobs(setup.jobs, weights, cfg.workers);
    out.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
      art.attack_outputs(setup.jobs[i].label, results[i]);
      out.emplace_back(setup.jobs[i].label, std::move(results[i]));
    }
  } else {
    // Both transfer protocols train on collection A's train split.
    SyntheticCorpus synth = gen_corpus(effective_spec(cfg, cfg.corpus));
    const QuerySplit split =
        gen_query_split(synth, cfg.train_count, cfg.test_count,
                        split_seed(cfg, cfg.corpus), cfg.query_len);
    require_disjoint(split);
    const std::vector<QueryEmbedding> train =
        encode_all(split.train, cfg.mode, weights);
    TrainedAttack trained = train_adversarial(cfg, synth, weights, train);
    out.reserve(trained.results.size());
    for (std::size_t i = 0; i < trained.results.size(); ++i) {
      art.attack_outputs(trained.labels[i], trained.results[i]);
      out.emplace_back(trained.labels[i], std::move(trained.results[i]));
    }
  }
  return out;
}

PoisonReport run_scenario(const ExperimentConfig& cfg) {
  if (cfg.scenario == "targeted") return run_targeted(cfg);
  if (cfg.scenario == "in_domain") return run_in_domain(cfg);
  if (cfg.scenario == "out_of_domain") return run_out_of_domain(cfg);
  throw std::invalid_argument("run_scenario: unknown scenario \"" +
                              cfg.scenario + "\"");
}

std::vector<std::pair<SweepPoint, PoisonReport>> sweep(
    const ExperimentConfig& cfg, const std::vector<SweepPoint>& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  std::vector<std::pair<SweepPoint, PoisonReport>> rows;
  rows.reserve(grid.size());
  for (const SweepPoint& point : grid) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.attack.method = point.method;
    point_cfg.attack.grad_fraction = point.grad_fraction;
    point_cfg.attack.mask_area = point.mask_area;
    point_cfg.injections = point.injections;
    point_cfg.out_dir.clear();  // sweeps report through the CSV only
    rows.emplace_back(point, run_scenario(point_cfg));
  }
  return rows;
}

}  // namespace pxp
