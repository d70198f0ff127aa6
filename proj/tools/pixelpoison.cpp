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
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pixelpoison/experiment.hpp"
#include "pixelpoison/io.hpp"

namespace {

namespace fs = std::filesystem;
using pxp::ExperimentConfig;
using pxp::Index;

constexpr Index kRankDepth = 100;

/// Bad invocation (usage) as opposed to a failure while doing the work.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string method;
  std::string mode;
  double grad_fraction = 1.0;
  double mask_area = 0.2;
  double lr0 = 1.0;
  Index injections = 1;
  Index steps = 0;
};

void add_common_options(CLI::App* sub, CliOptions& opt) {
  sub->add_option("--config", opt.config_path, "experiment config JSON file");
  sub->add_option("--seed", opt.seed, "global seed (overrides the config)");
  sub->add_option("--out", opt.out_dir, "output directory");
  sub->add_option("--method", opt.method, "attack method: direct|noise|mask");
  sub->add_option("--p", opt.grad_fraction,
                  "gradient fraction for direct/noise");
  sub->add_option("--a", opt.mask_area, "margin area for mask");
  sub->add_option("--m", opt.injections, "adversarial documents to inject");
  sub->add_option("--steps", opt.steps, "attack steps");
  sub->add_option("--lr0", opt.lr0, "initial learning rate");
  sub->add_option("--mode", opt.mode, "scorer mode: single|multi");
}

/// Config file first, then explicit flags on top.
ExperimentConfig load_config(const CLI::App* sub, const CliOptions& opt) {
  ExperimentConfig cfg;
  if (sub->count("--config")) {
    std::ifstream in(opt.config_path, std::ios::binary);
    if (!in.good())
      throw UsageError("cannot read config file " + opt.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(opt.config_path + ": " + e.what());
    }
    cfg = pxp::config_from_json(j);
  }
  if (sub->count("--seed")) cfg.seed = opt.seed;
  if (sub->count("--out")) cfg.out_dir = opt.out_dir;
  if (sub->count("--method"))
    cfg.attack.method = pxp::method_from_name(opt.method);
  if (sub->count("--p")) cfg.attack.grad_fraction = opt.grad_fraction;
  if (sub->count("--a")) cfg.attack.mask_area = opt.mask_area;
  if (sub->count("--m")) cfg.injections = opt.injections;
  if (sub->count("--steps")) cfg.attack.steps = opt.steps;
  if (sub->count("--lr0")) cfg.attack.lr0 = opt.lr0;
  if (sub->count("--mode")) cfg.mode = pxp::mode_from_name(opt.mode);
  return cfg;
}

const std::string& require_out(const ExperimentConfig& cfg,
                               const char* command) {
  if (cfg.out_dir.empty())
    throw UsageError(std::string(command) + " needs --out (or out_dir in the "
                     "config) for its files");
  return cfg.out_dir;
}

void write_json_file(const nlohmann::json& j, const fs::path& path) {
  pxp::save_text(j.dump(2) + "\n", path.string());
}

nlohmann::json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good())
    throw std::runtime_error(std::string(what) + " not found at " +
                             path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

/// The collection under attack: B for the transfer scenario, A otherwise.
const pxp::CorpusSpec& target_spec(const ExperimentConfig& cfg) {
  return cfg.scenario == "out_of_domain" ? cfg.corpus_b : cfg.corpus;
}

/// The evaluation queries rank/evaluate score against the poisoned corpus,
/// regenerated exactly as the full pipelines would.
std::vector<std::pair<std::string, std::string>> eval_queries(
    const ExperimentConfig& cfg, const pxp::SyntheticCorpus& target) {
  std::vector<std::pair<std::string, std::string>> out;  // (qid, text)
  if (cfg.scenario == "targeted") {
    const std::vector<pxp::QueryGroup> groups =
        pxp::gen_query_groups(target, cfg.groups, cfg.per_group,
                              pxp::effective_group_seed(cfg), cfg.query_len);
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (std::size_t q = 0; q < groups[g].texts.size(); ++q)
        out.emplace_back("g" + std::to_string(g) + "-q" + std::to_string(q),
                         groups[g].texts[q]);
    return out;
  }
  const pxp::QuerySplit split = pxp::gen_query_split(
      target, cfg.train_count, cfg.test_count,
      pxp::effective_split_seed(cfg, target_spec(cfg)), cfg.query_len);
  for (std::size_t i = 0; i < split.test.size(); ++i)
    out.emplace_back("test" + std::to_string(i), split.test[i]);
  return out;
}

int cmd_gen_corpus(const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(require_out(cfg, "gen-corpus")) / "corpus";
  fs::create_directories(dir / "images");
  const pxp::SyntheticCorpus synth =
      pxp::gen_corpus(pxp::effective_corpus_spec(cfg, cfg.corpus));
  nlohmann::json docs = nlohmann::json::array();
  for (const pxp::DocText& doc : synth.texts) {
    const std::string png = "images/" + doc.id + ".png";
    pxp::save_png(synth.corpus.doc(doc.id).image, (dir / png).string());
    docs.push_back({{"id", doc.id},
                    {"topic", doc.topic},
                    {"text", doc.text},
                    {"png", png},
                    {"injected", false}});
  }
  const nlohmann::json manifest = {{"size", cfg.corpus.size},
                                   {"height", cfg.corpus.height},
                                   {"width", cfg.corpus.width},
                                   {"glyph_side", cfg.corpus.glyph_side},
                                   {"documents", docs}};
  write_json_file(manifest, dir / "manifest.json");
  std::cout << nlohmann::json({{"documents", cfg.corpus.size},
                               {"manifest",
                                (dir / "manifest.json").string()}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_gen_queries(const ExperimentConfig& cfg) {
  const fs::path dir = require_out(cfg, "gen-queries");
  fs::create_directories(dir);
  nlohmann::json out = {{"scenario", cfg.scenario}};
  std::size_t count = 0;
  if (cfg.scenario == "targeted") {
    const pxp::SyntheticCorpus synth =
        pxp::gen_corpus(pxp::effective_corpus_spec(cfg, cfg.corpus));
    nlohmann::json groups = nlohmann::json::array();
    for (const pxp::QueryGroup& g : pxp::gen_query_groups(
             synth, cfg.groups, cfg.per_group, pxp::effective_group_seed(cfg),
             cfg.query_len)) {
      groups.push_back(
          {{"doc_id", g.doc_id}, {"topic", g.topic}, {"texts", g.texts}});
      count += g.texts.size();
    }
    out["groups"] = std::move(groups);
  } else {
    // Train queries always come from collection A; the transfer scenario
    // evaluates on collection B's test pool.
    const pxp::SyntheticCorpus synth_a =
        pxp::gen_corpus(pxp::effective_corpus_spec(cfg, cfg.corpus));
    const pxp::QuerySplit split_a = pxp::gen_query_split(
        synth_a, cfg.train_count, cfg.test_count,
        pxp::effective_split_seed(cfg, cfg.corpus), cfg.query_len);
    out["train"] = split_a.train;
    if (cfg.scenario == "out_of_domain") {
      const pxp::SyntheticCorpus synth_b =
          pxp::gen_corpus(pxp::effective_corpus_spec(cfg, cfg.corpus_b));
      const pxp::QuerySplit split_b = pxp::gen_query_split(
          synth_b, cfg.train_count, cfg.test_count,
          pxp::effective_split_seed(cfg, cfg.corpus_b), cfg.query_len);
      out["test"] = split_b.test;
    } else {
      out["test"] = split_a.test;
    }
    count = out["train"].size() + out["test"].size();
  }
  write_json_file(out, dir / "queries.json");
  std::cout << nlohmann::json({{"queries", count},
                               {"file", (dir / "queries.json").string()}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg) {
  require_out(cfg, "attack");
  const auto results = pxp::run_attacks(cfg);
  nlohmann::json attacks = nlohmann::json::array();
  for (const auto& [label, res] : results)
    attacks.push_back({{"label", label},
                       {"best_loss", res.best_loss},
                       {"best_step", res.best_step}});
  std::cout << nlohmann::json({{"attacks", attacks}}).dump() << "\n";
  return 0;
}

int cmd_inject(const ExperimentConfig& cfg) {
  const fs::path dir = require_out(cfg, "inject");
  const fs::path adv_dir = dir / "adv";
  if (!fs::is_directory(adv_dir))
    throw std::runtime_error("no adversarial images under " +
                             adv_dir.string() + "; run attack first");
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(adv_dir))
    if (entry.path().extension() == ".pxp")
      stems.push_back(entry.path().stem().string());
  if (stems.empty())
    throw std::runtime_error("no adversarial images under " +
                             adv_dir.string() + "; run attack first");
  std::sort(stems.begin(), stems.end());
  nlohmann::json injected = nlohmann::json::array();
  for (const std::string& stem : stems)
    injected.push_back({{"id", "adv-" + stem}, {"raw", "adv/" + stem + ".pxp"}});
  const nlohmann::json poisoned = {{"scenario", cfg.scenario},
                                   {"base_documents", target_spec(cfg).size},
                                   {"injected", injected}};
  write_json_file(poisoned, dir / "poisoned.json");
  std::cout << poisoned.dump() << "\n";
  return 0;
}

int cmd_rank(const ExperimentConfig& cfg) {
  const fs::path dir = require_out(cfg, "rank");
  const nlohmann::json poisoned =
      read_json_file(dir / "poisoned.json", "poisoned.json");

  pxp::SyntheticCorpus target =
      pxp::gen_corpus(pxp::effective_corpus_spec(cfg, target_spec(cfg)));
  for (const auto& doc : poisoned.at("injected"))
    target.corpus.add(doc.at("id").get<std::string>(),
                      pxp::load_raw((dir / doc.at("raw").get<std::string>())
                                        .string()),
                      /*injected=*/true);

  const pxp::ScorerWeights weights = pxp::ScorerWeights::seeded(
      cfg.patch_side, cfg.embed_dim, pxp::derive_seed(cfg.seed, "weights"));
  std::string runs;
  std::size_t queries = 0;
  for (const auto& [qid, text] : eval_queries(cfg, target)) {
    const pxp::RankedList list =
        pxp::rank(pxp::encode_query(text, cfg.mode, weights), target.corpus,
                  weights, kRankDepth, qid);
    runs += pxp::format_trec_run(list, cfg.scenario);
    ++queries;
  }
  fs::create_directories(dir / "runs");
  const fs::path run_path = dir / "runs" / (cfg.scenario + ".trec");
  pxp::save_text(runs, run_path.string());
  std::cout << nlohmann::json({{"queries", queries},
                               {"depth", kRankDepth},
                               {"run", run_path.string()}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg) {
  const fs::path dir = require_out(cfg, "evaluate");
  const nlohmann::json poisoned =
      read_json_file(dir / "poisoned.json", "poisoned.json");
  std::unordered_set<std::string> adversarial;
  for (const auto& doc : poisoned.at("injected"))
    adversarial.insert(doc.at("id").get<std::string>());

  const fs::path run_path = dir / "runs" / (cfg.scenario + ".trec");
  std::ifstream in(run_path, std::ios::binary);
  if (!in.good())
    throw std::runtime_error("run file not found at " + run_path.string() +
                             "; run rank first");
  std::vector<pxp::RankedList> lists;
  std::unordered_map<std::string, std::size_t> index_of;
  std::vector<std::vector<std::pair<Index, pxp::ScoredDoc>>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream cols(line);
    std::string qid, q0, doc_id, tag;
    Index rank_pos = 0;
    double score = 0.0;
    if (!(cols >> qid >> q0 >> doc_id >> rank_pos >> score >> tag) ||
        q0 != "Q0")
      throw std::runtime_error(run_path.string() + ":" +
                               std::to_string(line_no) +
                               ": not a TREC run line");
    auto [it, fresh] = index_of.try_emplace(qid, lists.size());
    if (fresh) {
      lists.push_back({qid, {}});
      entries.emplace_back();
    }
    entries[it->second].push_back({rank_pos, {doc_id, score}});
  }
  for (std::size_t i = 0; i < lists.size(); ++i) {
    std::stable_sort(
        entries[i].begin(), entries[i].end(),
        [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [pos, doc] : entries[i])
      lists[i].entries.push_back(std::move(doc));
  }

  const pxp::PoisonReport report =
      pxp::measure_poisoning(lists, adversarial, pxp::config_echo(cfg));
  const std::string text = pxp::format_report_json(report);
  pxp::save_text(text, (dir / "report.json").string());
  std::cout << text;
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  const pxp::PoisonReport report = pxp::run_scenario(cfg);
  std::cout << pxp::format_report_json(report);
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  const auto rows = pxp::sweep(cfg, pxp::default_sweep_grid(cfg.injections));
  const std::string csv = pxp::format_sweep_csv(rows);
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    pxp::save_text(csv, (fs::path(cfg.out_dir) / "sweep.csv").string());
  }
  std::cout << csv;
  return 0;
}

std::string error_json(const std::string& message) {
  return nlohmann::json({{"error", message}}).dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pixelpoison: adversarial screenshot attacks on toy "
               "screenshot retrievers"};
  app.require_subcommand(1);
  CliOptions opt;

  const std::map<std::string, std::pair<const char*,
                                        int (*)(const ExperimentConfig&)>>
      commands = {
          {"gen-corpus",
           {"render the synthetic screenshot corpus", cmd_gen_corpus}},
          {"gen-queries",
           {"derive the scenario's query sets", cmd_gen_queries}},
          {"attack",
           {"optimise adversarial screenshots (no evaluation)", cmd_attack}},
          {"inject",
           {"stage the optimised screenshots for injection", cmd_inject}},
          {"rank",
           {"rank evaluation queries against the poisoned corpus", cmd_rank}},
          {"evaluate",
           {"recount poisoning metrics from run files", cmd_evaluate}},
          {"run", {"run the configured scenario end to end", cmd_run}},
          {"sweep",
           {"run the default p/a trade-off grid and emit CSV", cmd_sweep}},
      };
  for (const auto& [name, cmd] : commands)
    add_common_options(app.add_subcommand(name, cmd.first), opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json(e.what()) << "\n";
    return 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    return commands.at(sub->get_name()).second(load_config(sub, opt));
  } catch (const UsageError& e) {
    std::cerr << error_json(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_json(e.what()) << "\n";
    return 1;
  }
}
