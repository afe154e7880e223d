// Copyright 2026 The dzoo Authors
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

// dzoo: run attack benchmarks, embedding statistics and victim probes.
//
//   dzoo attack --config bench.json --format table
//   dzoo analyze --config bench.json --out stats.jsonl
//   dzoo victim-check --config bench.json --text "a fine film"
//   dzoo synth --out-dir demo

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dzoo/embedding.h"
#include "dzoo/harness.h"
#include "dzoo/synthetic.h"
#include "dzoo/victim.h"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVictim = 3;

void emit(const std::string& text, const std::optional<std::string>& out) {
  if (!out) {
    std::cout << text;
    return;
  }
  std::ofstream file(*out, std::ios::binary);
  if (!file) throw dzoo::ConfigError("cannot write " + *out);
  file << text;
}

std::shared_ptr<const dzoo::EmbeddingStore> load_store(const dzoo::HarnessConfig& config) {
  return std::make_shared<const dzoo::EmbeddingStore>(
      dzoo::load_embeddings_file(config.embeddings));
}

int run_attack(const std::string& config_path, const std::optional<std::string>& out,
               const std::string& format, std::uint64_t seed_offset,
               std::optional<std::size_t> threads) {
  dzoo::HarnessConfig config = dzoo::load_config(config_path);
  config.options.seed_offset = seed_offset;
  if (threads) config.options.threads = *threads;
  if (config.attacks.empty()) throw dzoo::ConfigError("config lists no attacks");
  if (config.dataset.empty()) throw dzoo::ConfigError("config has no dataset");

  const auto store = load_store(config);
  const auto dataset = dzoo::load_dataset_file(config.dataset, config.num_classes);
  const auto victim = dzoo::build_victim(config.victim, config.num_classes, store);
  const auto regimes = dzoo::build_regimes(config);

  const dzoo::BenchmarkReport report = dzoo::run_benchmark(
      dataset, *victim, *store, config.attacks, regimes, config.goal, config.options);
  const std::string json = dzoo::render_report(report, dzoo::ReportFormat::kJson);
  if (config.report_path) emit(json, config.report_path->string());
  emit(format == "table" ? dzoo::render_report(report, dzoo::ReportFormat::kTable) : json, out);
  return kExitOk;
}

int run_analyze(const std::optional<std::string>& config_path,
                const std::optional<std::string>& embeddings,
                std::vector<double> thresholds, const std::optional<std::string>& out) {
  std::filesystem::path path;
  std::optional<std::string> target = out;
  if (config_path) {
    const dzoo::HarnessConfig config = dzoo::load_config(*config_path);
    path = config.embeddings;
    if (thresholds.empty()) thresholds = config.analysis_thresholds;
    if (!target && config.analysis_path) target = config.analysis_path->string();
  }
  if (embeddings) path = *embeddings;
  if (path.empty()) throw dzoo::ConfigError("analyze needs --config or --embeddings");
  if (thresholds.empty()) thresholds = {0.9, 0.7};
  for (double t : thresholds) {
    if (!(t > -1.0 && t <= 1.0)) throw dzoo::ConfigError("threshold outside (-1, 1]");
  }
  const dzoo::EmbeddingStore store = dzoo::load_embeddings_file(path);
  emit(dzoo::analyze_embeddings(store, thresholds), target);
  return kExitOk;
}

int run_victim_check(const std::string& config_path, const std::optional<std::string>& text) {
  const dzoo::HarnessConfig config = dzoo::load_config(config_path);
  std::shared_ptr<const dzoo::EmbeddingStore> store;
  if (config.victim.kind == dzoo::VictimSpec::Kind::kBag) store = load_store(config);
  const auto victim = dzoo::build_victim(config.victim, config.num_classes, store);

  dzoo::Tokens tokens;
  if (text) {
    std::istringstream words(*text);
    for (std::string w; words >> w;) tokens.push_back(w);
  } else if (!config.dataset.empty()) {
    const auto dataset = dzoo::load_dataset_file(config.dataset, config.num_classes);
    if (!dataset.empty()) tokens = dataset.front().tokens;
  }
  if (tokens.empty()) throw dzoo::ConfigError("victim-check needs --text or a non-empty dataset");

  const dzoo::ProbabilityVector probs = victim->classify(tokens);
  nlohmann::json doc = {{"tokens", tokens},
                        {"probabilities", std::vector<double>(probs.values().begin(), probs.values().end())},
                        {"predicted_label", probs.argmax()}};
  std::cout << doc.dump() << '\n';
  return kExitOk;
}

int run_synth(const std::string& out_dir, std::size_t examples, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  dzoo::SyntheticStoreOptions store_options;
  store_options.seed = seed;
  auto store = std::make_shared<const dzoo::EmbeddingStore>(dzoo::make_synthetic_store(store_options));
  constexpr double kScale = 8.0;
  const std::uint64_t victim_seed = seed + 1;
  dzoo::BagWeights weights = dzoo::make_synthetic_bag_weights(store->dim(), kScale, victim_seed);
  const auto victim = dzoo::make_bag_victim(store, weights.weights, weights.bias);
  dzoo::SyntheticDatasetOptions data_options;
  data_options.examples = examples;
  data_options.seed = seed + 2;
  const auto dataset = dzoo::make_synthetic_dataset(*store, *victim, data_options);

  {
    std::ofstream out(fs::path(out_dir) / "embeddings.txt", std::ios::binary);
    dzoo::write_embeddings(out, *store);
  }
  {
    std::ofstream out(fs::path(out_dir) / "dataset.jsonl", std::ios::binary);
    dzoo::write_dataset(out, dataset);
  }
  const nlohmann::json config = {
      {"embeddings", "embeddings.txt"},
      {"dataset", "dataset.jsonl"},
      {"num_classes", 2},
      {"victim", {{"kind", "bag"}, {"synthetic", {{"seed", victim_seed}, {"scale", kScale}}}}},
      {"goal", {{"kind", "zoo"}, {"kappa", 0.0}}},
      {"attacks",
       {{{"kind", "discretezoo"}, {"runs", 3}},
        {{"kind", "random"}, {"runs", 7}},
        {{"kind", "random_cs"}, {"runs", 7}},
        {{"kind", "farthest"}, {"runs", 7}},
        {{"kind", "closest"}, {"runs", 7}},
        {{"kind", "greedy"}},
        {{"name", "wir_unk"}, {"kind", "wir"}, {"mode", "unk"}}}},
      {"regimes", {"constrained", "unconstrained"}},
      {"seeds", {1, 2, 3, 4, 5, 6, 7}},
      {"threads", 4},
      {"output", {{"report", "report.json"}, {"analysis", "analysis.jsonl"}}},
  };
  std::ofstream out(fs::path(out_dir) / "config.json", std::ios::binary);
  out << config.dump(2) << '\n';
  std::cerr << "wrote " << store->size() << " tokens and " << dataset.size() << " examples to "
            << out_dir << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box word substitution attacks and benchmarks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out;
  std::string format = "json";
  std::uint64_t seed_offset = 0;
  std::optional<std::size_t> threads;

  auto* attack = app.add_subcommand("attack", "Run the attack x regime x seed benchmark");
  attack->add_option("--config", config_path, "Benchmark config (json)")->required();
  attack->add_option("--out", out, "Write the report here instead of stdout");
  attack->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "table"}));
  attack->add_option("--seed-offset", seed_offset, "Added to every configured seed");
  attack->add_option("--threads", threads, "Examples attacked in parallel");

  std::optional<std::string> analyze_config;
  std::optional<std::string> embeddings;
  std::vector<double> thresholds;
  auto* analyze = app.add_subcommand("analyze", "Neighbourhood statistics of an embedding file");
  analyze->add_option("--config", analyze_config, "Benchmark config (json)");
  analyze->add_option("--embeddings", embeddings, "Embedding text file");
  analyze->add_option("--threshold", thresholds, "Cosine thresholds (repeatable)");
  analyze->add_option("--out", out, "Write JSON lines here instead of stdout");

  std::optional<std::string> text;
  auto* check = app.add_subcommand("victim-check", "Classify one input with the configured victim");
  check->add_option("--config", config_path, "Benchmark config (json)")->required();
  check->add_option("--text", text, "Whitespace-separated tokens");

  std::string out_dir = "demo";
  std::size_t examples = 200;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Write a synthetic store, dataset and config");
  synth->add_option("--out-dir", out_dir, "Output directory");
  synth->add_option("--examples", examples, "Dataset size");
  synth->add_option("--seed", synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*attack) return run_attack(config_path, out, format, seed_offset, threads);
    if (*analyze) return run_analyze(analyze_config, embeddings, thresholds, out);
    if (*check) return run_victim_check(config_path, text);
    if (*synth) return run_synth(out_dir, examples, synth_seed);
  } catch (const dzoo::VictimUnavailable& e) {
    std::cerr << "dzoo: " << e.what() << '\n';
    return kExitVictim;
  } catch (const dzoo::ConfigError& e) {
    std::cerr << "dzoo: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dzoo::DatasetError& e) {
    std::cerr << "dzoo: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dzoo::EmbeddingParseError& e) {
    std::cerr << "dzoo: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "dzoo: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
