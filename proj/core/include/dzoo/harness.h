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

#ifndef DZOO_HARNESS_H_
#define DZOO_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dzoo/constraints.h"
#include "dzoo/embedding.h"
#include "dzoo/remote_victim.h"
#include "dzoo/search.h"
#include "dzoo/victim.h"

namespace dzoo {

struct ExampleRecord {
  std::string id;
  Tokens tokens;
  std::size_t label = 0;
  double weight = 1.0;  // reserved
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// JSON lines: {"id": "...", "tokens": ["...", ...], "label": int}. Labels are
// checked against num_classes when given.
std::vector<ExampleRecord> load_dataset(std::istream& source,
                                        std::optional<std::size_t> num_classes = std::nullopt);
std::vector<ExampleRecord> load_dataset_file(const std::filesystem::path& path,
                                             std::optional<std::size_t> num_classes = std::nullopt);
void write_dataset(std::ostream& out, std::span<const ExampleRecord> records);

enum class AttackKind {
  kDiscreteZoo,
  kRandom,
  kRandomCs,
  kFarthest,
  kClosest,
  kGreedy,  // beam search of width 1 over all positions
  kBeam,
  kWir,     // greedy over an importance-ranked position order
};

AttackKind parse_attack_kind(std::string_view name);
std::string_view to_string(AttackKind kind);

// Per-attack overrides on top of the regime's default SearchConfig.
struct SearchOverrides {
  std::optional<std::size_t> n_samples;
  std::optional<std::size_t> max_updates;
  std::optional<double> step_scale;
  std::optional<std::size_t> pool_factor;
  std::optional<std::size_t> query_budget;
  std::optional<ImportanceMode> ranking;

  SearchConfig apply(SearchConfig base) const;
};

struct AttackSpec {
  std::string name;
  AttackKind kind = AttackKind::kDiscreteZoo;
  SearchOverrides search;
  std::size_t beam_width = 4;
  ImportanceMode wir_mode = ImportanceMode::kUnk;
  std::optional<std::size_t> runs;
};

// Whether repeated runs with different seeds can differ.
bool is_stochastic(const AttackSpec& spec);

// Runs one attack on an example whose initial query is already in the
// ledger. Never throws for budget or victim errors; those become statuses.
AttackOutcome run_attack(const AttackSpec& spec, const Sentence& sentence, std::size_t label,
                         const AttackContext& ctx, const SearchConfig& search,
                         std::uint64_t seed);

struct RunMetrics {
  std::uint64_t seed = 0;
  std::size_t examples = 0;
  std::size_t attacked = 0;
  std::size_t skipped = 0;
  std::size_t successes = 0;
  std::size_t victim_errors = 0;
  std::size_t total_queries = 0;
  double success_rate_pct = 0.0;
  double avg_queries = 0.0;
  double pct_words_changed = 0.0;  // 0 with no_successes set when undefined
  bool no_successes = true;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
};

Summary summarize(std::span<const double> values);

struct CellReport {
  std::string attack;
  std::string kind;
  std::string regime;
  SearchConfig search;
  std::size_t runs = 0;
  std::size_t skipped = 0;
  Summary success_rate_pct;
  Summary avg_queries;
  // Averaged over runs that had at least one success.
  Summary pct_words_changed;
  bool no_successes = true;
  std::size_t victim_errors = 0;
  std::vector<RunMetrics> rows;
};

struct BenchmarkReport {
  std::size_t dataset_size = 0;
  GoalConfig goal;
  std::vector<CellReport> cells;
};

struct BenchmarkOptions {
  std::vector<std::uint64_t> seeds{1};
  std::size_t runs_per_attack = 1;
  std::size_t threads = 1;
  std::uint64_t seed_offset = 0;
};

// Attack x regime x run grid. Examples the victim already misclassifies are
// skipped. VictimUnavailable on an example's first query aborts the run.
BenchmarkReport run_benchmark(std::span<const ExampleRecord> dataset, const Victim& victim,
                              const EmbeddingStore& store, std::span<const AttackSpec> attacks,
                              std::span<const ConstraintConfig> regimes, const GoalConfig& goal,
                              const BenchmarkOptions& options);

enum class ReportFormat { kJson, kTable };

std::string render_report(const BenchmarkReport& report, ReportFormat format);

// "21.2±0.1"
std::string format_mean_std(const Summary& s, int decimals = 1);

// One JSON record per threshold with the full neighbor-count histogram.
std::string analyze_embeddings(const EmbeddingStore& store, std::span<const double> thresholds);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VictimSpec {
  enum class Kind { kBag, kScripted, kRemote };
  Kind kind = Kind::kBag;
  Eigen::MatrixXd weights;
  Vector bias;
  // Bag weights drawn by make_synthetic_bag_weights instead of given inline.
  std::optional<std::uint64_t> synthetic_seed;
  double synthetic_scale = 8.0;
  std::map<Tokens, ProbabilityVector> table;
  std::optional<ProbabilityVector> fallback;
  RemoteVictimOptions remote;
};

struct HarnessConfig {
  std::filesystem::path embeddings;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> stopwords;
  std::size_t num_classes = 2;
  VictimSpec victim;
  GoalConfig goal;
  std::vector<AttackSpec> attacks;
  std::vector<std::string> regimes;
  BenchmarkOptions options;
  std::vector<double> analysis_thresholds{0.9, 0.7};
  std::optional<std::filesystem::path> report_path;
  std::optional<std::filesystem::path> analysis_path;
};

// Relative paths resolve against the config file's directory. Throws
// ConfigError.
HarnessConfig load_config(const std::filesystem::path& path);
HarnessConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

std::shared_ptr<const Victim> build_victim(const VictimSpec& spec, std::size_t num_classes,
                                           std::shared_ptr<const EmbeddingStore> store);

std::vector<ConstraintConfig> build_regimes(const HarnessConfig& config);

}  // namespace dzoo

#endif  // DZOO_HARNESS_H_
