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

#include "dzoo/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "dzoo/rng.h"
#include "dzoo/synthetic.h"
#include "json.hpp"

namespace dzoo {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset

DatasetError::DatasetError(std::size_t line, const std::string& what)
    : std::runtime_error("dataset: line " + std::to_string(line) + ": " + what), line_(line) {}

std::vector<ExampleRecord> load_dataset(std::istream& source,
                                        std::optional<std::size_t> num_classes) {
  std::vector<ExampleRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(line_no, std::string("malformed json: ") + e.what());
    }
    if (!doc.is_object()) throw DatasetError(line_no, "record is not an object");
    ExampleRecord record;
    if (!doc.contains("id") || !doc["id"].is_string()) {
      throw DatasetError(line_no, "missing string field \"id\"");
    }
    record.id = doc["id"].get<std::string>();
    if (!doc.contains("tokens") || !doc["tokens"].is_array()) {
      throw DatasetError(line_no, "missing array field \"tokens\"");
    }
    for (const auto& t : doc["tokens"]) {
      if (!t.is_string()) throw DatasetError(line_no, "token is not a string");
      record.tokens.push_back(t.get<std::string>());
    }
    if (record.tokens.empty()) throw DatasetError(line_no, "empty token list");
    if (!doc.contains("label") || !doc["label"].is_number_integer()) {
      throw DatasetError(line_no, "missing integer field \"label\"");
    }
    const auto label = doc["label"].get<std::int64_t>();
    if (label < 0) throw DatasetError(line_no, "negative label");
    record.label = static_cast<std::size_t>(label);
    if (num_classes && record.label >= *num_classes) {
      throw DatasetError(line_no, "label " + std::to_string(label) + " >= class count " +
                                      std::to_string(*num_classes));
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<ExampleRecord> load_dataset_file(const std::filesystem::path& path,
                                             std::optional<std::size_t> num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(0, "cannot open " + path.string());
  return load_dataset(in, num_classes);
}

void write_dataset(std::ostream& out, std::span<const ExampleRecord> records) {
  for (const auto& r : records) {
    json doc = {{"id", r.id}, {"tokens", r.tokens}, {"label", r.label}};
    out << doc.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Attack dispatch

namespace {

struct KindName {
  AttackKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {AttackKind::kDiscreteZoo, "discretezoo"}, {AttackKind::kRandom, "random"},
    {AttackKind::kRandomCs, "random_cs"},      {AttackKind::kFarthest, "farthest"},
    {AttackKind::kClosest, "closest"},         {AttackKind::kGreedy, "greedy"},
    {AttackKind::kBeam, "beam"},               {AttackKind::kWir, "wir"},
};

std::string_view mode_name(ImportanceMode mode) {
  switch (mode) {
    case ImportanceMode::kUnk: return "unk";
    case ImportanceMode::kDel: return "del";
    case ImportanceMode::kRand: return "rand";
  }
  return "unk";
}

ImportanceMode parse_mode(std::string_view name) {
  if (name == "unk") return ImportanceMode::kUnk;
  if (name == "del") return ImportanceMode::kDel;
  if (name == "rand") return ImportanceMode::kRand;
  throw ConfigError("unknown importance mode '" + std::string(name) + "'");
}

}  // namespace

AttackKind parse_attack_kind(std::string_view name) {
  for (const auto& k : kKindNames) {
    if (k.name == name) return k.kind;
  }
  throw ConfigError("unknown attack kind '" + std::string(name) + "'");
}

std::string_view to_string(AttackKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

SearchConfig SearchOverrides::apply(SearchConfig base) const {
  if (n_samples) base.n_samples = *n_samples;
  if (max_updates) base.max_updates = *max_updates;
  if (step_scale) base.step_scale = *step_scale;
  if (pool_factor) base.pool_factor = *pool_factor;
  if (query_budget) base.query_budget = *query_budget;
  if (ranking) base.ranking = *ranking;
  return base;
}

bool is_stochastic(const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::kDiscreteZoo:
    case AttackKind::kRandom:
    case AttackKind::kRandomCs:
    case AttackKind::kFarthest:
    case AttackKind::kClosest:
      return true;
    case AttackKind::kWir:
      return spec.wir_mode == ImportanceMode::kRand;
    case AttackKind::kGreedy:
    case AttackKind::kBeam:
      return false;
  }
  return true;
}

AttackOutcome run_attack(const AttackSpec& spec, const Sentence& sentence, std::size_t label,
                         const AttackContext& ctx, const SearchConfig& search,
                         std::uint64_t seed) {
  Rng rng(seed);
  switch (spec.kind) {
    case AttackKind::kDiscreteZoo: {
      SearchConfig seeded = search;
      seeded.rng_seed = seed;
      return discretezoo_attack(sentence, label, ctx, seeded);
    }
    case AttackKind::kRandom:
      return random_attack(sentence, label, ctx, rng);
    case AttackKind::kRandomCs:
      return random_cs_attack(sentence, label, ctx,
                              search.query_budget.value_or(kDefaultContinuedSamplingBudget), rng);
    case AttackKind::kFarthest:
      return extremal_attack(sentence, label, ctx, ExtremalMode::kFarthest, rng);
    case AttackKind::kClosest:
      return extremal_attack(sentence, label, ctx, ExtremalMode::kClosest, rng);
    case AttackKind::kGreedy:
    case AttackKind::kBeam: {
      const BeamOptions options{spec.kind == AttackKind::kGreedy ? 1 : spec.beam_width, false};
      return beam_attack(sentence, label, ctx,
                         attack_targets(sentence, ctx.constraints, ctx.store), options);
    }
    case AttackKind::kWir: {
      // Ranking queries happen before the attack proper; fold their failures
      // into the outcome like any other query.
      AttackOutcome out{.final_sentence = sentence, .trace = {}, .error = {}};
      try {
        const TargetIndexList targets = attack_targets(sentence, ctx.constraints, ctx.store);
        const TargetIndexList order =
            importance_order(sentence, targets, label, ctx, spec.wir_mode, rng);
        return greedy_attack(sentence, label, ctx, order);
      } catch (const BudgetExhausted& e) {
        out.status = AttackStatus::kBudget;
        out.error = e.what();
      } catch (const VictimError& e) {
        out.status = AttackStatus::kVictimError;
        out.error = e.what();
      }
      out.queries = ctx.ledger.count();
      return out;
    }
  }
  throw std::logic_error("run_attack: unhandled attack kind");
}

// ---------------------------------------------------------------------------
// Benchmark

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

namespace {

struct ExampleResult {
  bool skipped = false;
  bool success = false;
  bool victim_error = false;
  std::size_t queries = 0;
  double pct_words_changed = 0.0;
};

ExampleResult attack_example(const ExampleRecord& record, std::size_t index,
                             const AttackSpec& spec, const Victim& victim,
                             const EmbeddingStore& store, const ConstraintConfig& regime,
                             const SearchConfig& search, const GoalConfig& goal,
                             std::uint64_t run_seed) {
  QueryLedger::Options ledger_options;
  if (spec.kind != AttackKind::kRandomCs) ledger_options.hard_cap = search.query_budget;
  QueryLedger ledger(ledger_options);
  const Sentence sentence(record.tokens);

  ExampleResult result;
  GoalFunctionResult initial;
  try {
    initial = query(victim, ledger, sentence.tokens(), record.label, goal);
  } catch (const VictimUnavailable&) {
    throw;
  } catch (const VictimError&) {
    result.victim_error = true;
    result.queries = ledger.count();
    return result;
  }
  if (initial.flipped) {
    result.skipped = true;
    return result;
  }
  const AttackContext ctx{victim, ledger, store, regime, goal};
  const AttackOutcome outcome =
      run_attack(spec, sentence, record.label, ctx, search, mix_seed(run_seed, index));
  result.success = outcome.success;
  result.victim_error = outcome.status == AttackStatus::kVictimError;
  result.queries = ledger.count();
  if (outcome.success) {
    result.pct_words_changed = 100.0 * static_cast<double>(outcome.words_changed) /
                               static_cast<double>(record.tokens.size());
  }
  return result;
}

std::vector<ExampleResult> attack_all(std::span<const ExampleRecord> dataset,
                                      const AttackSpec& spec, const Victim& victim,
                                      const EmbeddingStore& store, const ConstraintConfig& regime,
                                      const SearchConfig& search, const GoalConfig& goal,
                                      std::uint64_t run_seed, std::size_t threads) {
  std::vector<ExampleResult> results(dataset.size());
  auto work = [&](std::size_t i) {
    results[i] = attack_example(dataset[i], i, spec, victim, store, regime, search, goal, run_seed);
  };
  if (threads <= 1 || dataset.size() <= 1) {
    for (std::size_t i = 0; i < dataset.size(); ++i) work(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  const std::size_t n = std::min(threads, dataset.size());
  for (std::size_t t = 0; t < n; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < dataset.size(); i = next++) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = dataset.size();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

RunMetrics aggregate_run(std::span<const ExampleResult> results, std::uint64_t seed) {
  RunMetrics m;
  m.seed = seed;
  m.examples = results.size();
  double words = 0.0;
  for (const auto& r : results) {
    if (r.skipped) {
      ++m.skipped;
      continue;
    }
    ++m.attacked;
    m.total_queries += r.queries;
    if (r.victim_error) ++m.victim_errors;
    if (r.success) {
      ++m.successes;
      words += r.pct_words_changed;
    }
  }
  if (m.attacked > 0) {
    m.success_rate_pct = 100.0 * static_cast<double>(m.successes) / static_cast<double>(m.attacked);
    m.avg_queries = static_cast<double>(m.total_queries) / static_cast<double>(m.attacked);
  }
  m.no_successes = m.successes == 0;
  if (!m.no_successes) m.pct_words_changed = words / static_cast<double>(m.successes);
  return m;
}

}  // namespace

BenchmarkReport run_benchmark(std::span<const ExampleRecord> dataset, const Victim& victim,
                              const EmbeddingStore& store, std::span<const AttackSpec> attacks,
                              std::span<const ConstraintConfig> regimes, const GoalConfig& goal,
                              const BenchmarkOptions& options) {
  goal.validate();
  for (const auto& record : dataset) {
    if (record.label >= victim.num_classes()) {
      throw std::invalid_argument("dataset record '" + record.id + "' has label out of range");
    }
  }
  BenchmarkReport report;
  report.dataset_size = dataset.size();
  report.goal = goal;

  for (const AttackSpec& spec : attacks) {
    const std::size_t runs =
        is_stochastic(spec) ? spec.runs.value_or(options.runs_per_attack) : spec.runs.value_or(1);
    if (runs < 1) throw std::invalid_argument("attack '" + spec.name + "': runs must be >= 1");
    if (options.seeds.size() < runs) {
      throw std::invalid_argument("attack '" + spec.name + "' needs " + std::to_string(runs) +
                                  " seeds, got " + std::to_string(options.seeds.size()));
    }
    for (const ConstraintConfig& regime : regimes) {
      regime.validate();
      CellReport cell;
      cell.attack = spec.name;
      cell.kind = std::string(to_string(spec.kind));
      cell.regime = regime.regime_name;
      cell.search = spec.search.apply(default_search_config(regime));
      cell.search.validate();
      cell.runs = runs;

      std::vector<double> success, queries, words;
      for (std::size_t r = 0; r < runs; ++r) {
        const std::uint64_t seed = options.seeds[r] + options.seed_offset;
        const auto results = attack_all(dataset, spec, victim, store, regime, cell.search, goal,
                                        seed, options.threads);
        RunMetrics m = aggregate_run(results, seed);
        success.push_back(m.success_rate_pct);
        queries.push_back(m.avg_queries);
        if (!m.no_successes) words.push_back(m.pct_words_changed);
        cell.victim_errors += m.victim_errors;
        cell.rows.push_back(m);
      }
      cell.skipped = cell.rows.front().skipped;
      cell.success_rate_pct = summarize(success);
      cell.avg_queries = summarize(queries);
      cell.pct_words_changed = summarize(words);
      cell.no_successes = words.empty();
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

std::string format_mean_std(const Summary& s, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*f±%.*f", decimals, s.mean, decimals, s.std);
  return buf;
}

namespace {

json search_json(const SearchConfig& s) {
  json j = {{"n_samples", s.n_samples},     {"max_updates", s.max_updates},
            {"step_scale", s.step_scale},   {"pool_factor", s.pool_factor},
            {"ranking", mode_name(s.ranking)}};
  j["query_budget"] = s.query_budget ? json(*s.query_budget) : json(nullptr);
  return j;
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

std::string render_json(const BenchmarkReport& report) {
  json doc;
  doc["dataset_size"] = report.dataset_size;
  doc["goal"] = {{"kind", report.goal.kind == GoalKind::kZoo ? "zoo" : "textattack"},
                 {"kappa", report.goal.kappa},
                 {"epsilon", report.goal.epsilon}};
  doc["conventions"] = {
      {"avg_queries", "mean over attacked examples, including the initial prediction and "
                      "importance-ranking queries"},
      {"pct_words_changed", "mean over successful attacks of 100 * changed / length"},
      {"success_rate_pct", "successes / attacked; already-misclassified examples are skipped"},
      {"std", "population standard deviation over runs"},
  };
  json results = json::array();
  for (const auto& cell : report.cells) {
    json rows = json::array();
    for (const auto& m : cell.rows) {
      rows.push_back({{"seed", m.seed},
                      {"examples", m.examples},
                      {"attacked", m.attacked},
                      {"skipped", m.skipped},
                      {"successes", m.successes},
                      {"victim_errors", m.victim_errors},
                      {"total_queries", m.total_queries},
                      {"success_rate_pct", m.success_rate_pct},
                      {"avg_queries", m.avg_queries},
                      {"pct_words_changed", m.pct_words_changed},
                      {"no_successes", m.no_successes}});
    }
    results.push_back({{"attack", cell.attack},
                       {"kind", cell.kind},
                       {"regime", cell.regime},
                       {"search", search_json(cell.search)},
                       {"runs", cell.runs},
                       {"skipped", cell.skipped},
                       {"success_rate_pct", summary_json(cell.success_rate_pct)},
                       {"avg_queries", summary_json(cell.avg_queries)},
                       {"pct_words_changed", summary_json(cell.pct_words_changed)},
                       {"no_successes", cell.no_successes},
                       {"victim_errors", cell.victim_errors},
                       {"rows", std::move(rows)}});
  }
  doc["results"] = std::move(results);
  return doc.dump(2) + "\n";
}

// Display width in code points.
std::size_t width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++w;
  }
  return w;
}

std::string render_table(const BenchmarkReport& report) {
  const std::vector<std::string> header = {"Attack",          "Regime", "Success%",
                                           "Avg # Queries",   "% Words Changed",
                                           "Runs",            "Skipped"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& cell : report.cells) {
    std::string words = format_mean_std(cell.pct_words_changed);
    if (cell.no_successes) words += " (no successes)";
    rows.push_back({cell.attack, cell.regime, format_mean_std(cell.success_rate_pct),
                    format_mean_std(cell.avg_queries), words, std::to_string(cell.runs),
                    std::to_string(cell.skipped)});
  }
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = width(header[c]);
    for (const auto& row : rows) widths[c] = std::max(widths[c], width(row[c]));
  }
  auto emit = [&](std::ostringstream& out, const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(widths[c] - width(row[c]), ' ');
      if (c > 0) out << "  ";
      // Text columns flush left, numbers flush right.
      if (c < 2) {
        out << row[c] << (c + 1 < row.size() ? pad : "");
      } else {
        out << pad << row[c];
      }
    }
    out << '\n';
  };
  std::ostringstream out;
  emit(out, header);
  for (const auto& row : rows) emit(out, row);
  return out.str();
}

}  // namespace

std::string render_report(const BenchmarkReport& report, ReportFormat format) {
  return format == ReportFormat::kJson ? render_json(report) : render_table(report);
}

std::string analyze_embeddings(const EmbeddingStore& store, std::span<const double> thresholds) {
  std::string out;
  for (double threshold : thresholds) {
    const NeighborhoodStats stats = neighborhood_stats(store, threshold);
    json histogram = json::array();
    for (const auto& [neighbors, tokens] : stats.histogram) histogram.push_back({neighbors, tokens});
    json record = {{"threshold", stats.threshold},
                   {"vocab_size", stats.vocab_size},
                   {"mean_neighbors", stats.mean_neighbors},
                   {"mean_neighbors_nonzero", stats.mean_neighbors_nonzero},
                   {"histogram", std::move(histogram)}};
    out += record.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad \"" + key + "\": " + e.what());
  }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return get<T>(obj, key, where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

ProbabilityVector probs_from(const json& j, const std::string& where) {
  try {
    return ProbabilityVector::from(j.get<std::vector<double>>());
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

VictimSpec parse_victim(const json& v, std::size_t num_classes) {
  const std::string where = "victim";
  if (!v.is_object()) throw ConfigError("victim must be an object");
  VictimSpec spec;
  const auto kind = get<std::string>(v, "kind", where);
  if (kind == "bag") {
    check_keys(v, {"kind", "weights", "bias", "synthetic"}, where);
    spec.kind = VictimSpec::Kind::kBag;
    if (v.contains("synthetic")) {
      const auto& s = v["synthetic"];
      check_keys(s, {"seed", "scale"}, "victim.synthetic");
      spec.synthetic_seed = get<std::uint64_t>(s, "seed", "victim.synthetic");
      spec.synthetic_scale = get_opt<double>(s, "scale", "victim.synthetic").value_or(8.0);
      if (num_classes != 2) throw ConfigError("victim.synthetic supports 2 classes only");
    } else {
      const auto w = get<std::vector<std::vector<double>>>(v, "weights", where);
      if (w.empty() || w.front().empty()) throw ConfigError("victim: empty weights");
      spec.weights.resize(static_cast<Eigen::Index>(w.size()),
                          static_cast<Eigen::Index>(w.front().size()));
      for (std::size_t r = 0; r < w.size(); ++r) {
        if (w[r].size() != w.front().size()) throw ConfigError("victim: ragged weights");
        for (std::size_t c = 0; c < w[r].size(); ++c) {
          spec.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r][c];
        }
      }
      const auto b = get_opt<std::vector<double>>(v, "bias", where)
                         .value_or(std::vector<double>(w.size(), 0.0));
      spec.bias = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
      if (w.size() != num_classes) throw ConfigError("victim: weights rows != num_classes");
    }
  } else if (kind == "scripted") {
    check_keys(v, {"kind", "table", "default"}, where);
    spec.kind = VictimSpec::Kind::kScripted;
    spec.fallback = v.contains("default") ? probs_from(v["default"], "victim.default")
                                          : ProbabilityVector::uniform(num_classes);
    if (v.contains("table")) {
      for (const auto& entry : v["table"]) {
        spec.table.emplace(get<Tokens>(entry, "tokens", "victim.table"),
                           probs_from(entry.at("probs"), "victim.table"));
      }
    }
  } else if (kind == "remote") {
    check_keys(v, {"kind", "endpoint", "timeout_ms", "retries"}, where);
    spec.kind = VictimSpec::Kind::kRemote;
    spec.remote.endpoint = get<std::string>(v, "endpoint", where);
    spec.remote.num_classes = num_classes;
    spec.remote.timeout =
        std::chrono::milliseconds(get_opt<std::int64_t>(v, "timeout_ms", where).value_or(5000));
    spec.remote.retries = get_opt<std::size_t>(v, "retries", where).value_or(2);
  } else {
    throw ConfigError("victim: unknown kind '" + kind + "'");
  }
  return spec;
}

AttackSpec parse_attack(const json& a) {
  if (!a.is_object()) throw ConfigError("attacks: entries must be objects");
  check_keys(a, {"name", "kind", "search", "width", "mode", "runs"}, "attack");
  AttackSpec spec;
  spec.kind = parse_attack_kind(get<std::string>(a, "kind", "attack"));
  spec.name = get_opt<std::string>(a, "name", "attack").value_or(std::string(to_string(spec.kind)));
  const std::string where = "attack '" + spec.name + "'";
  spec.beam_width = get_opt<std::size_t>(a, "width", where).value_or(4);
  if (auto mode = get_opt<std::string>(a, "mode", where)) spec.wir_mode = parse_mode(*mode);
  spec.runs = get_opt<std::size_t>(a, "runs", where);
  if (a.contains("search")) {
    const auto& s = a["search"];
    check_keys(s, {"n_samples", "max_updates", "step_scale", "pool_factor", "query_budget",
                   "ranking"},
               where + ".search");
    spec.search.n_samples = get_opt<std::size_t>(s, "n_samples", where);
    spec.search.max_updates = get_opt<std::size_t>(s, "max_updates", where);
    spec.search.step_scale = get_opt<double>(s, "step_scale", where);
    spec.search.pool_factor = get_opt<std::size_t>(s, "pool_factor", where);
    spec.search.query_budget = get_opt<std::size_t>(s, "query_budget", where);
    if (auto r = get_opt<std::string>(s, "ranking", where)) spec.search.ranking = parse_mode(*r);
  }
  return spec;
}

}  // namespace

HarnessConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid json: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a json object");
  check_keys(doc,
             {"embeddings", "dataset", "stopwords", "num_classes", "victim", "goal", "attacks",
              "regimes", "seeds", "runs", "threads", "output", "analysis_thresholds"},
             "config");
  HarnessConfig config;
  config.embeddings = resolve(base_dir, get<std::string>(doc, "embeddings", "config"));
  if (auto d = get_opt<std::string>(doc, "dataset", "config")) config.dataset = resolve(base_dir, *d);
  if (auto s = get_opt<std::string>(doc, "stopwords", "config")) {
    config.stopwords = resolve(base_dir, *s);
  }
  config.num_classes = get_opt<std::size_t>(doc, "num_classes", "config").value_or(2);
  if (config.num_classes < 2) throw ConfigError("config: num_classes must be >= 2");
  if (doc.contains("victim")) config.victim = parse_victim(doc["victim"], config.num_classes);

  if (doc.contains("goal")) {
    const auto& g = doc["goal"];
    check_keys(g, {"kind", "kappa", "epsilon"}, "goal");
    const auto kind = get_opt<std::string>(g, "kind", "goal").value_or("zoo");
    if (kind == "zoo") {
      config.goal.kind = GoalKind::kZoo;
    } else if (kind == "textattack") {
      config.goal.kind = GoalKind::kTextAttack;
    } else {
      throw ConfigError("goal: unknown kind '" + kind + "'");
    }
    config.goal.kappa = get_opt<double>(g, "kappa", "goal").value_or(0.0);
    config.goal.epsilon = get_opt<double>(g, "epsilon", "goal").value_or(1e-12);
  }
  try {
    config.goal.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (doc.contains("attacks")) {
    for (const auto& a : doc["attacks"]) config.attacks.push_back(parse_attack(a));
  }
  config.regimes = get_opt<std::vector<std::string>>(doc, "regimes", "config")
                       .value_or(std::vector<std::string>{"constrained", "unconstrained"});
  for (const auto& r : config.regimes) {
    if (r != "constrained" && r != "lax" && r != "unconstrained") {
      throw ConfigError("config: unknown regime '" + r + "'");
    }
  }
  if (auto seeds = get_opt<std::vector<std::uint64_t>>(doc, "seeds", "config")) {
    config.options.seeds = *seeds;
  }
  config.options.runs_per_attack = get_opt<std::size_t>(doc, "runs", "config").value_or(1);
  config.options.threads = get_opt<std::size_t>(doc, "threads", "config").value_or(1);
  if (config.options.seeds.size() < config.options.runs_per_attack) {
    throw ConfigError("config: fewer seeds than runs");
  }
  for (const auto& spec : config.attacks) {
    if (spec.runs && *spec.runs > config.options.seeds.size()) {
      throw ConfigError("attack '" + spec.name + "': fewer seeds than runs");
    }
  }
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    check_keys(o, {"report", "analysis"}, "output");
    if (auto p = get_opt<std::string>(o, "report", "output")) config.report_path = resolve(base_dir, *p);
    if (auto p = get_opt<std::string>(o, "analysis", "output")) {
      config.analysis_path = resolve(base_dir, *p);
    }
  }
  if (auto t = get_opt<std::vector<double>>(doc, "analysis_thresholds", "config")) {
    for (double x : *t) {
      if (!(x > -1.0 && x <= 1.0)) throw ConfigError("config: analysis threshold outside (-1, 1]");
    }
    config.analysis_thresholds = *t;
  }
  return config;
}

HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

std::shared_ptr<const Victim> build_victim(const VictimSpec& spec, std::size_t num_classes,
                                           std::shared_ptr<const EmbeddingStore> store) {
  switch (spec.kind) {
    case VictimSpec::Kind::kBag: {
      if (!store) throw ConfigError("bag victim needs an embedding store");
      try {
        if (spec.synthetic_seed) {
          BagWeights w = make_synthetic_bag_weights(store->dim(), spec.synthetic_scale,
                                                    *spec.synthetic_seed);
          return make_bag_victim(std::move(store), std::move(w.weights), std::move(w.bias));
        }
        return make_bag_victim(std::move(store), spec.weights, spec.bias);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    case VictimSpec::Kind::kScripted: {
      ProbabilityVector fallback = spec.fallback.value_or(ProbabilityVector::uniform(num_classes));
      if (fallback.size() != num_classes) throw ConfigError("scripted victim: class count mismatch");
      try {
        return make_scripted_victim(spec.table, std::move(fallback));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    case VictimSpec::Kind::kRemote: {
      RemoteVictimOptions options = spec.remote;
      options.num_classes = num_classes;
      try {
        return make_remote_victim(std::move(options));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  throw ConfigError("unknown victim kind");
}

std::vector<ConstraintConfig> build_regimes(const HarnessConfig& config) {
  std::set<std::string> stopwords = default_stopwords();
  if (config.stopwords) {
    std::ifstream in(*config.stopwords);
    if (!in) throw ConfigError("cannot open stopwords " + config.stopwords->string());
    stopwords = parse_stopwords(in);
  }
  std::vector<ConstraintConfig> regimes;
  for (const auto& name : config.regimes) regimes.push_back(regime_config(name, stopwords));
  return regimes;
}

}  // namespace dzoo
