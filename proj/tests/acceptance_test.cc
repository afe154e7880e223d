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

// Acceptance suite. Prints one PASS, FAIL or SKIP line per criterion and
// exits nonzero if any criterion fails.
//
//   DZOO_COUNTER_FITTED_PATH  counter-fitted vector file for criterion 2

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dzoo/constraints.h"
#include "dzoo/embedding.h"
#include "dzoo/harness.h"
#include "dzoo/search.h"
#include "dzoo/synthetic.h"
#include "dzoo/victim.h"
#include "json.hpp"
#include "search_fixtures.h"
#include "test_support.h"

namespace dzoo {
namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

struct Verdict {
  enum Kind { kPass, kFail, kSkip } kind;
  std::string detail;
};

Verdict pass(std::string d) { return {Verdict::kPass, std::move(d)}; }
Verdict fail(std::string d) { return {Verdict::kFail, std::move(d)}; }
Verdict verdict(bool ok, std::string d) { return ok ? pass(std::move(d)) : fail(std::move(d)); }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::vector<double> row_of(const EmbeddingStore& s, TokenId id) {
  std::vector<double> v(static_cast<std::size_t>(s.dim()));
  for (int j = 0; j < s.dim(); ++j) v[static_cast<std::size_t>(j)] = s.row(id)[j];
  return v;
}

// ---------------------------------------------------------------------------
// 1. kNN against a brute-force scan

Verdict knn_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20260101);
  std::normal_distribution<double> normal;
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t V = 2 + gen() % 199;
    const int d = 1 + static_cast<int>(gen() % 16);
    std::vector<testing::Row> rows;
    for (std::size_t i = 0; i < V; ++i) {
      std::vector<double> v(static_cast<std::size_t>(d));
      const auto kind = gen() % 20;
      if (kind == 0) {
        std::fill(v.begin(), v.end(), 0.0);
      } else if (kind == 1 && i > 0) {
        v = rows[gen() % i].second;
      } else {
        for (double& x : v) x = normal(gen);
      }
      rows.push_back({"t" + std::to_string(i), v});
    }
    const EmbeddingStore store = testing::make_store(rows);
    for (int q = 0; q < 20; ++q) {
      std::vector<double> query(static_cast<std::size_t>(d));
      for (double& x : query) x = normal(gen);
      const std::size_t k = 1 + gen() % V;
      // Oracle: plain loop over every row, skipping zero rows, sorted by
      // descending cosine then ascending id.
      std::vector<std::pair<double, TokenId>> all;
      for (std::size_t i = 0; i < V; ++i) {
        double nn = 0.0;
        for (double x : rows[i].second) nn += x * x;
        if (std::sqrt(nn) < kMinNorm) continue;
        all.push_back({testing::naive_cosine(rows[i].second, query), static_cast<TokenId>(i)});
      }
      std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      all.resize(std::min(k, all.size()));
      const NeighborList got =
          knn(store, Eigen::Map<const Vector>(query.data(), d), k);
      if (got.size() != all.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].id != all[i].second) ++mismatches;
        worst = std::max(worst, std::abs(got[i].similarity - all[i].first));
      }
    }
  }
  const double secs = seconds_since(t0);
  return verdict(mismatches == 0 && worst <= 1e-9 && secs < 10.0,
                 fmt("2000 queries, %zu id mismatches, max |dsim| %.2e, %.2f s", mismatches,
                     worst, secs));
}

// ---------------------------------------------------------------------------
// 2. Neighborhood sparsity of the counter-fitted vectors

Verdict counter_fitted_sparsity() {
  const char* path = std::getenv("DZOO_COUNTER_FITTED_PATH");
  if (!path || !std::filesystem::exists(path)) {
    std::cerr << "warning: DZOO_COUNTER_FITTED_PATH unset or missing; criterion 2 skipped\n";
    return {Verdict::kSkip, "counter-fitted vector file not available"};
  }
  const auto t0 = Clock::now();
  const EmbeddingStore store = load_embeddings_file(path);
  const NeighborhoodStats s = neighborhood_stats(store, 0.9);
  const double secs = seconds_since(t0);
  const bool ok = s.vocab_size == 65713 && s.mean_neighbors >= 0.70 && s.mean_neighbors <= 0.74 &&
                  s.mean_neighbors_nonzero >= 2.55 && s.mean_neighbors_nonzero <= 2.70 &&
                  secs < 600.0;
  return verdict(ok, fmt("vocab %zu, mean %.4f, nonzero mean %.4f, %.1f s", s.vocab_size,
                         s.mean_neighbors, s.mean_neighbors_nonzero, secs));
}

// ---------------------------------------------------------------------------
// 3. Goal-function numerics

Verdict goal_numerics() {
  std::mt19937_64 gen(33);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_ta = 0.0, worst_zoo = 0.0;
  std::size_t below_floor = 0, boundary_bad = 0, two_class = 0;
  const double eps = 1e-12;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t C = 2 + gen() % 4;
    std::vector<double> p(C);
    double sum = 0.0;
    for (double& x : p) {
      x = gen() % 10 == 0 ? 0.0 : expo(gen);
      sum += x;
    }
    if (sum == 0.0) {
      p[0] = 1.0;
      sum = 1.0;
    }
    for (double& x : p) x /= sum;
    const ProbabilityVector probs = ProbabilityVector::from(p);
    const std::size_t label = gen() % C;
    const double kappa = gen() % 4 == 0 ? 0.0 : 5.0 * unit(gen);

    worst_ta = std::max(worst_ta, std::abs(goal_textattack(probs, label) - (1.0 - p[label])));
    // Direct form: -max(log f_l - max_{l' != l} log f_l', -kappa) on clamped
    // probabilities, written as a log ratio.
    double other = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      if (j != label) other = std::max(other, std::max(p[j], eps));
    }
    const double direct = -std::max(std::log(std::max(p[label], eps) / other), -kappa);
    const double zoo = goal_zoo(probs, label, kappa, eps);
    worst_zoo = std::max(worst_zoo, std::abs(zoo - direct));
    if (zoo < -kappa) ++below_floor;

    if (C == 2) {
      ++two_class;
      const bool flipped = probs.argmax() != label;
      const bool ta = goal_textattack(probs, label) > 0.5;
      const bool z = goal_zoo(probs, label, kappa > 0.0 ? kappa : 1.0, eps) > 0.0;
      if (flipped != ta || ta != z) ++boundary_bad;
    }
  }
  const bool ok = worst_ta <= 1e-9 && worst_zoo <= 1e-9 && below_floor == 0 && boundary_bad == 0;
  return verdict(ok, fmt("1000 vectors, max err textattack %.1e zoo %.1e, %zu below -kappa, "
                         "%zu/%zu two-class boundary disagreements",
                         worst_ta, worst_zoo, below_floor, boundary_bad, two_class));
}

// ---------------------------------------------------------------------------
// 4. Query accounting on hand-built instances

struct Probe {
  const Victim& victim;
  const EmbeddingStore& store;
  ConstraintConfig regime;
  GoalConfig goal = testing::kTextAttackGoal;
  QueryLedger ledger{};
  AttackContext ctx() { return AttackContext{victim, ledger, store, regime, goal}; }
};

Verdict query_accounting() {
  std::vector<std::string> bad;
  {
    const testing::PairedChain chain;
    const auto victim = testing::PairedChain::victim(false);
    Probe p{*victim, chain.store, chain.regime};
    Rng rng(1);
    const auto out = random_attack(chain.sentence, 0, p.ctx(), rng);
    if (out.queries != 5 || p.ledger.count() != 5) bad.push_back("random |T|=4: " + std::to_string(out.queries));
  }
  {
    const testing::PairedChain chain;
    const auto victim = testing::PairedChain::victim(true);
    for (std::size_t b = 1; b <= 8; ++b) {
      Probe p{*victim, chain.store, chain.regime};
      Rng rng(b);
      const auto out = random_cs_attack(chain.sentence, 0, p.ctx(), b, rng);
      if (out.queries != std::min<std::size_t>(b, 4) + 1) {
        bad.push_back("random_cs b=" + std::to_string(b) + ": " + std::to_string(out.queries));
      }
    }
  }
  {
    // Candidates in descending cosine a, b, c; the k-th one flips.
    const EmbeddingStore store = testing::make_store({{"s", testing::unit_at(0)},
                                                      {"a", testing::unit_at(5)},
                                                      {"b", testing::unit_at(10)},
                                                      {"c", testing::unit_at(15)}});
    const std::string names[] = {"a", "b", "c"};
    for (std::size_t k = 1; k <= 3; ++k) {
      const auto victim = make_scripted_victim({{{names[k - 1]}, testing::two_class(0.8)}},
                                               testing::two_class(0.2));
      Probe p{*victim, store, regime_config("constrained", {})};
      SearchConfig config = testing::LinearPlane::search(1.0);
      config.n_samples = 3;
      const auto out = discretezoo_attack(Sentence({"s"}), 0, p.ctx(), config);
      if (out.queries != 1 + k || !out.success) {
        bad.push_back("discretezoo flip at " + std::to_string(k) + ": " +
                      std::to_string(out.queries));
      }
    }
  }
  std::string detail = "random 5; random_cs b=1..8; discretezoo early return k=1..3";
  for (const auto& b : bad) detail += "; mismatch " + b;
  return verdict(bad.empty(), detail);
}

// ---------------------------------------------------------------------------
// 5. One DiscreteZOO step against a hand computation

Verdict discretezoo_step() {
  const testing::LinearPlane plane;
  std::vector<std::string> bad;
  const auto sumd = testing::hand_sumd(plane, {"a", "b"});
  const std::string big = testing::hand_snap(plane, {1.0 + sumd[0], sumd[1]});
  const std::string small = testing::hand_snap(plane, {1.0 + 0.25 * sumd[0], 0.25 * sumd[1]});

  // The library's own direction for the same candidates.
  const GoalConfig goal = testing::kTextAttackGoal;
  {
    const auto victim = plane.victim();
    QueryLedger ledger;
    const double base = query(*victim, ledger, {"s"}, 0, goal).score;
    Vector dir = Vector::Zero(2);
    for (const char* c : {"a", "b"}) {
      const TokenId id = *plane.store.find(c);
      const double l = query(*victim, ledger, {c}, 0, goal).score;
      const auto d = make_displacement(plane.store, 0, id, l - base);
      dir += d->weight * d->direction;
    }
    if (std::abs(dir[0] - sumd[0]) > 1e-12 || std::abs(dir[1] - sumd[1]) > 1e-12) {
      bad.push_back("sumd");
    }
    const TokenId snapped = snap(plane.store, plane.store.row(0).transpose() + dir);
    if (plane.store.token(snapped) != big) bad.push_back("snap target");
  }
  auto run = [&](double gamma, std::optional<double> override_c) {
    const auto victim = plane.victim(override_c);
    QueryLedger ledger;
    const ConstraintConfig regime = testing::open_regime();
    return discretezoo_attack(Sentence({"s"}), 0,
                              AttackContext{*victim, ledger, plane.store, regime, goal},
                              testing::LinearPlane::search(gamma));
  };
  const auto accept = run(1.0, std::nullopt);
  if (big != "c" || accept.final_sentence.tokens() != Tokens{"c"} || !accept.success) {
    bad.push_back("accept into c");
  }
  const auto partial = run(0.25, std::nullopt);
  if (small != "a" || partial.final_sentence.tokens() != Tokens{"a"}) bad.push_back("accept into a");
  const auto reject = run(1.0, 0.1);
  if (reject.final_sentence.tokens() != Tokens{"s"} || !reject.trace.empty()) {
    bad.push_back("snap rejection");
  }
  std::string detail = fmt("sumd (%.3f, %.3f), snap %s, small-step snap %s", sumd[0], sumd[1],
                           big.c_str(), small.c_str());
  for (const auto& b : bad) detail += "; mismatch " + b;
  return verdict(bad.empty(), detail);
}

// ---------------------------------------------------------------------------
// Synthetic world shared by criteria 6, 7 and 9; same recipe as `dzoo synth`.

struct World {
  std::filesystem::path dir;
  HarnessConfig config;
  std::shared_ptr<const EmbeddingStore> store;
  std::shared_ptr<const Victim> victim;
  std::vector<ExampleRecord> data;
  std::vector<ConstraintConfig> regimes;
};

World make_world() {
  World w;
  w.dir = std::filesystem::temp_directory_path() / "dzoo_acceptance";
  std::filesystem::create_directories(w.dir);
  const std::uint64_t seed = 1;
  SyntheticStoreOptions so;
  so.seed = seed;
  const EmbeddingStore store = make_synthetic_store(so);
  const BagWeights bw = make_synthetic_bag_weights(store.dim(), 8.0, seed + 1);
  const auto victim =
      make_bag_victim(std::make_shared<const EmbeddingStore>(store), bw.weights, bw.bias);
  SyntheticDatasetOptions d;
  d.examples = 200;
  d.seed = seed + 2;
  const auto data = make_synthetic_dataset(store, *victim, d);
  {
    std::ofstream out(w.dir / "embeddings.txt", std::ios::binary);
    write_embeddings(out, store);
  }
  {
    std::ofstream out(w.dir / "dataset.jsonl", std::ios::binary);
    write_dataset(out, data);
  }
  const json config = {
      {"embeddings", "embeddings.txt"},
      {"dataset", "dataset.jsonl"},
      {"num_classes", 2},
      {"victim", {{"kind", "bag"}, {"synthetic", {{"seed", seed + 1}, {"scale", 8.0}}}}},
      {"attacks",
       {{{"kind", "discretezoo"}},
        {{"kind", "random"}},
        {{"kind", "random_cs"}},
        {{"kind", "farthest"}},
        {{"kind", "closest"}},
        {{"kind", "greedy"}},
        {{"name", "wir_unk"}, {"kind", "wir"}, {"mode", "unk"}}}},
      {"regimes", {"constrained", "unconstrained"}},
      {"seeds", {1, 2, 3, 4, 5, 6, 7}},
      {"runs", 7},
      {"threads", 4},
  };
  std::ofstream(w.dir / "config.json") << config.dump(2);

  w.config = load_config(w.dir / "config.json");
  w.store = std::make_shared<const EmbeddingStore>(load_embeddings_file(w.config.embeddings));
  w.victim = build_victim(w.config.victim, w.config.num_classes, w.store);
  w.data = load_dataset_file(w.config.dataset, w.config.num_classes);
  w.regimes = build_regimes(w.config);
  return w;
}

// ---------------------------------------------------------------------------
// 6. Monotonicity and soundness sweep

Verdict monotonicity_sweep(const World& w) {
  const auto t0 = Clock::now();
  const AttackKind kinds[] = {AttackKind::kDiscreteZoo, AttackKind::kRandom,
                              AttackKind::kRandomCs, AttackKind::kFarthest,
                              AttackKind::kClosest};
  std::size_t attacks = 0, non_monotone = 0, unsound = 0, length = 0, after_flip = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const ExampleRecord& ex = w.data[i];
    for (std::size_t k = 0; k < 5; ++k) {
      const ConstraintConfig& regime = w.regimes[(i + k) % 2];
      AttackSpec spec;
      spec.kind = kinds[k];
      const SearchConfig search = default_search_config(regime);
      QueryLedger ledger(QueryLedger::Options{.memoize = true, .hard_cap = {}, .record_events = true});
      const Sentence sentence(ex.tokens);
      const GoalConfig goal = w.config.goal;
      const AttackContext ctx{*w.victim, ledger, *w.store, regime, goal};
      const GoalFunctionResult initial = query(*w.victim, ledger, ex.tokens, ex.label, goal);
      if (initial.flipped) continue;
      const AttackOutcome out = run_attack(spec, sentence, ex.label, ctx, search, mix_seed(i, k));
      ++attacks;

      double prev = initial.score;
      for (const TraceStep& step : out.trace) {
        if (step.score < prev) ++non_monotone;
        prev = step.score;
        if (regime.cosine_threshold) {
          const auto orig = w.store->find(ex.tokens[step.position]);
          const auto next = w.store->find(step.new_token);
          const double c = testing::naive_cosine(row_of(*w.store, *orig), row_of(*w.store, *next));
          if (c < *regime.cosine_threshold - 1e-12 ||
              regime.stopwords.contains(ex.tokens[step.position])) {
            ++unsound;
          }
        }
      }
      if (out.final_sentence.size() != ex.tokens.size()) ++length;
      bool flipped_seen = false;
      for (const QueryEvent& e : ledger.events()) {
        if (flipped_seen) {
          ++after_flip;
          break;
        }
        if (e.tokens.size() != ex.tokens.size()) ++length;
        if (e.tag == QueryTag::kSearch && e.result.flipped) flipped_seen = true;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = attacks >= 450 && non_monotone == 0 && unsound == 0 && length == 0 &&
                  after_flip == 0 && secs < 120.0;
  return verdict(ok, fmt("%zu attacks: %zu non-monotone, %zu unsound, %zu length changes, "
                         "%zu queries after flip, %.1f s",
                         attacks, non_monotone, unsound, length, after_flip, secs));
}

// ---------------------------------------------------------------------------
// 7. Directional orderings on the synthetic benchmark

Verdict directional_echo(const BenchmarkReport& report) {
  std::map<std::pair<std::string, std::string>, const CellReport*> cell;
  for (const auto& c : report.cells) cell[{c.attack, c.regime}] = &c;
  std::vector<std::string> bad;
  std::string detail;
  for (const auto& c : report.cells) {
    if (c.regime != "constrained") continue;
    const CellReport* u = cell.at({c.attack, "unconstrained"});
    detail += fmt("%s %.1f<%.1f; ", c.attack.c_str(), c.success_rate_pct.mean,
                  u->success_rate_pct.mean);
    if (!(u->success_rate_pct.mean > c.success_rate_pct.mean)) bad.push_back(c.attack + " regimes");
  }
  for (const char* regime : {"constrained", "unconstrained"}) {
    const CellReport* rcs = cell.at({"random_cs", regime});
    const CellReport* rnd = cell.at({"random", regime});
    if (!(rcs->success_rate_pct.mean >= rnd->success_rate_pct.mean)) {
      bad.push_back(std::string("random_cs<random ") + regime);
    }
    const CellReport* far = cell.at({"farthest", regime});
    const CellReport* close = cell.at({"closest", regime});
    std::size_t wins = 0;
    for (std::size_t r = 0; r < far->rows.size(); ++r) {
      wins += far->rows[r].success_rate_pct >= close->rows[r].success_rate_pct;
    }
    detail += fmt("%s: random_cs %.1f vs random %.1f, farthest>=closest %zu/%zu; ", regime,
                  rcs->success_rate_pct.mean, rnd->success_rate_pct.mean, wins, far->rows.size());
    if (far->rows.size() != 7 || wins < 6) bad.push_back(std::string("farthest/closest ") + regime);
  }
  for (const auto& b : bad) detail += "failed " + b + "; ";
  if (!detail.empty()) detail.resize(detail.size() - 2);
  return verdict(bad.empty(), detail);
}

// ---------------------------------------------------------------------------
// 8. Gaussian two-point estimator direction

Verdict gaussian_direction() {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  Rng rng(88);
  const auto f = [](const Vector& x) { return x.squaredNorm(); };
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    Vector x(8);
    for (int j = 0; j < 8; ++j) x[j] = normal(gen);
    const Vector step = x - gaussian_two_point_step(f, x, 1e-3, 2000, 1.0, rng);
    const Vector grad = 2.0 * x;
    const double c = step.dot(grad) / (step.norm() * grad.norm());
    worst = std::max(worst, std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / 3.14159265358979323846);
  }
  return verdict(worst < 15.0, fmt("20 points, worst angle %.2f deg", worst));
}

// ---------------------------------------------------------------------------
// 9. Determinism

Verdict determinism(const World& w, const std::string& first) {
  BenchmarkOptions again = w.config.options;
  const std::string second = render_report(
      run_benchmark(w.data, *w.victim, *w.store, w.config.attacks, w.regimes, w.config.goal, again),
      ReportFormat::kJson);
  BenchmarkOptions serial = w.config.options;
  serial.threads = 1;
  const std::string third = render_report(
      run_benchmark(w.data, *w.victim, *w.store, w.config.attacks, w.regimes, w.config.goal,
                    serial),
      ReportFormat::kJson);
  return verdict(first == second && first == third,
                 fmt("rerun %s, serial vs %zu threads %s (%zu bytes)",
                     first == second ? "identical" : "differs", w.config.options.threads,
                     first == third ? "identical" : "differs", first.size()));
}

int main_impl() {
  int failed = 0;
  auto report = [&](int n, const Verdict& v) {
    const char* tag = v.kind == Verdict::kPass ? "PASS" : v.kind == Verdict::kFail ? "FAIL" : "SKIP";
    if (v.kind == Verdict::kFail) ++failed;
    std::cout << tag << " criterion " << n << ": " << v.detail << std::endl;
  };
  auto guarded = [&](int n, const std::function<Verdict()>& fn) {
    try {
      report(n, fn());
    } catch (const std::exception& e) {
      report(n, fail(std::string("exception: ") + e.what()));
    }
  };

  guarded(1, knn_oracle);
  guarded(2, counter_fitted_sparsity);
  guarded(3, goal_numerics);
  guarded(4, query_accounting);
  guarded(5, discretezoo_step);

  std::optional<World> world;
  std::string first_report;
  std::optional<BenchmarkReport> bench;
  try {
    world = make_world();
  } catch (const std::exception& e) {
    std::cerr << "synthetic world: " << e.what() << "\n";
  }
  auto need_world = [&]() -> const World& {
    if (!world) throw std::runtime_error("synthetic world unavailable");
    return *world;
  };
  guarded(6, [&] { return monotonicity_sweep(need_world()); });
  guarded(7, [&] {
    const World& w = need_world();
    bench = run_benchmark(w.data, *w.victim, *w.store, w.config.attacks, w.regimes, w.config.goal,
                          w.config.options);
    first_report = render_report(*bench, ReportFormat::kJson);
    std::cout << render_report(*bench, ReportFormat::kTable);
    return directional_echo(*bench);
  });
  guarded(8, gaussian_direction);
  guarded(9, [&] {
    if (!bench) throw std::runtime_error("no benchmark report from criterion 7");
    return determinism(need_world(), first_report);
  });
  if (world) std::filesystem::remove_all(world->dir);
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace dzoo

int main() { return dzoo::main_impl(); }
