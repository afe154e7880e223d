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

#ifndef DZOO_SEARCH_H_
#define DZOO_SEARCH_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dzoo/constraints.h"
#include "dzoo/embedding.h"
#include "dzoo/rng.h"
#include "dzoo/victim.h"

namespace dzoo {

// Reserved mask token for importance ranking. Passed to the victim verbatim.
inline constexpr std::string_view kUnkToken = "[UNK]";

// Query budget for continued sampling when none is configured.
inline constexpr std::size_t kDefaultContinuedSamplingBudget = 50;

enum class ImportanceMode { kUnk, kDel, kRand };

struct SearchConfig {
  std::size_t n_samples = 10;    // displacements per step
  std::size_t max_updates = 2;   // steps per position
  double step_scale = 1.0;       // multiplies the summed displacement
  std::size_t pool_factor = 2;   // unconstrained kNN pool is pool_factor * n_samples
  std::optional<std::size_t> query_budget;
  std::uint64_t rng_seed = 0;
  ImportanceMode ranking = ImportanceMode::kUnk;

  void validate() const;
};

// 10 samples under a cosine threshold, 25 without.
SearchConfig default_search_config(const ConstraintConfig& constraints);

enum class AttackStatus { kSuccess, kExhausted, kBudget, kSkipped, kVictimError };
std::string_view to_string(AttackStatus status);

// One applied substitution and the goal score of the resulting sentence.
struct TraceStep {
  std::size_t position = 0;
  std::string old_token;
  std::string new_token;
  double score = 0.0;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct AttackOutcome {
  bool success = false;
  Sentence final_sentence;
  std::size_t queries = 0;
  std::size_t words_changed = 0;
  std::vector<TraceStep> trace;
  AttackStatus status = AttackStatus::kExhausted;
  std::string error;
};

// Everything an attack reads or charges. The ledger is owned by one attack.
struct AttackContext {
  const Victim& victim;
  QueryLedger& ledger;
  const EmbeddingStore& store;
  const ConstraintConfig& constraints;
  const GoalConfig& goal;
};

// Finite-difference displacement from token t towards neighbour k.
struct Displacement {
  Vector direction;  // unit vector (e_k - e_t) / |e_k - e_t|
  double magnitude;  // |e_k - e_t|
  double weight;     // (l_k - l) / magnitude
};

// Returns nullopt when the two embeddings coincide.
std::optional<Displacement> make_displacement(const EmbeddingStore& store, TokenId from,
                                              TokenId to, double score_delta);

// Pretransform-filtered positions whose token has an embedding.
TargetIndexList attack_targets(const Sentence& sentence, const ConstraintConfig& constraints,
                               const EmbeddingStore& store);

// unk/del: one query per target, descending by goal score, ties by position.
// rand: seeded shuffle, no queries.
TargetIndexList importance_order(const Sentence& sentence, const TargetIndexList& targets,
                                 std::size_t true_label, const AttackContext& ctx,
                                 ImportanceMode mode, Rng& rng);

AttackOutcome discretezoo_attack(const Sentence& sentence, std::size_t true_label,
                                 const AttackContext& ctx, const SearchConfig& config);

// One pass over shuffled targets, one uniform candidate per position.
AttackOutcome random_attack(const Sentence& sentence, std::size_t true_label,
                            const AttackContext& ctx, Rng& rng);

// Cycles over shuffled targets until a flip or `budget` charged queries after
// the initial one. Repeat modification is always allowed here.
AttackOutcome random_cs_attack(const Sentence& sentence, std::size_t true_label,
                               const AttackContext& ctx, std::size_t budget, Rng& rng);

enum class ExtremalMode { kFarthest, kClosest };

// As random_attack but takes the least (farthest) or most (closest) similar
// pool entry. rng only shuffles the visiting order.
AttackOutcome extremal_attack(const Sentence& sentence, std::size_t true_label,
                              const AttackContext& ctx, ExtremalMode mode, Rng& rng);

// Tries every pool candidate at each position of `order`, keeps the best if it
// does not lower the goal.
AttackOutcome greedy_attack(const Sentence& sentence, std::size_t true_label,
                            const AttackContext& ctx, const TargetIndexList& order);

struct BeamOptions {
  std::size_t width = 4;
  // Expand only the next position of `targets` per level; a member that
  // finds no improving child survives with that position consumed.
  bool positional = false;
};

using FrontierObserver = std::function<void(std::span<const Sentence>)>;

AttackOutcome beam_attack(const Sentence& sentence, std::size_t true_label,
                          const AttackContext& ctx, const TargetIndexList& targets,
                          const BeamOptions& options, const FrontierObserver& observer = {});

// x - lambda * (1/n) * sum_i (f(x + mu u_i) - f(x)) / mu * u_i with standard
// normal u_i.
Vector gaussian_two_point_step(const std::function<double(const Vector&)>& f, const Vector& x,
                               double mu, std::size_t n, double lambda, Rng& rng);

}  // namespace dzoo

#endif  // DZOO_SEARCH_H_
