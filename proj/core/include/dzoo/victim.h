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

#ifndef DZOO_VICTIM_H_
#define DZOO_VICTIM_H_

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dzoo/embedding.h"

namespace dzoo {

using Tokens = std::vector<std::string>;

// A class-probability vector with at least two entries, each in [0, 1],
// summing to one.
class ProbabilityVector {
 public:
  // Throws std::invalid_argument when the invariants fail at `tolerance`.
  static ProbabilityVector from(std::vector<double> probs, double tolerance = 1e-6);
  static ProbabilityVector uniform(std::size_t classes);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const { return probs_; }

  // Lowest index wins ties.
  std::size_t argmax() const;

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  explicit ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::vector<double> probs_;
};

// Token sequence that remembers the example it was derived from. Length is
// fixed; only substitutions are expressible.
class Sentence {
 public:
  explicit Sentence(Tokens tokens);

  const Tokens& tokens() const { return tokens_; }
  const Tokens& original() const { return *original_; }
  std::size_t size() const { return tokens_.size(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  // Positions whose token differs from the original.
  const std::set<std::size_t>& modified_positions() const { return modified_; }
  std::size_t words_changed() const { return modified_.size(); }

  Sentence substituted(std::size_t position, std::string token) const;

 private:
  Tokens tokens_;
  std::shared_ptr<const Tokens> original_;
  std::set<std::size_t> modified_;
};

enum class GoalKind { kTextAttack, kZoo };

struct GoalConfig {
  GoalKind kind = GoalKind::kZoo;
  double kappa = 0.0;
  double epsilon = 1e-12;

  void validate() const;
};

struct GoalFunctionResult {
  double score = 0.0;
  std::size_t predicted_label = 0;
  bool flipped = false;

  friend bool operator==(const GoalFunctionResult&, const GoalFunctionResult&) = default;
};

// 1 - p_l.
double goal_textattack(const ProbabilityVector& probs, std::size_t label);
// -max(log p_l - max_{l' != l} log p_l', -kappa) on probabilities clamped to
// >= epsilon.
double goal_zoo(const ProbabilityVector& probs, std::size_t label, double kappa,
                double epsilon = 1e-12);
GoalFunctionResult evaluate_goal(const ProbabilityVector& probs, std::size_t label,
                                 const GoalConfig& goal);

class VictimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// Network failure after all retries.
class VictimUnavailable : public VictimError {
 public:
  using VictimError::VictimError;
};
// Malformed or non-200 reply.
class ProtocolError : public VictimError {
 public:
  using VictimError::VictimError;
};
// The ledger's hard cap was reached. Not a victim failure.
class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Black-box classifier. Implementations must tolerate concurrent calls.
class Victim {
 public:
  virtual ~Victim() = default;
  virtual std::size_t num_classes() const = 0;
  virtual ProbabilityVector classify(const Tokens& tokens) const = 0;
};

// softmax(W * mean(in-vocabulary embeddings) + bias). Out-of-vocabulary
// tokens contribute the zero vector.
std::shared_ptr<const Victim> make_bag_victim(std::shared_ptr<const EmbeddingStore> store,
                                              Eigen::MatrixXd weights, Vector bias);

std::shared_ptr<const Victim> make_scripted_victim(std::map<Tokens, ProbabilityVector> table,
                                                   ProbabilityVector fallback);

enum class QueryTag { kSearch, kRanking };

struct QueryEvent {
  Tokens tokens;
  GoalFunctionResult result;
  bool charged = false;
  QueryTag tag = QueryTag::kSearch;
};

// Per-attack query accounting. count() grows once per distinct token
// sequence; memo hits are free. Single owner; not thread safe.
class QueryLedger {
 public:
  struct Options {
    bool memoize = true;
    std::optional<std::size_t> hard_cap;
    bool record_events = false;
  };

  QueryLedger() = default;
  explicit QueryLedger(Options options) : options_(options) {}

  std::size_t count() const { return count_; }
  const Options& options() const { return options_; }
  const std::vector<QueryEvent>& events() const { return events_; }

  void set_tag(QueryTag tag) { tag_ = tag; }
  QueryTag tag() const { return tag_; }

 private:
  friend GoalFunctionResult query(const Victim&, QueryLedger&, const Tokens&, std::size_t,
                                  const GoalConfig&);

  Options options_;
  std::size_t count_ = 0;
  std::map<Tokens, std::pair<ProbabilityVector, GoalFunctionResult>> memo_;
  std::vector<QueryEvent> events_;
  QueryTag tag_ = QueryTag::kSearch;
};

// Evaluates the goal on `tokens`, consulting the memo first. Throws
// BudgetExhausted when a charged query would exceed the hard cap; victim
// errors propagate unchanged.
GoalFunctionResult query(const Victim& victim, QueryLedger& ledger, const Tokens& tokens,
                         std::size_t true_label, const GoalConfig& goal);

// Restores the previous tag on scope exit.
class ScopedQueryTag {
 public:
  ScopedQueryTag(QueryLedger& ledger, QueryTag tag) : ledger_(ledger), saved_(ledger.tag()) {
    ledger_.set_tag(tag);
  }
  ~ScopedQueryTag() { ledger_.set_tag(saved_); }
  ScopedQueryTag(const ScopedQueryTag&) = delete;
  ScopedQueryTag& operator=(const ScopedQueryTag&) = delete;

 private:
  QueryLedger& ledger_;
  QueryTag saved_;
};

}  // namespace dzoo

#endif  // DZOO_VICTIM_H_
