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

#include "dzoo/victim.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dzoo {

ProbabilityVector ProbabilityVector::from(std::vector<double> probs, double tolerance) {
  if (probs.size() < 2) {
    throw std::invalid_argument("probability vector needs at least 2 classes");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      std::ostringstream msg;
      msg << "probability " << p << " outside [0, 1]";
      throw std::invalid_argument(msg.str());
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    std::ostringstream msg;
    msg << "probabilities sum " << sum;
    throw std::invalid_argument(msg.str());
  }
  return ProbabilityVector(std::move(probs));
}

ProbabilityVector ProbabilityVector::uniform(std::size_t classes) {
  if (classes < 2) throw std::invalid_argument("probability vector needs at least 2 classes");
  return ProbabilityVector(std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
}

std::size_t ProbabilityVector::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs_.size(); ++i) {
    if (probs_[i] > probs_[best]) best = i;
  }
  return best;
}

Sentence::Sentence(Tokens tokens)
    : tokens_(std::move(tokens)), original_(std::make_shared<const Tokens>(tokens_)) {
  if (tokens_.empty()) throw std::invalid_argument("sentence must have at least one token");
}

Sentence Sentence::substituted(std::size_t position, std::string token) const {
  if (position >= tokens_.size()) throw std::out_of_range("substitution position out of range");
  Sentence next = *this;
  if (token == (*original_)[position]) {
    next.modified_.erase(position);
  } else {
    next.modified_.insert(position);
  }
  next.tokens_[position] = std::move(token);
  return next;
}

void GoalConfig::validate() const {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw std::invalid_argument("goal: kappa must be a finite non-negative real");
  }
  if (!(epsilon > 0.0 && epsilon <= 1e-6)) {
    throw std::invalid_argument("goal: epsilon must be in (0, 1e-6]");
  }
}

double goal_textattack(const ProbabilityVector& probs, std::size_t label) {
  if (label >= probs.size()) throw std::out_of_range("label out of range");
  return 1.0 - probs[label];
}

double goal_zoo(const ProbabilityVector& probs, std::size_t label, double kappa,
                double epsilon) {
  if (label >= probs.size()) throw std::out_of_range("label out of range");
  const double own = std::log(std::max(probs[label], epsilon));
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (i == label) continue;
    other = std::max(other, std::log(std::max(probs[i], epsilon)));
  }
  return -std::max(own - other, -kappa);
}

GoalFunctionResult evaluate_goal(const ProbabilityVector& probs, std::size_t label,
                                 const GoalConfig& goal) {
  GoalFunctionResult result;
  result.score = goal.kind == GoalKind::kTextAttack
                     ? goal_textattack(probs, label)
                     : goal_zoo(probs, label, goal.kappa, goal.epsilon);
  result.predicted_label = probs.argmax();
  result.flipped = result.predicted_label != label;
  return result;
}

namespace {

class BagVictim final : public Victim {
 public:
  BagVictim(std::shared_ptr<const EmbeddingStore> store, Eigen::MatrixXd weights, Vector bias)
      : store_(std::move(store)), weights_(std::move(weights)), bias_(std::move(bias)) {
    if (!store_) throw std::invalid_argument("bag victim: null embedding store");
    if (weights_.cols() != store_->dim()) {
      throw std::invalid_argument("bag victim: weight rows have dimension " +
                                  std::to_string(weights_.cols()) + ", store has " +
                                  std::to_string(store_->dim()));
    }
    if (weights_.rows() < 2) throw std::invalid_argument("bag victim: need at least 2 classes");
    if (bias_.size() != weights_.rows()) {
      throw std::invalid_argument("bag victim: bias length does not match class count");
    }
  }

  std::size_t num_classes() const override { return static_cast<std::size_t>(weights_.rows()); }

  ProbabilityVector classify(const Tokens& tokens) const override {
    Vector mean = Vector::Zero(store_->dim());
    for (const auto& token : tokens) {
      if (auto id = store_->find(token)) mean += store_->row(*id).transpose();
    }
    if (!tokens.empty()) mean /= static_cast<double>(tokens.size());
    Vector logits = weights_ * mean + bias_;
    logits.array() -= logits.maxCoeff();
    Vector e = logits.array().exp();
    e /= e.sum();
    return ProbabilityVector::from(std::vector<double>(e.data(), e.data() + e.size()), 1e-9);
  }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  Eigen::MatrixXd weights_;
  Vector bias_;
};

class ScriptedVictim final : public Victim {
 public:
  ScriptedVictim(std::map<Tokens, ProbabilityVector> table, ProbabilityVector fallback)
      : table_(std::move(table)), fallback_(std::move(fallback)) {
    for (const auto& [tokens, probs] : table_) {
      if (probs.size() != fallback_.size()) {
        throw std::invalid_argument("scripted victim: inconsistent class counts");
      }
    }
  }

  std::size_t num_classes() const override { return fallback_.size(); }

  ProbabilityVector classify(const Tokens& tokens) const override {
    auto it = table_.find(tokens);
    return it == table_.end() ? fallback_ : it->second;
  }

 private:
  std::map<Tokens, ProbabilityVector> table_;
  ProbabilityVector fallback_;
};

}  // namespace

std::shared_ptr<const Victim> make_bag_victim(std::shared_ptr<const EmbeddingStore> store,
                                              Eigen::MatrixXd weights, Vector bias) {
  return std::make_shared<BagVictim>(std::move(store), std::move(weights), std::move(bias));
}

std::shared_ptr<const Victim> make_scripted_victim(std::map<Tokens, ProbabilityVector> table,
                                                   ProbabilityVector fallback) {
  return std::make_shared<ScriptedVictim>(std::move(table), std::move(fallback));
}

GoalFunctionResult query(const Victim& victim, QueryLedger& ledger, const Tokens& tokens,
                         std::size_t true_label, const GoalConfig& goal) {
  if (true_label >= victim.num_classes()) throw std::out_of_range("true label out of range");
  if (ledger.options_.memoize) {
    if (auto it = ledger.memo_.find(tokens); it != ledger.memo_.end()) {
      if (ledger.options_.record_events) {
        ledger.events_.push_back({tokens, it->second.second, false, ledger.tag_});
      }
      return it->second.second;
    }
  }
  if (ledger.options_.hard_cap && ledger.count_ >= *ledger.options_.hard_cap) {
    throw BudgetExhausted("query budget of " + std::to_string(*ledger.options_.hard_cap) +
                          " exhausted");
  }
  ProbabilityVector probs = victim.classify(tokens);
  if (probs.size() != victim.num_classes()) {
    throw ProtocolError("victim returned " + std::to_string(probs.size()) + " classes, expected " +
                        std::to_string(victim.num_classes()));
  }
  ++ledger.count_;
  GoalFunctionResult result = evaluate_goal(probs, true_label, goal);
  if (ledger.options_.record_events) {
    ledger.events_.push_back({tokens, result, true, ledger.tag_});
  }
  if (ledger.options_.memoize) ledger.memo_.emplace(tokens, std::make_pair(std::move(probs), result));
  return result;
}

}  // namespace dzoo
