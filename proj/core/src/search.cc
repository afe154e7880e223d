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

#include "dzoo/search.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace dzoo {

void SearchConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("search: n_samples must be >= 1");
  if (max_updates < 1) throw std::invalid_argument("search: max_updates must be >= 1");
  if (!(step_scale > 0.0) || !std::isfinite(step_scale)) {
    throw std::invalid_argument("search: step_scale must be > 0");
  }
  if (pool_factor < 1) throw std::invalid_argument("search: pool_factor must be >= 1");
  if (query_budget && *query_budget < 1) {
    throw std::invalid_argument("search: query_budget must be >= 1");
  }
}

SearchConfig default_search_config(const ConstraintConfig& constraints) {
  SearchConfig config;
  config.n_samples = constraints.cosine_threshold ? 10 : 25;
  return config;
}

std::string_view to_string(AttackStatus status) {
  switch (status) {
    case AttackStatus::kSuccess: return "success";
    case AttackStatus::kExhausted: return "exhausted";
    case AttackStatus::kBudget: return "budget";
    case AttackStatus::kSkipped: return "skipped";
    case AttackStatus::kVictimError: return "victim_error";
  }
  return "unknown";
}

std::optional<Displacement> make_displacement(const EmbeddingStore& store, TokenId from,
                                              TokenId to, double score_delta) {
  Vector diff = (store.row(to) - store.row(from)).transpose();
  const double magnitude = diff.norm();
  if (magnitude < kMinNorm) return std::nullopt;
  return Displacement{diff / magnitude, magnitude, score_delta / magnitude};
}

TargetIndexList attack_targets(const Sentence& sentence, const ConstraintConfig& constraints,
                               const EmbeddingStore& store) {
  TargetIndexList targets = pretransform_filter(sentence, constraints);
  std::erase_if(targets, [&](std::size_t i) { return !store.contains(sentence[i]); });
  return targets;
}

TargetIndexList importance_order(const Sentence& sentence, const TargetIndexList& targets,
                                 std::size_t true_label, const AttackContext& ctx,
                                 ImportanceMode mode, Rng& rng) {
  TargetIndexList order = targets;
  if (mode == ImportanceMode::kRand) {
    rng.shuffle(order);
    return order;
  }
  ScopedQueryTag tag(ctx.ledger, QueryTag::kRanking);
  std::vector<double> scores;
  scores.reserve(order.size());
  for (std::size_t position : order) {
    Tokens probe = sentence.tokens();
    if (mode == ImportanceMode::kUnk) {
      probe[position] = std::string(kUnkToken);
    } else if (probe.size() > 1) {
      probe.erase(probe.begin() + static_cast<std::ptrdiff_t>(position));
    }
    scores.push_back(query(ctx.victim, ctx.ledger, probe, true_label, ctx.goal).score);
  }
  std::vector<std::size_t> idx(order.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return order[a] < order[b];
  });
  TargetIndexList ranked;
  ranked.reserve(idx.size());
  for (std::size_t i : idx) ranked.push_back(order[i]);
  return ranked;
}

namespace {

// Mutable attack state shared by every algorithm. Exceptions from the ledger
// or victim are converted to terminal statuses in run().
class AttackRun {
 public:
  AttackRun(const Sentence& sentence, std::size_t true_label, const AttackContext& ctx)
      : ctx_(ctx), label_(true_label), current_(sentence) {}

  const AttackContext& ctx() const { return ctx_; }
  std::size_t label() const { return label_; }
  const Sentence& current() const { return current_; }
  const GoalFunctionResult& result() const { return result_; }
  double score() const { return result_.score; }

  GoalFunctionResult evaluate(const Sentence& s) {
    return query(ctx_.victim, ctx_.ledger, s.tokens(), label_, ctx_.goal);
  }

  // Initial prediction. Returns false if the input is already misclassified.
  bool start() {
    result_ = evaluate(current_);
    return !result_.flipped;
  }

  void accept(Sentence next, const GoalFunctionResult& r, std::size_t position) {
    trace_.push_back({position, current_[position], next[position], r.score});
    current_ = std::move(next);
    result_ = r;
  }

  // Offers a candidate under the keep-if-not-worse rule. Returns true when
  // the attack should stop because the accepted sentence flips the label.
  bool offer(Sentence candidate, std::size_t position) {
    const GoalFunctionResult r = evaluate(candidate);
    if (r.score >= result_.score) accept(std::move(candidate), r, position);
    return result_.flipped;
  }

  TokenId token_id(std::size_t position) const { return *ctx_.store.find(current_[position]); }
  TokenId original_id(std::size_t position) const {
    return *ctx_.store.find(current_.original()[position]);
  }

  void set_trace(std::vector<TraceStep> trace) { trace_ = std::move(trace); }
  void set_state(Sentence s, const GoalFunctionResult& r) {
    current_ = std::move(s);
    result_ = r;
  }

  template <typename Body>
  AttackOutcome run(Body&& body) {
    AttackStatus status;
    std::string error;
    try {
      status = body();
    } catch (const BudgetExhausted& e) {
      status = AttackStatus::kBudget;
      error = e.what();
    } catch (const VictimError& e) {
      status = AttackStatus::kVictimError;
      error = e.what();
    }
    AttackOutcome out{.final_sentence = current_, .trace = {}, .error = {}};
    out.success = result_.flipped && status != AttackStatus::kVictimError;
    if (status == AttackStatus::kExhausted && out.success) status = AttackStatus::kSuccess;
    out.queries = ctx_.ledger.count();
    out.words_changed = current_.words_changed();
    out.trace = std::move(trace_);
    out.status = status;
    out.error = std::move(error);
    return out;
  }

 private:
  const AttackContext& ctx_;
  std::size_t label_;
  Sentence current_;
  GoalFunctionResult result_;
  std::vector<TraceStep> trace_;
};

NeighborList admissible_pool(const AttackRun& run, std::size_t position) {
  const auto& store = run.ctx().store;
  NeighborList pool = candidate_pool(store, run.token_id(position), run.ctx().constraints);
  const TokenId original = run.original_id(position);
  std::erase_if(pool, [&](const Neighbor& n) {
    return !admissible(store, original, n.id, run.ctx().constraints);
  });
  return pool;
}

template <typename Picker>
AttackOutcome single_pass(const Sentence& sentence, std::size_t true_label,
                          const AttackContext& ctx, Rng& rng, Picker pick) {
  AttackRun run(sentence, true_label, ctx);
  return run.run([&] {
    if (!run.start()) return AttackStatus::kSkipped;
    TargetIndexList order = attack_targets(sentence, ctx.constraints, ctx.store);
    if (order.empty()) return AttackStatus::kSkipped;
    rng.shuffle(order);
    for (std::size_t position : order) {
      const NeighborList pool = admissible_pool(run, position);
      if (pool.empty()) continue;
      const TokenId choice = pick(pool);
      if (run.offer(run.current().substituted(position, ctx.store.token(choice)), position)) {
        return AttackStatus::kSuccess;
      }
    }
    return AttackStatus::kExhausted;
  });
}

}  // namespace

AttackOutcome discretezoo_attack(const Sentence& sentence, std::size_t true_label,
                                 const AttackContext& ctx, const SearchConfig& config) {
  config.validate();
  Rng rng(config.rng_seed);
  const auto& store = ctx.store;
  const auto& constraints = ctx.constraints;
  AttackRun run(sentence, true_label, ctx);
  return run.run([&] {
    if (!run.start()) return AttackStatus::kSkipped;
    const TargetIndexList targets = attack_targets(sentence, constraints, store);
    if (targets.empty()) return AttackStatus::kSkipped;
    const TargetIndexList order =
        importance_order(sentence, targets, true_label, ctx, config.ranking, rng);

    for (std::size_t position : order) {
      const TokenId original = run.original_id(position);
      for (std::size_t step = 0; step < config.max_updates; ++step) {
        // A position that already holds a substitution is consumed unless
        // repeats are allowed.
        if (!constraints.allow_repeat_modification &&
            run.current().modified_positions().contains(position)) {
          break;
        }
        const TokenId current_id = run.token_id(position);

        std::vector<TokenId> candidates;
        if (constraints.cosine_threshold) {
          for (const Neighbor& n : admissible_pool(run, position)) {
            if (candidates.size() == config.n_samples) break;
            candidates.push_back(n.id);
          }
        } else {
          const NeighborList pool =
              knn_of_token(store, current_id, config.pool_factor * config.n_samples);
          for (std::size_t i : rng.sample_without_replacement(pool.size(), config.n_samples)) {
            candidates.push_back(pool[i].id);
          }
        }
        if (candidates.empty()) break;

        const double base = run.evaluate(run.current()).score;
        Vector direction = Vector::Zero(store.dim());
        for (TokenId c : candidates) {
          Sentence probe = run.current().substituted(position, store.token(c));
          const GoalFunctionResult r = run.evaluate(probe);
          if (r.flipped) {
            run.accept(std::move(probe), r, position);
            return AttackStatus::kSuccess;
          }
          if (auto d = make_displacement(store, current_id, c, r.score - base)) {
            direction += d->weight * d->direction;
          }
        }

        const Vector target = store.row(current_id).transpose() + config.step_scale * direction;
        TokenId snapped;
        try {
          snapped = snap(store, target);
        } catch (const std::domain_error&) {
          continue;
        }
        if (snapped == current_id) continue;
        if (!admissible(store, original, snapped, constraints)) continue;
        if (run.offer(run.current().substituted(position, store.token(snapped)), position)) {
          return AttackStatus::kSuccess;
        }
      }
    }
    return AttackStatus::kExhausted;
  });
}

AttackOutcome random_attack(const Sentence& sentence, std::size_t true_label,
                            const AttackContext& ctx, Rng& rng) {
  return single_pass(sentence, true_label, ctx, rng, [&rng](const NeighborList& pool) {
    return pool[rng.uniform_index(pool.size())].id;
  });
}

AttackOutcome extremal_attack(const Sentence& sentence, std::size_t true_label,
                              const AttackContext& ctx, ExtremalMode mode, Rng& rng) {
  return single_pass(sentence, true_label, ctx, rng, [mode](const NeighborList& pool) {
    return mode == ExtremalMode::kClosest ? pool.front().id : pool.back().id;
  });
}

AttackOutcome random_cs_attack(const Sentence& sentence, std::size_t true_label,
                               const AttackContext& ctx, std::size_t budget, Rng& rng) {
  if (budget < 1) throw std::invalid_argument("random_cs_attack: budget must be >= 1");
  ConstraintConfig constraints = ctx.constraints;
  constraints.allow_repeat_modification = true;
  const AttackContext local{ctx.victim, ctx.ledger, ctx.store, constraints, ctx.goal};

  AttackRun run(sentence, true_label, local);
  return run.run([&] {
    if (!run.start()) return AttackStatus::kSkipped;
    TargetIndexList order = attack_targets(sentence, constraints, ctx.store);
    if (order.empty()) return AttackStatus::kSkipped;
    rng.shuffle(order);

    const std::size_t base = ctx.ledger.count();
    // Memo hits cost nothing, so bound the number of draws as well.
    const std::size_t max_draws = budget * 20;
    std::size_t draws = 0;
    std::size_t barren = 0;
    std::map<std::pair<std::size_t, TokenId>, NeighborList> pools;
    for (std::size_t ci = 0; ctx.ledger.count() - base < budget; ++ci) {
      const std::size_t position = order[ci % order.size()];
      const auto key = std::make_pair(position, run.token_id(position));
      auto it = pools.find(key);
      if (it == pools.end()) it = pools.emplace(key, admissible_pool(run, position)).first;
      const NeighborList& pool = it->second;
      if (pool.empty()) {
        if (++barren >= order.size()) return AttackStatus::kExhausted;
        continue;
      }
      barren = 0;
      if (draws++ >= max_draws) return AttackStatus::kExhausted;
      const TokenId choice = pool[rng.uniform_index(pool.size())].id;
      if (run.offer(run.current().substituted(position, ctx.store.token(choice)), position)) {
        return AttackStatus::kSuccess;
      }
    }
    return AttackStatus::kBudget;
  });
}

AttackOutcome greedy_attack(const Sentence& sentence, std::size_t true_label,
                            const AttackContext& ctx, const TargetIndexList& order) {
  AttackRun run(sentence, true_label, ctx);
  return run.run([&] {
    if (!run.start()) return AttackStatus::kSkipped;
    bool any = false;
    for (std::size_t position : order) {
      if (position >= sentence.size() || !ctx.store.contains(sentence[position])) continue;
      any = true;
      std::optional<Sentence> best;
      GoalFunctionResult best_result;
      for (const Neighbor& n : admissible_pool(run, position)) {
        Sentence probe = run.current().substituted(position, ctx.store.token(n.id));
        const GoalFunctionResult r = run.evaluate(probe);
        if (r.flipped) {
          run.accept(std::move(probe), r, position);
          return AttackStatus::kSuccess;
        }
        if (!best || r.score > best_result.score) {
          best = std::move(probe);
          best_result = r;
        }
      }
      if (best && best_result.score >= run.score()) run.accept(std::move(*best), best_result, position);
    }
    return any ? AttackStatus::kExhausted : AttackStatus::kSkipped;
  });
}

AttackOutcome beam_attack(const Sentence& sentence, std::size_t true_label,
                          const AttackContext& ctx, const TargetIndexList& targets,
                          const BeamOptions& options, const FrontierObserver& observer) {
  if (options.width < 1) throw std::invalid_argument("beam_attack: width must be >= 1");
  struct Member {
    Sentence sentence;
    GoalFunctionResult result;
    std::vector<bool> consumed;
    std::vector<TraceStep> trace;
  };

  TargetIndexList usable;
  for (std::size_t p : targets) {
    if (p < sentence.size() && ctx.store.contains(sentence[p])) usable.push_back(p);
  }

  AttackRun run(sentence, true_label, ctx);
  std::vector<Member> beam;
  auto adopt = [&](const Member& m) {
    run.set_state(m.sentence, m.result);
    run.set_trace(m.trace);
  };

  return run.run([&] {
    if (!run.start()) return AttackStatus::kSkipped;
    if (usable.empty()) return AttackStatus::kSkipped;
    beam.push_back({sentence, run.result(), std::vector<bool>(usable.size(), false), {}});

    for (std::size_t level = 0;; ++level) {
      if (options.positional && level >= usable.size()) break;
      std::vector<Member> children;
      std::set<Tokens> seen;
      for (const Member& member : beam) {
        bool improved = false;
        for (std::size_t pi = 0; pi < usable.size(); ++pi) {
          if (options.positional && pi != level) continue;
          if (member.consumed[pi]) continue;
          const std::size_t position = usable[pi];
          run.set_state(member.sentence, member.result);
          for (const Neighbor& n : admissible_pool(run, position)) {
            Sentence probe = member.sentence.substituted(position, ctx.store.token(n.id));
            const GoalFunctionResult r = run.evaluate(probe);
            Member child{probe, r, member.consumed, member.trace};
            child.consumed[pi] = true;
            child.trace.push_back({position, member.sentence[position], probe[position], r.score});
            if (r.flipped) {
              adopt(child);
              return AttackStatus::kSuccess;
            }
            if (r.score < member.result.score) continue;
            if (!seen.insert(probe.tokens()).second) continue;
            improved = true;
            children.push_back(std::move(child));
          }
        }
        if (options.positional && !improved) {
          Member stay = member;
          stay.consumed[level] = true;
          if (seen.insert(stay.sentence.tokens()).second) children.push_back(std::move(stay));
        }
      }
      if (children.empty()) break;
      std::stable_sort(children.begin(), children.end(), [](const Member& a, const Member& b) {
        return a.result.score > b.result.score;
      });
      if (children.size() > options.width) {
        children.erase(children.begin() + static_cast<std::ptrdiff_t>(options.width),
                       children.end());
      }
      beam = std::move(children);
      adopt(beam.front());
      if (observer) {
        std::vector<Sentence> frontier;
        for (const Member& m : beam) frontier.push_back(m.sentence);
        observer(frontier);
      }
    }
    adopt(beam.front());
    return AttackStatus::kExhausted;
  });
}

Vector gaussian_two_point_step(const std::function<double(const Vector&)>& f, const Vector& x,
                               double mu, std::size_t n, double lambda, Rng& rng) {
  if (!(mu > 0.0)) throw std::invalid_argument("gaussian_two_point_step: mu must be > 0");
  if (n < 1) throw std::invalid_argument("gaussian_two_point_step: n must be >= 1");
  const double fx = f(x);
  Vector sum = Vector::Zero(x.size());
  Vector u(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = rng.normal();
    sum += (f(x + mu * u) - fx) / mu * u;
  }
  return x - lambda * sum / static_cast<double>(n);
}

}  // namespace dzoo
