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

#include "dzoo/constraints.h"

#include <algorithm>
#include <istream>
#include <sstream>

namespace dzoo {

namespace internal {
extern const std::string_view kPackagedStopwords;
}  // namespace internal

void ConstraintConfig::validate() const {
  if (candidate_pool_size < 1) {
    throw std::invalid_argument("constraints: candidate_pool_size must be >= 1");
  }
  if (cosine_threshold && !(*cosine_threshold > 0.0 && *cosine_threshold <= 1.0)) {
    throw std::invalid_argument("constraints: cosine_threshold must be in (0, 1]");
  }
  if (bertscore_threshold) {
    throw ConstraintNotImplemented("constraints: BERTScore is not implemented");
  }
  if (require_same_part_of_speech) {
    throw ConstraintNotImplemented("constraints: part-of-speech matching is not implemented");
  }
}

ConstraintConfig regime_config(std::string_view name, const std::set<std::string>& stopwords) {
  ConstraintConfig config;
  config.regime_name = std::string(name);
  if (name == "constrained") {
    config.cosine_threshold = kConstrainedCosine;
    config.stopwords = stopwords;
  } else if (name == "lax") {
    config.cosine_threshold = kLaxCosine;
    config.stopwords = stopwords;
  } else if (name != "unconstrained") {
    throw std::invalid_argument("unknown constraint regime '" + std::string(name) + "'");
  }
  return config;
}

std::set<std::string> parse_stopwords(std::istream& source) {
  std::set<std::string> words;
  std::string line;
  while (std::getline(source, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    words.insert(line.substr(first, last - first + 1));
  }
  return words;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = [] {
    std::istringstream in{std::string(internal::kPackagedStopwords)};
    return parse_stopwords(in);
  }();
  return words;
}

TargetIndexList pretransform_filter(const Sentence& sentence, const ConstraintConfig& config,
                                    const std::set<std::size_t>& already_modified) {
  TargetIndexList targets;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (config.stopwords.contains(sentence[i])) continue;
    if (!config.allow_repeat_modification && already_modified.contains(i)) continue;
    targets.push_back(i);
  }
  return targets;
}

NeighborList candidate_pool(const EmbeddingStore& store, TokenId token,
                            const ConstraintConfig& config) {
  NeighborList pool = knn_of_token(store, token, config.candidate_pool_size);
  if (config.cosine_threshold) {
    const double threshold = *config.cosine_threshold;
    std::erase_if(pool, [threshold](const Neighbor& n) { return n.similarity < threshold; });
  }
  return pool;
}

bool admissible(const EmbeddingStore& store, TokenId original, TokenId replacement,
                const ConstraintConfig& config) {
  if (!config.cosine_threshold) return true;
  if (original == replacement) return true;
  return cosine(store, original, replacement) >= *config.cosine_threshold;
}

}  // namespace dzoo
