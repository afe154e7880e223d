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

#ifndef DZOO_CONSTRAINTS_H_
#define DZOO_CONSTRAINTS_H_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dzoo/embedding.h"
#include "dzoo/victim.h"

namespace dzoo {

inline constexpr std::size_t kDefaultCandidatePoolSize = 50;
inline constexpr double kConstrainedCosine = 0.9;
inline constexpr double kLaxCosine = 0.7;

// Requested a constraint that needs an external neural model.
class ConstraintNotImplemented : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ConstraintConfig {
  std::string regime_name = "unconstrained";
  std::optional<double> cosine_threshold;
  bool allow_repeat_modification = false;
  std::set<std::string> stopwords;
  std::size_t candidate_pool_size = kDefaultCandidatePoolSize;

  // Extension slots. Setting either makes validate() throw
  // ConstraintNotImplemented.
  std::optional<double> bertscore_threshold;
  bool require_same_part_of_speech = false;

  void validate() const;
};

// "constrained" (0.9), "lax" (0.7) or "unconstrained". Stopwords apply to the
// first two only. Throws std::invalid_argument for unknown names.
ConstraintConfig regime_config(std::string_view name, const std::set<std::string>& stopwords);

// One token per line; blank lines and '#' comments ignored.
std::set<std::string> parse_stopwords(std::istream& source);
const std::set<std::string>& default_stopwords();

// Ordered attack positions.
using TargetIndexList = std::vector<std::size_t>;

// Drops stopword positions, and already-modified positions unless repeats
// are allowed. Sentence order is kept.
TargetIndexList pretransform_filter(const Sentence& sentence, const ConstraintConfig& config,
                                    const std::set<std::size_t>& already_modified = {});

// candidate_pool_size nearest neighbours of `token`, then threshold filter.
NeighborList candidate_pool(const EmbeddingStore& store, TokenId token,
                            const ConstraintConfig& config);

// Whether `replacement` may stand in for `original` under the regime.
bool admissible(const EmbeddingStore& store, TokenId original, TokenId replacement,
                const ConstraintConfig& config);

}  // namespace dzoo

#endif  // DZOO_CONSTRAINTS_H_
