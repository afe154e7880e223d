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

// Desk-scale stand-ins for real embeddings, victims and datasets.

#ifndef DZOO_SYNTHETIC_H_
#define DZOO_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dzoo/embedding.h"
#include "dzoo/harness.h"
#include "dzoo/victim.h"

namespace dzoo {

// Tokens come in small clusters of near-synonyms around random directions,
// so a 0.9 cosine neighbourhood is sparse while the 50-nearest pool is not.
struct SyntheticStoreOptions {
  std::size_t clusters = 600;
  std::size_t max_cluster_size = 6;
  int dim = 16;
  double min_noise = 0.02;
  double max_noise = 0.10;
  std::vector<std::string> stopwords{"the", "a", "of", "and", "is"};
  std::uint64_t seed = 1;
};

EmbeddingStore make_synthetic_store(const SyntheticStoreOptions& options);

struct BagWeights {
  Eigen::MatrixXd weights;
  Vector bias;
};

// Two-class weights [w; -w] with |w| = scale and zero bias.
BagWeights make_synthetic_bag_weights(int dim, double scale, std::uint64_t seed);

struct SyntheticDatasetOptions {
  std::size_t examples = 200;
  std::size_t min_length = 5;
  std::size_t max_length = 12;
  double stopword_rate = 0.15;
  // Fraction of records whose label disagrees with the victim.
  double mislabel_rate = 0.05;
  std::uint64_t seed = 2;
};

// Labels follow the victim's own prediction except for the mislabelled
// fraction, which exercises skip accounting.
std::vector<ExampleRecord> make_synthetic_dataset(const EmbeddingStore& store, const Victim& victim,
                                                  const SyntheticDatasetOptions& options);

// Writes the store in the loader's text format with round-trip precision.
void write_embeddings(std::ostream& out, const EmbeddingStore& store);

}  // namespace dzoo

#endif  // DZOO_SYNTHETIC_H_
