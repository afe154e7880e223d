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

#include "dzoo/synthetic.h"

#include <charconv>
#include <ostream>

#include "dzoo/rng.h"

namespace dzoo {

namespace {

Vector random_unit(Rng& rng, int dim) {
  Vector v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  } while (v.norm() < 1e-6);
  return v / v.norm();
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng.next() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace

EmbeddingStore make_synthetic_store(const SyntheticStoreOptions& options) {
  if (options.dim < 1) throw std::invalid_argument("synthetic store: dim must be >= 1");
  if (options.max_cluster_size < 1) {
    throw std::invalid_argument("synthetic store: max_cluster_size must be >= 1");
  }
  Rng rng(options.seed);
  std::vector<std::string> tokens;
  std::vector<Vector> rows;
  for (const auto& word : options.stopwords) {
    tokens.push_back(word);
    rows.push_back(random_unit(rng, options.dim));
  }
  for (std::size_t c = 0; c < options.clusters; ++c) {
    const Vector center = random_unit(rng, options.dim);
    const std::size_t size = 1 + rng.uniform_index(options.max_cluster_size);
    const double noise =
        options.min_noise + (options.max_noise - options.min_noise) * uniform01(rng);
    for (std::size_t m = 0; m < size; ++m) {
      Vector v = center;
      for (int i = 0; i < options.dim; ++i) v[i] += noise * rng.normal();
      // Lengths vary so cosine and Euclidean geometry disagree a little.
      v *= 0.5 + uniform01(rng);
      tokens.push_back("c" + std::to_string(c) + "_" + std::to_string(m));
      rows.push_back(std::move(v));
    }
  }
  RowMatrix matrix(static_cast<Eigen::Index>(rows.size()), options.dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    matrix.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return EmbeddingStore(std::move(tokens), std::move(matrix));
}

BagWeights make_synthetic_bag_weights(int dim, double scale, std::uint64_t seed) {
  Rng rng(seed);
  const Vector w = scale * random_unit(rng, dim);
  BagWeights out;
  out.weights.resize(2, dim);
  out.weights.row(0) = w.transpose();
  out.weights.row(1) = -w.transpose();
  out.bias = Vector::Zero(2);
  return out;
}

std::vector<ExampleRecord> make_synthetic_dataset(const EmbeddingStore& store, const Victim& victim,
                                                  const SyntheticDatasetOptions& options) {
  if (options.min_length < 1 || options.max_length < options.min_length) {
    throw std::invalid_argument("synthetic dataset: bad length range");
  }
  std::vector<TokenId> content;
  std::vector<TokenId> stop;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& t = store.token(static_cast<TokenId>(i));
    (t.starts_with("c") ? content : stop).push_back(static_cast<TokenId>(i));
  }
  if (content.empty()) throw std::invalid_argument("synthetic dataset: no content tokens");

  Rng rng(options.seed);
  std::vector<ExampleRecord> records;
  records.reserve(options.examples);
  for (std::size_t e = 0; e < options.examples; ++e) {
    const std::size_t length =
        options.min_length + rng.uniform_index(options.max_length - options.min_length + 1);
    ExampleRecord record;
    record.id = "ex" + std::to_string(e);
    for (std::size_t i = 0; i < length; ++i) {
      const bool use_stop = !stop.empty() && uniform01(rng) < options.stopword_rate;
      const auto& pool = use_stop ? stop : content;
      record.tokens.push_back(store.token(pool[rng.uniform_index(pool.size())]));
    }
    record.label = victim.classify(record.tokens).argmax();
    if (uniform01(rng) < options.mislabel_rate) {
      record.label = (record.label + 1) % victim.num_classes();
    }
    records.push_back(std::move(record));
  }
  return records;
}

void write_embeddings(std::ostream& out, const EmbeddingStore& store) {
  char buf[64];
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    out << store.token(id);
    for (int j = 0; j < store.dim(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), store.row(id)[j]);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

}  // namespace dzoo
