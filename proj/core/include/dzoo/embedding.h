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

#ifndef DZOO_EMBEDDING_H_
#define DZOO_EMBEDDING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace dzoo {

using TokenId = std::int32_t;
using Vector = Eigen::VectorXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Similarity reported when either side has (numerically) zero norm. Ranks
// below every real cosine.
inline constexpr double kUndefinedSimilarity =
    -std::numeric_limits<double>::infinity();
inline constexpr double kMinNorm = 1e-12;

// Raised by load_embeddings. line() is 1-based; 0 when the error is not tied
// to a particular line (e.g. empty input).
class EmbeddingParseError : public std::runtime_error {
 public:
  EmbeddingParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Neighbor {
  TokenId id;
  double similarity;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Descending by similarity, ties by ascending id.
using NeighborList = std::vector<Neighbor>;

// Immutable vocabulary plus one d-dimensional row per token. Safe for
// concurrent readers.
class EmbeddingStore {
 public:
  // Throws std::invalid_argument on duplicate tokens, row/vocab mismatch or
  // d == 0.
  EmbeddingStore(std::vector<std::string> tokens, RowMatrix vectors);

  std::size_t size() const { return tokens_.size(); }
  int dim() const { return static_cast<int>(vectors_.cols()); }

  std::optional<TokenId> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  auto row(TokenId id) const { return vectors_.row(id); }
  double norm(TokenId id) const { return norms_[id]; }
  const RowMatrix& matrix() const { return vectors_; }
  const Vector& norms() const { return norms_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  RowMatrix vectors_;
  Vector norms_;
};

// Parses the whitespace-separated text format: token followed by d decimal
// reals per line. d is taken from the first line unless expected_dim is set.
EmbeddingStore load_embeddings(std::istream& source,
                               std::optional<int> expected_dim = std::nullopt);
EmbeddingStore load_embeddings_file(const std::filesystem::path& path,
                                    std::optional<int> expected_dim = std::nullopt);

// Cosine similarity; kUndefinedSimilarity when either norm is below kMinNorm.
// Dimension mismatch is a contract violation (std::invalid_argument).
double cosine(const Vector& a, const Vector& b);
double cosine(const EmbeddingStore& store, TokenId a, TokenId b);

// Exact k nearest tokens by cosine, excluding `exclude`. Zero-norm rows are
// never returned. Returns fewer than k entries only when the vocabulary runs
// out.
NeighborList knn(const EmbeddingStore& store, const Vector& query, std::size_t k,
                 std::span<const TokenId> exclude = {});

// knn around an existing token, always excluding the token itself.
NeighborList knn_of_token(const EmbeddingStore& store, TokenId token,
                          std::size_t k);

// Token with the highest cosine to `vector`, lowest id on ties. Throws
// std::domain_error("unsnappable vector") for a zero vector.
TokenId snap(const EmbeddingStore& store, const Vector& vector);

struct NeighborhoodStats {
  std::size_t vocab_size = 0;
  double threshold = 0.0;
  double mean_neighbors = 0.0;
  // Mean over tokens that have at least one neighbor; 0 if none do.
  double mean_neighbors_nonzero = 0.0;
  // neighbor count -> number of tokens with that count.
  std::map<std::size_t, std::size_t> histogram;
};

// For every token counts the other tokens with cosine >= threshold. Self
// similarity is excluded; zero-norm rows have no neighbors.
NeighborhoodStats neighborhood_stats(const EmbeddingStore& store, double threshold);

}  // namespace dzoo

#endif  // DZOO_EMBEDDING_H_
