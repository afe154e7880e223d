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

#include "dzoo/embedding.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>

namespace dzoo {

namespace {

std::string line_message(std::size_t line, const std::string& what) {
  if (line == 0) return "embeddings: " + what;
  return "embeddings: line " + std::to_string(line) + ": " + what;
}

// Splits on runs of ASCII spaces.
void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
}

// Plain left-to-right accumulation so that every similarity in the library is
// computed bit-identically regardless of argument order or alignment.
double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double bounded(double x) { return std::clamp(x, -1.0, 1.0); }

bool better(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

}  // namespace

EmbeddingParseError::EmbeddingParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line_message(line, what)), line_(line) {}

EmbeddingStore::EmbeddingStore(std::vector<std::string> tokens, RowMatrix vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
  if (static_cast<std::size_t>(vectors_.rows()) != tokens_.size()) {
    throw std::invalid_argument("embedding store: row count does not match vocabulary size");
  }
  if (vectors_.cols() < 1) {
    throw std::invalid_argument("embedding store: dimension must be at least 1");
  }
  if (tokens_.size() > static_cast<std::size_t>(std::numeric_limits<TokenId>::max())) {
    throw std::invalid_argument("embedding store: vocabulary too large");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw std::invalid_argument("embedding store: duplicate token '" + tokens_[i] + "'");
    }
  }
  const auto d = static_cast<std::size_t>(vectors_.cols());
  norms_.resize(vectors_.rows());
  for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
    const double* r = vectors_.data() + i * vectors_.cols();
    norms_[i] = std::sqrt(dot(r, r, d));
  }
}

std::optional<TokenId> EmbeddingStore::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingStore load_embeddings(std::istream& source, std::optional<int> expected_dim) {
  if (expected_dim && *expected_dim < 1) {
    throw std::invalid_argument("load_embeddings: expected_dim must be >= 1");
  }
  std::vector<std::string> tokens;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> seen;
  std::optional<std::size_t> dim;
  if (expected_dim) dim = static_cast<std::size_t>(*expected_dim);

  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    split_fields(view, fields);
    if (fields.empty()) {
      throw EmbeddingParseError(line_no, "empty record");
    }
    const std::size_t found = fields.size() - 1;
    if (found == 0) {
      throw EmbeddingParseError(line_no, "token '" + std::string(fields[0]) + "' has no vector");
    }
    if (!dim) dim = found;
    if (found != *dim) {
      throw EmbeddingParseError(line_no, "dimension mismatch: expected " +
                                             std::to_string(*dim) + " values, found " +
                                             std::to_string(found));
    }
    std::string token(fields[0]);
    if (!seen.emplace(token, line_no).second) {
      throw EmbeddingParseError(line_no, "duplicate token '" + token + "' (first seen on line " +
                                             std::to_string(seen[token]) + ")");
    }
    for (std::size_t f = 1; f < fields.size(); ++f) {
      double v = 0.0;
      const char* first = fields[f].data();
      const char* last = first + fields[f].size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw EmbeddingParseError(line_no, "malformed number '" + std::string(fields[f]) + "'");
      }
      values.push_back(v);
    }
    tokens.push_back(std::move(token));
  }
  if (source.bad()) throw EmbeddingParseError(line_no, "read failure");
  if (tokens.empty()) throw EmbeddingParseError(0, "empty source");

  RowMatrix matrix = Eigen::Map<const RowMatrix>(
      values.data(), static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(*dim));
  return EmbeddingStore(std::move(tokens), std::move(matrix));
}

EmbeddingStore load_embeddings_file(const std::filesystem::path& path,
                                    std::optional<int> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbeddingParseError(0, "cannot open " + path.string());
  return load_embeddings(in, expected_dim);
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine: dimension mismatch");
  }
  const auto n = static_cast<std::size_t>(a.size());
  const double na = std::sqrt(dot(a.data(), a.data(), n));
  const double nb = std::sqrt(dot(b.data(), b.data(), n));
  if (na < kMinNorm || nb < kMinNorm) return kUndefinedSimilarity;
  return bounded(dot(a.data(), b.data(), n) / (na * nb));
}

double cosine(const EmbeddingStore& store, TokenId a, TokenId b) {
  const double na = store.norm(a);
  const double nb = store.norm(b);
  if (na < kMinNorm || nb < kMinNorm) return kUndefinedSimilarity;
  const auto d = static_cast<std::size_t>(store.dim());
  return bounded(dot(store.row(a).data(), store.row(b).data(), d) / (na * nb));
}

namespace {

NeighborList scan(const EmbeddingStore& store, const double* query, double query_norm,
                  std::size_t k, std::span<const TokenId> exclude) {
  if (k == 0) throw std::invalid_argument("knn: k must be >= 1");
  if (query_norm < kMinNorm) return {};
  const auto d = static_cast<std::size_t>(store.dim());
  const Vector& norms = store.norms();
  NeighborList all;
  all.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    if (norms[id] < kMinNorm) continue;
    if (std::find(exclude.begin(), exclude.end(), id) != exclude.end()) continue;
    const double sim = dot(store.row(id).data(), query, d) / (norms[id] * query_norm);
    all.push_back({id, bounded(sim)});
  }
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), better);
  all.resize(take);
  return all;
}

}  // namespace

NeighborList knn(const EmbeddingStore& store, const Vector& query, std::size_t k,
                 std::span<const TokenId> exclude) {
  if (query.size() != store.dim()) {
    throw std::invalid_argument("knn: query dimension does not match store");
  }
  const auto d = static_cast<std::size_t>(query.size());
  return scan(store, query.data(), std::sqrt(dot(query.data(), query.data(), d)), k, exclude);
}

NeighborList knn_of_token(const EmbeddingStore& store, TokenId token, std::size_t k) {
  const TokenId self[] = {token};
  return scan(store, store.row(token).data(), store.norm(token), k, self);
}

TokenId snap(const EmbeddingStore& store, const Vector& vector) {
  if (vector.size() != store.dim()) {
    throw std::invalid_argument("snap: dimension does not match store");
  }
  auto nearest = knn(store, vector, 1);
  if (nearest.empty()) throw std::domain_error("unsnappable vector");
  return nearest.front().id;
}

NeighborhoodStats neighborhood_stats(const EmbeddingStore& store, double threshold) {
  if (!(threshold > -1.0 && threshold <= 1.0)) {
    throw std::invalid_argument("neighborhood_stats: threshold must be in (-1, 1]");
  }
  const auto n = static_cast<Eigen::Index>(store.size());
  const Vector& norms = store.norms();

  // Unit rows; zero-norm rows are masked out below.
  RowMatrix unit = store.matrix();
  std::vector<char> live(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    live[static_cast<std::size_t>(i)] = norms[i] >= kMinNorm;
    if (live[static_cast<std::size_t>(i)]) unit.row(i) /= norms[i];
  }

  // Upper-triangular blocked scan: each pair is evaluated once and credited
  // to both ends.
  std::vector<std::size_t> counts(static_cast<std::size_t>(n), 0);
  constexpr Eigen::Index kBlock = 256;
  RowMatrix sims;
  for (Eigen::Index begin = 0; begin < n; begin += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - begin);
    const Eigen::Index cols = n - begin;
    sims.noalias() = unit.middleRows(begin, rows) * unit.middleRows(begin, cols).transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto a = static_cast<std::size_t>(begin + r);
      if (!live[a]) continue;
      for (Eigen::Index c = r + 1; c < cols; ++c) {
        const auto b = static_cast<std::size_t>(begin + c);
        if (!live[b]) continue;
        if (sims(r, c) >= threshold) {
          ++counts[a];
          ++counts[b];
        }
      }
    }
  }

  NeighborhoodStats stats;
  stats.vocab_size = store.size();
  stats.threshold = threshold;
  std::size_t total = 0;
  std::size_t with_neighbors = 0;
  for (std::size_t c : counts) {
    ++stats.histogram[c];
    total += c;
    if (c > 0) ++with_neighbors;
  }
  if (n > 0) stats.mean_neighbors = static_cast<double>(total) / static_cast<double>(n);
  if (with_neighbors > 0) {
    stats.mean_neighbors_nonzero =
        static_cast<double>(total) / static_cast<double>(with_neighbors);
  }
  return stats;
}

}  // namespace dzoo
