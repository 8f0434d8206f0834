#pragma once

#include "pdiv/linalg.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pdiv {

struct EmbeddingVector {
  std::string id;
  Vector values;
};

/// Id-indexed, fixed-dimension vectors. Immutable once constructed; rows are
/// stored contiguously in insertion order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  /// Validates unique ids, finite values and (when `normalized`) unit norms.
  EmbeddingTable(std::size_t dimension, bool normalized, std::vector<std::string> ids,
                 RowMatrix data);

  static EmbeddingTable from_vectors(std::vector<EmbeddingVector> vectors, bool normalize);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t dimension() const { return dimension_; }
  bool normalized() const { return normalized_; }

  const std::string& id(std::size_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> row(std::size_t index) const;
  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // throws kNotFound
  std::span<const double> at(std::string_view id) const { return row(index_of(id)); }
  Vector vector(std::string_view id) const { return to_vector(at(id)); }

  const RowMatrix& matrix() const { return data_; }

  /// Copy with every row scaled to unit norm; rejects zero rows.
  EmbeddingTable normalized_copy() const;

  /// Rows for `ids`, in that order.
  EmbeddingTable subset(std::span<const std::string> ids) const;

 private:
  std::size_t dimension_ = 0;
  bool normalized_ = false;
  std::vector<std::string> ids_;
  RowMatrix data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Line-delimited records `{"id": ..., "vec": [...]}`.
EmbeddingTable parse_embeddings(std::istream& in, bool normalize = true);
EmbeddingTable load_embeddings(const std::filesystem::path& path, bool normalize = true);
void write_embeddings(std::ostream& out, const EmbeddingTable& table);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

}  // namespace pdiv
