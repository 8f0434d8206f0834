#pragma once

#include "pdiv/corpus.hpp"
#include "pdiv/embedding.hpp"
#include "pdiv/linalg.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pdiv {

struct PcaResult {
  Matrix components;  // d × dim, orthonormal rows, largest variance first
  Vector eigenvalues;  // sample variances, non-increasing
  Vector mean;
};

/// Mean-centred PCA over the rows of `data`. Each component's largest-magnitude
/// coordinate is positive (lowest index wins ties).
PcaResult pca(const RowMatrix& data, std::size_t d);

struct PeopleProjection {
  Matrix matrix;  // d_p × ambient, orthonormal rows
  std::size_t d_p() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t ambient_dim() const { return static_cast<std::size_t>(matrix.cols()); }
};

enum class BackgroundMode { kPhraseCentered, kLiteralGlobal };
std::string_view to_string(BackgroundMode mode);
BackgroundMode parse_background_mode(std::string_view text);

struct BackgroundRemoval {
  Matrix directions;  // d_b × d_p, orthonormal rows in people coordinates
  std::size_t d_p = 0;
  Vector eigenvalues;  // location-driven variances of the kept directions
  std::vector<std::string> warnings;

  std::size_t d_b() const { return static_cast<std::size_t>(directions.rows()); }
  /// I − BᵀB
  Matrix removal() const;
};

struct PipelineProvenance {
  std::vector<std::string> corpus_ids;
  std::size_t d_p = 0;
  std::size_t d_b = 0;
  BackgroundMode mode = BackgroundMode::kPhraseCentered;
  std::string created_at;  // ISO 8601 UTC
};

/// The composed text-derived projection from ambient space into d_p people
/// coordinates with the background directions removed.
struct ProjectionPipeline {
  PeopleProjection people;
  BackgroundRemoval background;
  Matrix composed;  // d_p × ambient = (I − BᵀB) · people.matrix
  PipelineProvenance provenance;

  std::size_t ambient_dim() const { return static_cast<std::size_t>(composed.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(composed.rows()); }
  /// Projects every row.
  RowMatrix apply(const RowMatrix& rows) const;
};

/// Per-noun PCA of adjective+noun phrase embeddings, merged through the mean
/// of the rank-d_p projectors; rows are the top-d_p eigenvectors of that mean.
PeopleProjection extract_person_subspace(const EmbeddingTable& phrase_table,
                                         const std::vector<PhraseRecord>& records,
                                         std::size_t d_p);

/// Top-d_b PCA directions of location-augmented phrases in people coordinates.
BackgroundRemoval extract_background_subspace(const EmbeddingTable& phrase_table,
                                              const std::vector<PhraseRecord>& records,
                                              const PeopleProjection& people, std::size_t d_b,
                                              BackgroundMode mode = BackgroundMode::kPhraseCentered);

ProjectionPipeline compose_projection(const PeopleProjection& people,
                                      const BackgroundRemoval& background);

Vector project(const ProjectionPipeline& pipeline, std::span<const double> v);

}  // namespace pdiv
