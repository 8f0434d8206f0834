#include "pdiv/subspace.hpp"

#include "pdiv/error.hpp"
#include "pdiv/timestamp.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace pdiv {

namespace {

RowMatrix gather_rows(const EmbeddingTable& table, const std::vector<const PhraseRecord*>& records) {
  RowMatrix out(static_cast<Eigen::Index>(records.size()),
                static_cast<Eigen::Index>(table.dimension()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(table.at(records[i]->embedding_id).data(),
                                             static_cast<Eigen::Index>(table.dimension()));
  }
  return out;
}

}  // namespace

PcaResult pca(const RowMatrix& data, std::size_t d) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto dim = static_cast<std::size_t>(data.cols());
  require(n >= 2, ErrorCode::kInvalidArgument, "pca needs at least 2 vectors");
  require(d >= 1 && d <= std::min(n - 1, dim), ErrorCode::kInvalidArgument,
          "pca: requested " + std::to_string(d) + " components from " + std::to_string(n) +
              " vectors of dimension " + std::to_string(dim));
  PcaResult result;
  result.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - result.mean.transpose();
  require(centered.cwiseAbs().maxCoeff() > 0.0, ErrorCode::kDegenerate,
          "pca input vectors are all identical");
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const auto k = static_cast<Eigen::Index>(d);
  result.components = svd.matrixV().leftCols(k).transpose();
  canonicalize_row_signs(result.components);
  result.eigenvalues =
      svd.singularValues().head(k).array().square() / static_cast<double>(n - 1);
  return result;
}

std::string_view to_string(BackgroundMode mode) {
  return mode == BackgroundMode::kPhraseCentered ? "phrase-centered" : "literal-global";
}

BackgroundMode parse_background_mode(std::string_view text) {
  if (text == "phrase-centered") return BackgroundMode::kPhraseCentered;
  if (text == "literal-global") return BackgroundMode::kLiteralGlobal;
  fail(ErrorCode::kInvalidArgument, "unknown background mode '" + std::string(text) + "'");
}

Matrix BackgroundRemoval::removal() const {
  const auto n = static_cast<Eigen::Index>(d_p);
  Matrix r = Matrix::Identity(n, n);
  if (directions.rows() > 0) r -= directions.transpose() * directions;
  return r;
}

RowMatrix ProjectionPipeline::apply(const RowMatrix& rows) const {
  require(static_cast<std::size_t>(rows.cols()) == ambient_dim(), ErrorCode::kDimensionMismatch,
          "input dimension does not match the projection");
  return rows * composed.transpose();
}

PeopleProjection extract_person_subspace(const EmbeddingTable& phrase_table,
                                         const std::vector<PhraseRecord>& records,
                                         std::size_t d_p) {
  require(d_p >= 1 && d_p < phrase_table.dimension(), ErrorCode::kInvalidArgument,
          "d_p must be positive and smaller than the ambient dimension");
  std::map<std::string, std::vector<const PhraseRecord*>> groups;
  for (const auto& r : records) {
    require(r.location.empty(), ErrorCode::kInvalidArgument,
            "person subspace records must not carry a location");
    groups[r.noun].push_back(&r);
  }
  require(!groups.empty(), ErrorCode::kInvalidArgument, "no noun groups given");
  for (const auto& [noun, members] : groups) {
    require(members.size() >= d_p + 1, ErrorCode::kInvalidArgument,
            "noun group '" + noun + "' has " + std::to_string(members.size()) +
                " phrases; needs at least d_p + 1 = " + std::to_string(d_p + 1));
  }

  std::vector<const std::vector<const PhraseRecord*>*> ordered;
  for (const auto& entry : groups) ordered.push_back(&entry.second);

  // Stack each noun's components; the mean projector is WᵀW / N, whose top
  // eigenvectors are the top right singular vectors of W.
  const auto k = static_cast<Eigen::Index>(d_p);
  Matrix stacked(k * static_cast<Eigen::Index>(ordered.size()),
                 static_cast<Eigen::Index>(phrase_table.dimension()));
  std::vector<Matrix> components(ordered.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(ordered.size()); ++g) {
    components[static_cast<std::size_t>(g)] =
        pca(gather_rows(phrase_table, *ordered[static_cast<std::size_t>(g)]), d_p).components;
  }
  for (std::size_t g = 0; g < ordered.size(); ++g) {
    stacked.middleRows(static_cast<Eigen::Index>(g) * k, k) = components[g];
  }
  Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinV);
  PeopleProjection people;
  people.matrix = svd.matrixV().leftCols(k).transpose();
  canonicalize_row_signs(people.matrix);
  return people;
}

BackgroundRemoval extract_background_subspace(const EmbeddingTable& phrase_table,
                                              const std::vector<PhraseRecord>& records,
                                              const PeopleProjection& people, std::size_t d_b,
                                              BackgroundMode mode) {
  BackgroundRemoval removal;
  removal.d_p = people.d_p();
  require(people.ambient_dim() == phrase_table.dimension(), ErrorCode::kDimensionMismatch,
          "people projection does not match phrase embedding dimension");
  require(d_b < people.d_p(), ErrorCode::kInvalidArgument, "d_b must be smaller than d_p");
  removal.directions = Matrix(0, static_cast<Eigen::Index>(people.d_p()));
  if (d_b == 0) return removal;

  std::set<std::string> locations;
  std::map<std::string, std::vector<std::size_t>> by_base;
  std::vector<const PhraseRecord*> located;
  for (const auto& r : records) {
    require(!r.location.empty(), ErrorCode::kInvalidArgument,
            "background records must carry a location");
    locations.insert(r.location);
    by_base[r.base_phrase()].push_back(located.size());
    located.push_back(&r);
  }
  require(locations.size() >= 2, ErrorCode::kInvalidArgument,
          "background extraction needs at least 2 distinct locations");

  const RowMatrix ambient = gather_rows(phrase_table, located);
  RowMatrix coords = ambient * people.matrix.transpose();
  if (mode == BackgroundMode::kPhraseCentered) {
    for (const auto& [base, members] : by_base) {
      std::set<std::string> distinct;
      for (auto i : members) distinct.insert(located[i]->location);
      require(distinct.size() >= 2, ErrorCode::kInvalidArgument,
              "base phrase '" + base + "' appears with fewer than 2 locations");
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(coords.cols());
      for (auto i : members) mean += coords.row(static_cast<Eigen::Index>(i));
      mean /= static_cast<double>(members.size());
      for (auto i : members) coords.row(static_cast<Eigen::Index>(i)) -= mean;
    }
  }

  const Eigen::RowVectorXd center = coords.colwise().mean();
  const double spread = (coords.rowwise() - center).cwiseAbs().maxCoeff();
  if (spread == 0.0) {
    removal.eigenvalues = Vector::Zero(static_cast<Eigen::Index>(d_b));
    removal.warnings.push_back("location-augmented phrases show no location-driven variance; "
                               "background removal is the identity");
    return removal;
  }
  const PcaResult result = pca(coords, std::min<std::size_t>(d_b, static_cast<std::size_t>(coords.rows()) - 1));
  removal.eigenvalues = result.eigenvalues;
  if (result.eigenvalues(0) < 1e-10) {
    removal.warnings.push_back("location-driven variance below 1e-10; background removal is the identity");
    return removal;
  }
  removal.directions = result.components;
  return removal;
}

ProjectionPipeline compose_projection(const PeopleProjection& people,
                                      const BackgroundRemoval& background) {
  require(background.d_p == people.d_p() &&
              (background.directions.rows() == 0 ||
               static_cast<std::size_t>(background.directions.cols()) == people.d_p()),
          ErrorCode::kDimensionMismatch, "background directions do not match people coordinates");
  ProjectionPipeline pipeline;
  pipeline.people = people;
  pipeline.background = background;
  pipeline.composed = background.removal() * people.matrix;
  pipeline.provenance.d_p = people.d_p();
  pipeline.provenance.d_b = background.d_b();
  pipeline.provenance.created_at = utc_timestamp();
  return pipeline;
}

Vector project(const ProjectionPipeline& pipeline, std::span<const double> v) {
  require(v.size() == pipeline.ambient_dim(), ErrorCode::kDimensionMismatch,
          "vector dimension " + std::to_string(v.size()) + " does not match projection input " +
              std::to_string(pipeline.ambient_dim()));
  return pipeline.composed * to_vector(v);
}

}  // namespace pdiv
