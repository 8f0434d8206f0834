#include "pdiv/embedding.hpp"

#include "pdiv/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pdiv {

namespace {

void check_same_dimension(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::kDimensionMismatch,
          "vector dimensions differ: " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dimension, bool normalized,
                               std::vector<std::string> ids, RowMatrix data)
    : dimension_(dimension), normalized_(normalized), ids_(std::move(ids)), data_(std::move(data)) {
  require(dimension_ > 0, ErrorCode::kInvalidArgument, "embedding dimension must be positive");
  require(static_cast<std::size_t>(data_.rows()) == ids_.size(), ErrorCode::kDimensionMismatch,
          "row count does not match id count");
  require(ids_.empty() || static_cast<std::size_t>(data_.cols()) == dimension_,
          ErrorCode::kDimensionMismatch, "matrix width does not match table dimension");
  if (ids_.empty()) data_.resize(0, static_cast<Eigen::Index>(dimension_));
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    require(index_.emplace(ids_[i], i).second, ErrorCode::kInvalidArgument,
            "duplicate embedding id '" + ids_[i] + "'");
    const auto values = row(i);
    for (double v : values) {
      require(std::isfinite(v), ErrorCode::kInvalidArgument,
              "non-finite value in embedding '" + ids_[i] + "'");
    }
    if (normalized_) {
      const double norm = l2_norm(values);
      require(std::abs(norm - 1.0) <= 1e-9, ErrorCode::kInvalidArgument,
              "embedding '" + ids_[i] + "' is not unit norm");
    }
  }
}

EmbeddingTable EmbeddingTable::from_vectors(std::vector<EmbeddingVector> vectors, bool normalize) {
  require(!vectors.empty(), ErrorCode::kInvalidArgument, "no embedding vectors given");
  const auto dim = static_cast<std::size_t>(vectors.front().values.size());
  RowMatrix data(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(dim));
  std::vector<std::string> ids;
  ids.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto& v = vectors[i];
    require(static_cast<std::size_t>(v.values.size()) == dim, ErrorCode::kDimensionMismatch,
            "embedding '" + v.id + "' has dimension " + std::to_string(v.values.size()) +
                ", expected " + std::to_string(dim));
    if (normalize) {
      const double norm = l2_norm(as_span(v.values));
      require(norm > 0.0, ErrorCode::kDegenerate, "cannot normalize zero vector '" + v.id + "'");
      v.values /= norm;
    }
    data.row(static_cast<Eigen::Index>(i)) = v.values.transpose();
    ids.push_back(std::move(v.id));
  }
  return EmbeddingTable(dim, normalize, std::move(ids), std::move(data));
}

std::span<const double> EmbeddingTable::row(std::size_t index) const {
  require(index < ids_.size(), ErrorCode::kNotFound, "row index out of range");
  return {data_.data() + index * dimension_, dimension_};
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingTable::index_of(std::string_view id) const {
  const auto found = find(id);
  if (!found) fail(ErrorCode::kNotFound, "unknown embedding id '" + std::string(id) + "'");
  return *found;
}

EmbeddingTable EmbeddingTable::normalized_copy() const {
  RowMatrix data = data_;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const double norm = data.row(r).norm();
    require(norm > 0.0, ErrorCode::kDegenerate,
            "cannot normalize zero vector '" + ids_[static_cast<std::size_t>(r)] + "'");
    data.row(r) /= norm;
  }
  return EmbeddingTable(dimension_, true, ids_, std::move(data));
}

EmbeddingTable EmbeddingTable::subset(std::span<const std::string> ids) const {
  RowMatrix data(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dimension_));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    data.row(static_cast<Eigen::Index>(i)) =
        data_.row(static_cast<Eigen::Index>(index_of(ids[i])));
  }
  return EmbeddingTable(dimension_, normalized_, {ids.begin(), ids.end()}, std::move(data));
}

EmbeddingTable parse_embeddings(std::istream& in, bool normalize) {
  std::vector<EmbeddingVector> vectors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    require(record.is_object() && record.contains("id") && record["id"].is_string() &&
                record.contains("vec") && record["vec"].is_array(),
            ErrorCode::kParse,
            "line " + std::to_string(line_no) + ": expected fields 'id' (string) and 'vec' (array)");
    EmbeddingVector v;
    v.id = record["id"].get<std::string>();
    const auto& vec = record["vec"];
    v.values.resize(static_cast<Eigen::Index>(vec.size()));
    for (std::size_t i = 0; i < vec.size(); ++i) {
      require(vec[i].is_number(), ErrorCode::kParse,
              "line " + std::to_string(line_no) + ": non-numeric vector entry");
      const double x = vec[i].get<double>();
      require(std::isfinite(x), ErrorCode::kInvalidArgument,
              "line " + std::to_string(line_no) + ": non-finite value");
      v.values(static_cast<Eigen::Index>(i)) = x;
    }
    if (!vectors.empty()) {
      require(v.values.size() == vectors.front().values.size(), ErrorCode::kDimensionMismatch,
              "line " + std::to_string(line_no) + ": vector length " +
                  std::to_string(v.values.size()) + " differs from " +
                  std::to_string(vectors.front().values.size()));
    }
    require(v.values.size() > 0, ErrorCode::kParse,
            "line " + std::to_string(line_no) + ": empty vector");
    vectors.push_back(std::move(v));
  }
  require(!vectors.empty(), ErrorCode::kParse, "embedding file contains no records");
  return EmbeddingTable::from_vectors(std::move(vectors), normalize);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, bool normalize) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open embeddings file " + path.string());
  return parse_embeddings(in, normalize);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto values = table.row(i);
    nlohmann::json record;
    record["id"] = table.id(i);
    record["vec"] = std::vector<double>(values.begin(), values.end());
    out << record.dump() << '\n';
  }
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write embeddings file " + path.string());
  write_embeddings(out, table);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_same_dimension(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

double l2_norm(std::span<const double> a) {
  double sum = 0.0;
  for (double x : a) sum += x * x;
  return std::sqrt(sum);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  check_same_dimension(a, b);
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  require(na > 0.0 && nb > 0.0, ErrorCode::kDegenerate, "cosine similarity of a zero vector");
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

}  // namespace pdiv
