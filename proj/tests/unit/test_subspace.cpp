#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "convert.hpp"
#include "oracles.hpp"
#include "pdiv/error.hpp"
#include "pdiv/subspace.hpp"
#include "pdiv/synth_world.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <random>

using namespace pdiv;
using testing_support::gaussian_rows;
using testing_support::to_mat;

namespace {

double angle_rows(const Matrix& a_rows, const Matrix& b_rows) {
  return oracle::max_principal_angle(to_mat(Matrix(a_rows.transpose())), to_mat(Matrix(b_rows.transpose())));
}

Eigen::Index rank_of(const Matrix& m, double rel = 1e-8) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector s = svd.singularValues();
  return (s.array() > rel * s(0)).count();
}

/// Phrase records and a table for nouns whose adjective phrases are random.
struct Groups {
  EmbeddingTable table;
  std::vector<PhraseRecord> records;
};

Groups random_groups(std::size_t nouns, std::size_t per_noun, std::size_t dim, std::mt19937_64& rng,
                     bool duplicate_first = false) {
  std::vector<EmbeddingVector> vs;
  Groups g;
  RowMatrix first;
  for (std::size_t n = 0; n < nouns; ++n) {
    RowMatrix x = gaussian_rows(per_noun, dim, rng);
    if (n == 0) first = x;
    if (duplicate_first) x = first;
    for (std::size_t a = 0; a < per_noun; ++a) {
      PhraseRecord r{"noun" + std::to_string(n), "adj" + std::to_string(a), "", "cat", ""};
      r.embedding_id = r.base_phrase();
      vs.push_back({r.embedding_id, Vector(x.row(static_cast<Eigen::Index>(a)).transpose())});
      g.records.push_back(r);
    }
  }
  g.table = EmbeddingTable::from_vectors(vs, false);
  return g;
}

}  // namespace

TEST_CASE("pca on a line") {
  RowMatrix x(4, 3);
  x << 1, 0, 0, -2, 0, 0, 3, 0, 0, 0, 0, 0;
  const PcaResult r = pca(x, 1);
  CHECK(r.components(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(r.components(0, 1)) < 1e-12);
  // Sample variance of (1, −2, 3, 0).
  CHECK(r.eigenvalues(0) == doctest::Approx(14.0 / 3.0 - 4.0 * 0.5 * 0.5 / 3.0));
}

TEST_CASE("pca recovers rank-2 data exactly") {
  std::mt19937_64 rng(1);
  const RowMatrix coeffs = gaussian_rows(30, 2, rng);
  const RowMatrix basis = gaussian_rows(2, 8, rng);
  const RowMatrix x = coeffs * basis;
  const PcaResult r = pca(x, 2);
  const RowMatrix centered = x.rowwise() - r.mean.transpose();
  const RowMatrix recon = (centered * r.components.transpose()) * r.components;
  CHECK((recon - centered).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(r.eigenvalues(0) >= r.eigenvalues(1));
  CHECK(((r.components * r.components.transpose()) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pca matches a Jacobi eigensolver") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const RowMatrix x = gaussian_rows(50, 20, rng);
    const PcaResult r = pca(x, 5);
    const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(to_mat(x)));
    oracle::Mat top = oracle::zeros(20, 5);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t k = 0; k < 5; ++k) top[i][k] = vectors[i][k];
    CHECK(oracle::max_principal_angle(to_mat(Matrix(r.components.transpose())), top) < 1e-8);
    for (int k = 0; k < 5; ++k) CHECK(r.eigenvalues(k) == doctest::Approx(values[static_cast<std::size_t>(k)]).epsilon(1e-10));
  }
}

TEST_CASE("pca sign convention and order invariance") {
  std::mt19937_64 rng(3);
  RowMatrix x = gaussian_rows(40, 6, rng);
  const PcaResult a = pca(x, 3);
  for (Eigen::Index k = 0; k < 3; ++k) {
    Eigen::Index arg;
    a.components.row(k).cwiseAbs().maxCoeff(&arg);
    CHECK(a.components(k, arg) > 0.0);
  }
  RowMatrix shuffled = x.colwise().reverse();
  const PcaResult b = pca(shuffled, 3);
  CHECK((a.components - b.components).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pca errors") {
  std::mt19937_64 rng(4);
  CHECK_THROWS_AS(pca(gaussian_rows(1, 3, rng), 1), Error);
  CHECK_THROWS_AS(pca(gaussian_rows(5, 3, rng), 4), Error);
  RowMatrix same = RowMatrix::Ones(5, 3);
  try {
    pca(same, 1);
    FAIL("expected degenerate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerate);
  }
}

TEST_CASE("person subspace: single group equals its own pca span") {
  std::mt19937_64 rng(5);
  const Groups g = random_groups(1, 20, 10, rng);
  const PeopleProjection p = extract_person_subspace(g.table, g.records, 4);
  const PcaResult direct = pca(g.table.matrix(), 4);
  CHECK(angle_rows(p.matrix, direct.components) < 1e-8);
  CHECK((p.matrix * p.matrix.transpose() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);

  // Two identical groups give the same answer as one.
  std::mt19937_64 rng2(5);
  const Groups twice = random_groups(2, 20, 10, rng2, true);
  const PeopleProjection q = extract_person_subspace(twice.table, twice.records, 4);
  CHECK(angle_rows(p.matrix, q.matrix) < 1e-8);
}

TEST_CASE("person subspace is invariant to group order") {
  std::mt19937_64 rng(6);
  Groups g = random_groups(3, 15, 9, rng);
  const PeopleProjection a = extract_person_subspace(g.table, g.records, 3);
  std::reverse(g.records.begin(), g.records.end());
  const PeopleProjection b = extract_person_subspace(g.table, g.records, 3);
  CHECK((a.matrix - b.matrix).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("person subspace errors") {
  std::mt19937_64 rng(7);
  const Groups g = random_groups(2, 4, 10, rng);
  CHECK_THROWS_AS(extract_person_subspace(g.table, g.records, 4), Error);  // group of 4 < d_p + 1
  CHECK_THROWS_AS(extract_person_subspace(g.table, g.records, 10), Error);
}

TEST_CASE("synthetic world: person span and background directions") {
  SynthWorldConfig c;
  c.seed = 8;
  c.image_count = 300;
  const SynthWorld w = generate_world(c);
  const PeopleProjection people = extract_person_subspace(w.phrases, w.person_phrases, 12);
  CHECK(angle_rows(people.matrix, w.person_basis.transpose()) < 0.05);

  const BackgroundRemoval removal = extract_background_subspace(w.phrases, w.location_phrases, people, 3);
  CHECK(removal.d_b() == 3);
  CHECK((removal.directions * removal.directions.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  const Matrix r = removal.removal();
  CHECK((r * r - r).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  // Extracted directions against the true background's image in people coordinates.
  const Matrix truth = people.matrix * w.background_image_directions();
  CHECK(oracle::max_principal_angle(to_mat(Matrix(removal.directions.transpose())), to_mat(truth)) < 0.1);

  const ProjectionPipeline pipe = compose_projection(people, removal);
  CHECK(rank_of(pipe.composed) == 9);
  CHECK(pipe.provenance.d_p == 12);
  CHECK(pipe.provenance.d_b == 3);
  CHECK(!pipe.provenance.created_at.empty());
  const Vector v = people.matrix.transpose() * removal.directions.row(0).transpose();
  CHECK((pipe.composed * v).norm() < 1e-6);
}

TEST_CASE("noise-free world: zero background variance after removal") {
  SynthWorldConfig c;
  c.seed = 9;
  c.noise_sigma = 0.0;
  c.image_count = 300;
  const SynthWorld w = generate_world(c);
  const PeopleProjection people = extract_person_subspace(w.phrases, w.person_phrases, 12);
  const ProjectionPipeline pipe =
      compose_projection(people, extract_background_subspace(w.phrases, w.location_phrases, people, 3));
  const oracle::Mat q = oracle::orthonormal_columns(to_mat(Matrix(people.matrix * w.background_image_directions())));
  const RowMatrix y = pipe.apply(w.images.matrix());
  const oracle::Mat coords = oracle::matmul(to_mat(y), q);
  double var = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (const auto& row : coords) mean += row[k] / static_cast<double>(coords.size());
    for (const auto& row : coords) var += (row[k] - mean) * (row[k] - mean) / static_cast<double>(coords.size() - 1);
  }
  CHECK(var < 1e-12);
}

TEST_CASE("background removal edge cases") {
  SynthWorldConfig c;
  c.seed = 10;
  c.ambient_dim = 64;
  c.image_count = 20;
  const SynthWorld w = generate_world(c);
  const PeopleProjection people = extract_person_subspace(w.phrases, w.person_phrases, 12);

  const BackgroundRemoval none = extract_background_subspace(w.phrases, w.location_phrases, people, 0);
  CHECK(none.removal() == Matrix::Identity(12, 12));
  CHECK_THROWS_AS(extract_background_subspace(w.phrases, w.location_phrases, people, 12), Error);

  // Locations that change nothing: every location phrase equals its base phrase.
  std::vector<EmbeddingVector> vs;
  for (const auto& r : w.person_phrases) vs.push_back({r.embedding_id, w.phrases.vector(r.embedding_id)});
  for (const auto& r : w.location_phrases) vs.push_back({r.embedding_id, w.phrases.vector(r.base_phrase())});
  const EmbeddingTable flat = EmbeddingTable::from_vectors(vs, false);
  const BackgroundRemoval idle = extract_background_subspace(flat, w.location_phrases, people, 3);
  CHECK(!idle.warnings.empty());
  CHECK((idle.removal() - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(idle.eigenvalues.cwiseAbs().maxCoeff() < 1e-10);

  // A single location is not enough.
  std::vector<PhraseRecord> one_loc;
  for (const auto& r : w.location_phrases)
    if (r.location == w.corpus.locations[0]) one_loc.push_back(r);
  CHECK_THROWS_AS(extract_background_subspace(w.phrases, one_loc, people, 3), Error);

  CHECK(parse_background_mode("literal-global") == BackgroundMode::kLiteralGlobal);
  CHECK(to_string(BackgroundMode::kPhraseCentered) == "phrase-centered");
  CHECK_THROWS_AS(parse_background_mode("nope"), Error);
  const BackgroundRemoval global =
      extract_background_subspace(w.phrases, w.location_phrases, people, 3, BackgroundMode::kLiteralGlobal);
  CHECK(global.d_b() == 3);
}

TEST_CASE("project: linearity, non-expansion, two-stage reference") {
  SynthWorldConfig c;
  c.seed = 11;
  c.ambient_dim = 64;
  c.image_count = 20;
  const SynthWorld w = generate_world(c);
  const PeopleProjection people = extract_person_subspace(w.phrases, w.person_phrases, 12);
  const BackgroundRemoval removal = extract_background_subspace(w.phrases, w.location_phrases, people, 3);
  const ProjectionPipeline pipe = compose_projection(people, removal);
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Vector u = gaussian_rows(1, 64, rng).row(0).transpose();
    const Vector v = gaussian_rows(1, 64, rng).row(0).transpose();
    const Vector pu = project(pipe, as_span(u));
    const Vector two_stage = removal.removal() * (people.matrix * u);
    CHECK((pu - two_stage).cwiseAbs().maxCoeff() < 1e-12);
    const Vector combo = 2.0 * u - 0.5 * v;
    CHECK((project(pipe, as_span(combo)) - (2.0 * pu - 0.5 * project(pipe, as_span(v)))).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(pu.norm() <= u.norm() + 1e-10);
    // Moving along a removed direction changes nothing.
    const Vector bg = people.matrix.transpose() * removal.directions.transpose() * gaussian_rows(3, 1, rng).col(0);
    const Vector moved = u + bg;
    CHECK((project(pipe, as_span(moved)) - pu).norm() < 1e-6);
    const Matrix r = removal.removal();
    CHECK(((r * r) * (people.matrix * u) - r * (people.matrix * u)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(project(pipe, as_span(Vector::Zero(64))).isZero());
  CHECK_THROWS_AS(project(pipe, as_span(Vector::Zero(5))), Error);
}
