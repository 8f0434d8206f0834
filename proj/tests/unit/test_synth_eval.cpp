#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pdiv/error.hpp"
#include "pdiv/synth_eval.hpp"

#include <map>
#include <set>
#include <sstream>

using namespace pdiv;

namespace {

SynthWorld small_world(std::uint64_t seed) {
  SynthWorldConfig c;
  c.seed = seed;
  c.image_count = 300;
  return generate_world(c);
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("weighted distance and set diversity") {
  const Vector w = vec({2, 1});
  CHECK(weighted_distance(vec({0, 0}), vec({1, 3}), w) == doctest::Approx(std::sqrt(4.0 + 9.0)));
  CHECK_THROWS_AS(weighted_distance(vec({0}), vec({1, 3}), w), Error);
  // Three collinear points at 0, 1, 3 on the first axis: distances 2, 6, 4.
  CHECK(set_diversity({vec({0, 0}), vec({1, 0}), vec({3, 0})}, w) == doctest::Approx(4.0));
  CHECK_THROWS_AS(set_diversity({vec({0, 0})}, w), Error);
}

TEST_CASE("deterministic annotator votes for the odd one out") {
  AnnotatorModel m{vec({1, 1}), 0.0};
  std::mt19937_64 rng(1);
  CHECK(simulate_votes({vec({0, 0}), vec({0.1, 0}), vec({5, 5})}, m, rng) == std::array<int, 3>{0, 0, 4});
  CHECK(simulate_votes({vec({9, 0}), vec({0.1, 0}), vec({0, 0})}, m, rng) == std::array<int, 3>{4, 0, 0});
  // All tied: lowest index.
  CHECK(simulate_votes({vec({0, 0}), vec({0, 0}), vec({0, 0})}, m, rng) == std::array<int, 3>{4, 0, 0});
  m.temperature = -1.0;
  CHECK_THROWS_AS(simulate_votes({vec({0, 0}), vec({0, 0}), vec({0, 0})}, m, rng), Error);
}

TEST_CASE("soft annotator follows the softmax") {
  AnnotatorModel m{vec({1}), 1.0};
  std::mt19937_64 rng(2);
  // Scores: image 2 sums 2+2 = 4, images 0 and 1 sum 0+2 = 2.
  const std::array<Vector, 3> l = {vec({0}), vec({0}), vec({2})};
  std::array<double, 3> counts{};
  const int rounds = 20000;
  for (int r = 0; r < rounds; ++r) {
    const auto v = simulate_votes(l, m, rng);
    CHECK(v[0] + v[1] + v[2] == 4);
    for (std::size_t i = 0; i < 3; ++i) counts[i] += v[i];
  }
  const double z = 2.0 * std::exp(2.0) + std::exp(4.0);
  CHECK(counts[2] / (4.0 * rounds) == doctest::Approx(std::exp(4.0) / z).epsilon(0.02));
  CHECK(counts[0] / (4.0 * rounds) == doctest::Approx(std::exp(2.0) / z).epsilon(0.05));
}

TEST_CASE("simulated annotation sets") {
  const SynthWorld w = small_world(3);
  const auto a = simulate_annotations(w, 200, default_annotator(w), 9);
  const auto b = simulate_annotations(w, 200, default_annotator(w), 9);
  REQUIRE(a.size() == 200);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image_ids == b[i].image_ids);
    CHECK(a[i].votes == b[i].votes);
    CHECK(a[i].votes[0] + a[i].votes[1] + a[i].votes[2] == 4);
    CHECK(a[i].image_ids[0] != a[i].image_ids[1]);
    CHECK(a[i].image_ids[1] != a[i].image_ids[2]);
    CHECK(a[i].image_ids[0] != a[i].image_ids[2]);
    ids.insert(a[i].triplet_id);
  }
  CHECK(ids.size() == 200);
  const auto sets = select_constraints(a, {a[5].triplet_id, a[0].triplet_id}, Case3Mode::kPaperLiteral);
  CHECK(sets[0].triplet_id == a[5].triplet_id);
  CHECK_THROWS_AS(select_constraints(a, {"nope"}, Case3Mode::kPaperLiteral), Error);
  CHECK(default_annotator(w).weights(0) == 3.0);
}

TEST_CASE("net diversity change") {
  const NetChange c = net_diversity_change(std::vector<double>{2, 1, 1, 5}, std::vector<double>{1, 1, 2, 4});
  CHECK(c.wins == 2);
  CHECK(c.neutral == 1);
  CHECK(c.losses == 1);
  CHECK(c.net_change == doctest::Approx(0.25));
  // Sample sd of {1,0,-1,1} around 0.25 is sqrt(2.75/3).
  CHECK(c.ci95 == doctest::Approx(1.96 * std::sqrt(2.75 / 3.0) / 2.0));
  const NetChange eps = net_diversity_change(std::vector<double>{1.05}, std::vector<double>{1.0}, 0.1);
  CHECK(eps.neutral == 1);
  CHECK(eps.ci95 == 0.0);
  CHECK_THROWS_AS(net_diversity_change(std::vector<double>{}, std::vector<double>{}), Error);
  CHECK_THROWS_AS(net_diversity_change(std::vector<double>{1}, std::vector<double>{1, 2}), Error);

  const std::vector<std::vector<std::string>> d = {{"a", "b", "c"}}, base = {{"a"}};
  const auto size_oracle = [](const std::vector<std::string>& s) { return static_cast<double>(s.size()); };
  CHECK(net_diversity_change(d, base, size_oracle).net_change == 1.0);
}

TEST_CASE("method names") {
  for (auto k : {BaselineKind::kRandom, BaselineKind::kTwoAttribute, BaselineKind::kRawEmbedding,
                 BaselineKind::kTextDerivedOnly, BaselineKind::kPerceptionAlignedOnly, BaselineKind::kPaths})
    CHECK(parse_baseline_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_baseline_kind("best"), Error);
}

TEST_CASE("query pools") {
  const SynthWorld w = small_world(4);
  QueryConfig qc;
  qc.count = 40;
  qc.seed = 2;
  const auto qs = generate_queries(w, qc);
  REQUIRE(qs.size() == 40);
  std::size_t minority = 0, total = 0;
  for (const auto& q : qs) {
    REQUIRE(q.candidates.size() == 100);
    CHECK(q.relevance.size() == 100);
    CHECK(q.candidates.raw.rows() == 100);
    CHECK(q.candidates.latents.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(q.relevance[i] >= 0.0);
      CHECK(q.relevance[i] <= 1.0);
      minority += q.candidates.latents[i].person(0) < -0.4;
      ++total;
    }
  }
  const double frac = static_cast<double>(minority) / static_cast<double>(total);
  CHECK(frac > 0.05);
  CHECK(frac < 0.3);
  const auto again = generate_queries(w, qc);
  CHECK(again[7].candidates.raw == qs[7].candidates.raw);
  CHECK(again[7].relevance == qs[7].relevance);
  qc.minority_max = 1.5;
  CHECK_THROWS_AS(generate_queries(w, qc), Error);
}

TEST_CASE("baselines that need no training") {
  const SynthWorld w = small_world(5);
  const TrainedArtifacts none;
  const ImageSet all = world_images(w);
  CHECK(all.size() == 300);

  const Baseline raw = baseline_representation(BaselineKind::kRawEmbedding, w, none);
  CHECK(raw.represent(all) == all.raw);
  const Baseline two = baseline_representation(BaselineKind::kTwoAttribute, w, none);
  const RowMatrix t = two.represent(all);
  CHECK(t.cols() == 2);
  CHECK(t(3, 0) == doctest::Approx(all.latents[3].person(1)));
  CHECK(baseline_representation(BaselineKind::kRandom, w, none).random_diversity());
  CHECK_THROWS_AS(baseline_representation(BaselineKind::kPaths, w, none), Error);
  CHECK_THROWS_AS(baseline_representation(BaselineKind::kTextDerivedOnly, w, none), Error);
}

TEST_CASE("evaluation report shape and reproducibility") {
  const SynthWorld w = small_world(6);
  QueryConfig qc;
  qc.count = 8;
  const auto qs = generate_queries(w, qc);
  const TrainedArtifacts none;
  const std::vector<Baseline> methods = {baseline_representation(BaselineKind::kRandom, w, none),
                                         baseline_representation(BaselineKind::kTwoAttribute, w, none)};
  EvalConfig ec;
  ec.alphas = {0.3, 0.7};
  ec.seed = 4;
  const EvalReport r = evaluate_methods(w, qs, methods, ec);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.find("two-attribute", 0.7) != nullptr);
  CHECK(r.find("paths", 0.7) == nullptr);
  for (const auto& row : r.rows) CHECK(row.change.wins + row.change.neutral + row.change.losses == 8);
  const EvalReport again = evaluate_methods(w, qs, methods, ec);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again.rows[i].change.net_change == r.rows[i].change.net_change);
  // Alpha 0 reproduces the baseline: every query neutral.
  ec.alphas = {0.0};
  for (const auto& row : evaluate_methods(w, qs, methods, ec).rows) CHECK(row.change.neutral == 8);

  std::ostringstream csv;
  write_eval_csv(csv, r);
  CHECK(csv.str().rfind("method,alpha,net_change,wins,neutral,losses,ci95\nrandom,0.", 0) == 0);
  CHECK_THROWS_AS(evaluate_methods(w, {}, methods, ec), Error);
}

TEST_CASE("boost table picks the far image") {
  const SynthWorld w = small_world(7);
  const ImageSet all = world_images(w);
  ImageSet context, probes;
  for (std::size_t i = 0; i < 5; ++i) {
    context.ids.push_back(all.ids[i]);
    context.latents.push_back(all.latents[i]);
  }
  context.raw = all.raw.topRows(5);
  probes.ids = {"near", "far"};
  probes.raw.resize(2, all.raw.cols());
  probes.raw.row(0) = all.raw.row(0);
  probes.raw.row(1) = all.raw.row(0) * 1.0 + 10.0 * RowMatrix::Ones(1, all.raw.cols());
  probes.latents = {all.latents[0], all.latents[0]};
  const TrainedArtifacts none;
  const Baseline raw = baseline_representation(BaselineKind::kRawEmbedding, w, none);
  const BoostTable t = diversity_boost_table(probes, context, {{"raw", raw, calibrate(raw.represent(all))}});
  REQUIRE(t.argmax.size() == 1);
  CHECK(t.images[t.argmax[0]] == "far");
  CHECK(t.boosts[1][0] > t.boosts[0][0]);
  std::ostringstream csv;
  write_boost_csv(csv, t);
  CHECK(csv.str().find("argmax,far") != std::string::npos);

  const Baseline rnd = baseline_representation(BaselineKind::kRandom, w, none);
  CHECK_THROWS_AS(diversity_boost_table(probes, context, {{"rnd", rnd, {}}}), Error);
}

TEST_CASE("effective scales of the untrained projection follow the gains") {
  const SynthWorld w = small_world(8);
  const PeopleProjection people = extract_person_subspace(w.phrases, w.person_phrases, 12);
  const ProjectionPipeline p = compose_projection(people, extract_background_subspace(w.phrases, w.location_phrases, people, 3));
  const Vector s = effective_scales(w, p, Matrix::Identity(12, 12));
  REQUIRE(s.size() == 12);
  // Person directions outside the leaked ones keep their gain.
  for (Eigen::Index d = 0; d < 9; ++d) CHECK(s(d) == doctest::Approx(w.config.embedding_gains[static_cast<std::size_t>(d)]).epsilon(0.05));
  CHECK_THROWS_AS(effective_scales(w, p, Matrix::Identity(4, 4)), Error);
}
