#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "convert.hpp"
#include "pdiv/error.hpp"
#include "pdiv/serialize.hpp"
#include "pdiv/synth_world.hpp"

#include <filesystem>
#include <random>

using namespace pdiv;
namespace fs = std::filesystem;

namespace {

ProjectionPipeline world_pipeline() {
  SynthWorldConfig c;
  c.seed = 31;
  c.image_count = 10;
  const SynthWorld w = generate_world(c);
  const PeopleProjection people = extract_person_subspace(w.phrases, w.person_phrases, 12);
  ProjectionPipeline p = compose_projection(people, extract_background_subspace(w.phrases, w.location_phrases, people, 3));
  p.provenance.corpus_ids = {"phrases-a", "images-b"};
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("pipeline round trip is bit-exact") {
  const ProjectionPipeline p = world_pipeline();
  const auto path = fs::temp_directory_path() / "pdiv_pipe.json";
  save_pipeline(path, p);
  const ProjectionPipeline q = load_pipeline(path);
  CHECK(q.composed == p.composed);
  CHECK(q.people.matrix == p.people.matrix);
  CHECK(q.background.directions == p.background.directions);
  CHECK(q.background.eigenvalues == p.background.eigenvalues);
  CHECK(q.provenance.corpus_ids == p.provenance.corpus_ids);
  CHECK(q.provenance.created_at == p.provenance.created_at);
  CHECK(q.provenance.d_b == 3);
  CHECK(pipeline_to_json(q) == pipeline_to_json(p));
  fs::remove(path);
}

TEST_CASE("adapter round trip is bit-exact") {
  std::mt19937_64 rng(1);
  TrainedAdapter a;
  a.variant.kind = AdapterKind::kAdditive;
  a.variant.target = Matrix(testing_support::gaussian_rows(7, 3, rng));
  a.matrix = Matrix(testing_support::gaussian_rows(7, 3, rng)) * (1.0 / 3.0);
  a.history = {{0, 1.0 / 7.0, 0.5}, {600, 0.1, 0.25}};
  a.best_checkpoint_step = 600;
  const TrainedAdapter b = adapter_from_json(adapter_to_json(a));
  CHECK(b.variant.kind == a.variant.kind);
  CHECK(b.variant.target == a.variant.target);
  CHECK(b.matrix == a.matrix);
  REQUIRE(b.history.size() == 2);
  CHECK(b.history[0].train_loss == a.history[0].train_loss);
  CHECK(b.best_checkpoint_step == 600);

  const auto path = fs::temp_directory_path() / "pdiv_adapter.json";
  save_adapter(path, a);
  CHECK(load_adapter(path).matrix == a.matrix);
  fs::remove(path);
}

TEST_CASE("malformed documents") {
  CHECK(code_of([] { pipeline_from_json("{"); }) == ErrorCode::kParse);
  CHECK(code_of([] { pipeline_from_json(R"({"format":"pdiv-adapter"})"); }) == ErrorCode::kParse);
  CHECK(code_of([] { adapter_from_json(R"({"format":"pdiv-adapter","variant":"additive"})"); }) == ErrorCode::kParse);
  // Matrix data of the wrong length.
  TrainedAdapter a;
  a.variant.kind = AdapterKind::kMultiplicative;
  a.variant.target = Matrix::Identity(2, 2);
  a.matrix = Matrix::Identity(2, 2);
  std::string text = adapter_to_json(a);
  const auto pos = text.find("\"matrix\"");
  REQUIRE(pos != std::string::npos);
  const auto data = text.find("[", pos);
  text.insert(data + 1, "9.0,");
  CHECK(code_of([&] { adapter_from_json(text); }) == ErrorCode::kParse);
  CHECK(code_of([] { load_adapter("/nonexistent/a.json"); }) == ErrorCode::kIo);
}

TEST_CASE("text files are replaced whole") {
  const auto dir = fs::temp_directory_path() / "pdiv_ser_dir";
  fs::create_directories(dir);
  const auto path = dir / "f.txt";
  write_text_file(path, "first");
  write_text_file(path, "second");
  CHECK(read_text_file(path) == "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  fs::remove_all(dir);
  CHECK(code_of([] { write_text_file("/nonexistent/dir/x.txt", "x"); }) == ErrorCode::kIo);
}
