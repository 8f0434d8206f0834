#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "pdiv/annotations.hpp"
#include "pdiv/error.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

using namespace pdiv;

namespace {

TripletAnnotation ann(std::array<int, 3> votes, std::string id = "t") {
  return {std::move(id), {"i1", "i2", "i3"}, votes, {}};
}

std::set<oracle::OConstraint> as_set(const ConstraintSet& s) {
  std::set<oracle::OConstraint> out;
  for (const auto& c : s.constraints) {
    const oracle::OEdge lo{c.low.i, c.low.j}, hi{c.high.i, c.high.j};
    out.insert(c.relation == Relation::kEqual ? oracle::equal(lo, hi) : oracle::less(lo, hi));
  }
  return out;
}

std::vector<TripletAnnotation> many(std::size_t n) {
  std::vector<TripletAnnotation> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(ann({4, 0, 0}, "t" + std::to_string(i)));
  return out;
}

}  // namespace

TEST_CASE("table rows") {
  using oracle::equal;
  using oracle::less;
  const oracle::OEdge e12{0, 1}, e13{0, 2}, e23{1, 2};
  SUBCASE("4,0,0") {
    const auto s = votes_to_constraints(ann({4, 0, 0}));
    CHECK(s.case_label == TripletCase::kCase1);
    CHECK(as_set(s) == std::set<oracle::OConstraint>{less(e12, e23), less(e13, e23), equal(e12, e13)});
  }
  SUBCASE("2,1,1 is the same set") {
    CHECK(as_set(votes_to_constraints(ann({2, 1, 1}))) == as_set(votes_to_constraints(ann({4, 0, 0}))));
  }
  SUBCASE("3,1,0") {
    const auto s = votes_to_constraints(ann({3, 1, 0}));
    CHECK(s.case_label == TripletCase::kCase2);
    CHECK(as_set(s) == std::set<oracle::OConstraint>{less(e12, e13), less(e13, e23)});
  }
  SUBCASE("0,0,4 relabels") {
    const auto s = votes_to_constraints(ann({0, 0, 4}));
    CHECK(s.case_label == TripletCase::kCase1);
    CHECK(as_set(s) == std::set<oracle::OConstraint>{less(e13, e12), less(e23, e12), equal(e13, e23)});
  }
  SUBCASE("2,2,0 both modes") {
    const auto lit = votes_to_constraints(ann({2, 2, 0}), Case3Mode::kPaperLiteral);
    CHECK(lit.case_label == TripletCase::kCase3);
    CHECK(as_set(lit) == std::set<oracle::OConstraint>{less(e13, e12), less(e23, e12)});
    const auto geo = votes_to_constraints(ann({2, 2, 0}), Case3Mode::kCentroidGeometric);
    CHECK(as_set(geo) == std::set<oracle::OConstraint>{less(e12, e13), less(e12, e23)});
  }
}

TEST_CASE("all 15 patterns against the oracle, acyclic") {
  for (bool centroid : {false, true}) {
    const Case3Mode mode = centroid ? Case3Mode::kCentroidGeometric : Case3Mode::kPaperLiteral;
    for (const auto& v : oracle::all_vote_patterns()) {
      const auto s = votes_to_constraints(ann(v), mode);
      const auto want = oracle::expected_conversion(v, centroid);
      CHECK(static_cast<int>(s.case_label) + 1 == want.case_number);
      CHECK(as_set(s) == want.constraints);
      CHECK(s.constraints.size() >= 2);
      CHECK(s.constraints.size() <= 3);
      // Strict relations over three edges: no edge is both above and below
      // another through a chain (a 3-node graph is acyclic iff no 2-cycles and
      // no 3-cycles).
      std::map<int, std::set<int>> up;
      for (const auto& c : s.constraints)
        if (c.relation == Relation::kStrictlyLess) up[edge_index(c.low)].insert(edge_index(c.high));
      for (const auto& [a, bs] : up)
        for (int b : bs) {
          CHECK(!up[b].count(a));
          for (int c : up[b]) CHECK(!up[c].count(a));
        }
    }
  }
}

TEST_CASE("anchored signs follow the transitive closure") {
  // CASE2 with X=0, Y=1, Z=2: S(01) < S(02) < S(12).
  const auto s = votes_to_constraints(ann({3, 1, 0}));
  const auto signs = s.anchored_signs();
  // Anchor 0 compares S(0,1) with S(0,2): less, so −1.
  CHECK(signs[0].anchor == 0);
  CHECK(signs[0].first == 1);
  CHECK(signs[0].second == 2);
  CHECK(signs[0].sign == -1);
  // Anchor 1 compares S(1,0) with S(1,2): S(01) < S(12) only by transitivity.
  CHECK(signs[1].sign == -1);
  // Anchor 2 compares S(2,0) with S(2,1): S(02) < S(12).
  CHECK(signs[2].sign == -1);

  const auto c1 = votes_to_constraints(ann({4, 0, 0})).anchored_signs();
  CHECK(c1[0].sign == 0);  // the EQUAL pair
  CHECK(c1[1].sign == -1);
  CHECK(c1[2].sign == -1);
}

TEST_CASE("vote validation") {
  CHECK_THROWS_AS(votes_to_constraints(ann({2, 1, 0})), Error);
  CHECK_THROWS_AS(votes_to_constraints(ann({5, -1, 0})), Error);
  CHECK(parse_case3_mode("centroid-geometric") == Case3Mode::kCentroidGeometric);
  CHECK(to_string(Case3Mode::kPaperLiteral) == "paper-literal");
  CHECK_THROWS_AS(parse_case3_mode("x"), Error);
  CHECK(to_string(TripletCase::kCase2) == "CASE2");
  CHECK(edge_index(make_edge(2, 1)) == 2);
  CHECK_THROWS_AS(make_edge(1, 1), Error);
}

TEST_CASE("split sizes and partition") {
  const auto d = split_dataset(many(1000), 1);
  CHECK(d.train.size() == 850);
  CHECK(d.validation.size() == 100);
  CHECK(d.test.size() == 50);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto a = many(20 + seed);
    const auto s = split_dataset(a, seed);
    const auto again = split_dataset(a, seed);
    CHECK(s.train == again.train);
    CHECK(s.test == again.test);
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.validation.begin(), s.validation.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == a.size());
    CHECK(s.train.size() + s.validation.size() + s.test.size() == a.size());
    const double n = static_cast<double>(a.size());
    CHECK(std::abs(static_cast<double>(s.validation.size()) - 0.10 * n) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.test.size()) - 0.05 * n) <= 1.0);
  }
  CHECK(split_dataset(many(200), 1).train != split_dataset(many(200), 2).train);
  CHECK_THROWS_AS(split_dataset(many(19), 1), Error);
}

TEST_CASE("consensus") {
  CHECK(consensus_stats(std::vector<std::vector<int>>{{0, 0, 0, 0}, {1, 1, 1, 1}}).percent_full_agreement == 100.0);
  const auto s = consensus_stats(std::vector<std::vector<int>>{{0, 0, 0, 0}, {1, 1, 1, 1}, {2, 2, 2, 2}, {0, 1, 0, 0}});
  CHECK(s.percent_full_agreement == 75.0);
  CHECK(s.agreement_counts == std::vector<int>{4, 4, 4, 3});
  CHECK_THROWS_AS(consensus_stats(std::vector<std::vector<int>>{}), Error);
  CHECK_THROWS_AS(consensus_stats(std::vector<std::vector<int>>{{1}}), Error);
  const std::vector<TripletAnnotation> a = {ann({4, 0, 0}), ann({3, 1, 0}, "u")};
  CHECK(consensus_stats(a).percent_full_agreement == 50.0);
}

TEST_CASE("annotation file round trip") {
  std::vector<TripletAnnotation> a = {ann({1, 2, 1}, "x"), ann({0, 0, 4}, "y")};
  a[0].regions = {"r1", "r2", "r3", "r4"};
  const auto path = std::filesystem::temp_directory_path() / "pdiv_ann.jsonl";
  save_annotations(path, a);
  const auto back = load_annotations(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].votes == a[0].votes);
  CHECK(back[0].regions == a[0].regions);
  CHECK(back[1].image_ids == a[1].image_ids);
  std::filesystem::remove(path);

  std::istringstream bad_votes(R"({"triplet_id":"a","image_a":"x","image_b":"y","image_c":"z","votes":[1,2]})");
  CHECK_THROWS_AS(parse_annotations(bad_votes), Error);
  std::istringstream dup_ids(R"({"triplet_id":"a","image_a":"x","image_b":"x","image_c":"z","votes":[1,2,1]})");
  CHECK_THROWS_AS(parse_annotations(dup_ids), Error);
  std::istringstream good(R"({"triplet_id":"a","image_a":"x","image_b":"y","image_c":"z","votes":[1,2,1]})");
  CHECK(parse_annotations(good).size() == 1);
}
