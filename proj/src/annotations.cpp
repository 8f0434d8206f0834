#include "pdiv/annotations.hpp"

#include "pdiv/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace pdiv {

Edge make_edge(int a, int b) {
  require(a != b && a >= 0 && b >= 0 && a < 3 && b < 3, ErrorCode::kInvalidArgument,
          "edge endpoints must be distinct triplet positions");
  return a < b ? Edge{a, b} : Edge{b, a};
}

int edge_index(const Edge& e) { return e.i + e.j - 1; }

std::string_view to_string(TripletCase c) {
  switch (c) {
    case TripletCase::kCase1: return "CASE1";
    case TripletCase::kCase2: return "CASE2";
    case TripletCase::kCase3: return "CASE3";
  }
  return "?";
}

std::string_view to_string(Case3Mode mode) {
  return mode == Case3Mode::kPaperLiteral ? "paper-literal" : "centroid-geometric";
}

Case3Mode parse_case3_mode(std::string_view text) {
  if (text == "paper-literal") return Case3Mode::kPaperLiteral;
  if (text == "centroid-geometric") return Case3Mode::kCentroidGeometric;
  fail(ErrorCode::kInvalidArgument, "unknown case-3 mode '" + std::string(text) + "'");
}

std::array<AnchoredSign, 3> ConstraintSet::anchored_signs() const {
  // less[e][f]: S(e) < S(f) is implied; equal[e][f]: S(e) = S(f) is implied.
  bool less[3][3] = {};
  bool equal[3][3] = {};
  for (int e = 0; e < 3; ++e) equal[e][e] = true;
  for (const auto& c : constraints) {
    const int lo = edge_index(c.low);
    const int hi = edge_index(c.high);
    if (c.relation == Relation::kStrictlyLess) {
      less[lo][hi] = true;
    } else {
      equal[lo][hi] = equal[hi][lo] = true;
    }
  }
  for (int pass = 0; pass < 3; ++pass) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 3; ++c) {
          if ((less[a][b] && (less[b][c] || equal[b][c])) || (equal[a][b] && less[b][c])) {
            less[a][c] = true;
          }
          if (equal[a][b] && equal[b][c]) equal[a][c] = true;
        }
      }
    }
  }
  std::array<AnchoredSign, 3> out;
  for (int anchor = 0; anchor < 3; ++anchor) {
    const int first = anchor == 0 ? 1 : 0;
    const int second = anchor == 2 ? 1 : 2;
    const int ef = edge_index(make_edge(anchor, first));
    const int es = edge_index(make_edge(anchor, second));
    int sign = 0;
    if (less[ef][es]) sign = -1;
    if (less[es][ef]) sign = 1;
    out[static_cast<std::size_t>(anchor)] = {anchor, first, second, sign};
  }
  return out;
}

ConstraintSet votes_to_constraints(const TripletAnnotation& annotation, Case3Mode mode) {
  const auto& v = annotation.votes;
  for (int x : v) require(x >= 0, ErrorCode::kInvalidArgument, "votes must be non-negative");
  require(v[0] + v[1] + v[2] == 4, ErrorCode::kInvalidArgument,
          "triplet '" + annotation.triplet_id + "' must have exactly 4 votes");

  // Positions sorted by votes descending; equal counts keep index order.
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return v[static_cast<std::size_t>(a)] > v[static_cast<std::size_t>(b)]; });
  const int top = v[static_cast<std::size_t>(order[0])];
  const int mid = v[static_cast<std::size_t>(order[1])];

  ConstraintSet out;
  out.triplet_id = annotation.triplet_id;
  out.image_ids = annotation.image_ids;
  const auto strict = [](Edge lo, Edge hi) {
    return SimilarityConstraint{lo, hi, Relation::kStrictlyLess};
  };
  if (top == 4 || (top == 2 && mid == 1)) {
    // {4,0,0} or {2,1,1}: X most different, Y and Z equally similar to it.
    const int x = order[0], y = order[1], z = order[2];
    out.case_label = TripletCase::kCase1;
    out.constraints = {strict(make_edge(x, y), make_edge(y, z)),
                       strict(make_edge(x, z), make_edge(y, z)),
                       {make_edge(x, y), make_edge(x, z), Relation::kEqual}};
  } else if (top == 3) {
    // {3,1,0}: X most different, Y next.
    const int x = order[0], y = order[1], z = order[2];
    out.case_label = TripletCase::kCase2;
    out.constraints = {strict(make_edge(x, y), make_edge(x, z)),
                       strict(make_edge(x, z), make_edge(y, z))};
  } else {
    // {2,2,0}: X and Y tied as most different.
    const int x = std::min(order[0], order[1]);
    const int y = std::max(order[0], order[1]);
    const int z = order[2];
    out.case_label = TripletCase::kCase3;
    if (mode == Case3Mode::kPaperLiteral) {
      out.constraints = {strict(make_edge(x, z), make_edge(x, y)),
                         strict(make_edge(y, z), make_edge(x, y))};
    } else {
      out.constraints = {strict(make_edge(x, y), make_edge(x, z)),
                         strict(make_edge(x, y), make_edge(y, z))};
    }
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<TripletAnnotation>& annotations, std::uint64_t seed) {
  const std::size_t n = annotations.size();
  require(n >= 20, ErrorCode::kInvalidArgument,
          "split needs at least 20 annotations, got " + std::to_string(n));
  std::vector<std::string> ids;
  ids.reserve(n);
  std::set<std::string> seen;
  for (const auto& a : annotations) {
    require(seen.insert(a.triplet_id).second, ErrorCode::kInvalidArgument,
            "duplicate triplet id '" + a.triplet_id + "'");
    ids.push_back(a.triplet_id);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(ids[i], ids[pick(rng)]);
  }
  const auto n_val = static_cast<std::size_t>(std::lround(0.10 * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::lround(0.05 * static_cast<double>(n)));
  const std::size_t n_train = n - n_val - n_test;
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                          ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return split;
}

ConsensusStats consensus_stats(const std::vector<std::vector<int>>& tasks) {
  require(!tasks.empty(), ErrorCode::kInvalidArgument, "consensus needs at least one task");
  ConsensusStats stats;
  std::size_t unanimous = 0;
  for (const auto& votes : tasks) {
    require(votes.size() >= 2, ErrorCode::kInvalidArgument, "each task needs at least 2 votes");
    int best = 0;
    for (int choice : votes) {
      best = std::max(best, static_cast<int>(std::count(votes.begin(), votes.end(), choice)));
    }
    stats.agreement_counts.push_back(best);
    if (static_cast<std::size_t>(best) == votes.size()) ++unanimous;
  }
  stats.percent_full_agreement = 100.0 * static_cast<double>(unanimous) / static_cast<double>(tasks.size());
  return stats;
}

ConsensusStats consensus_stats(const std::vector<TripletAnnotation>& annotations) {
  std::vector<std::vector<int>> tasks;
  tasks.reserve(annotations.size());
  for (const auto& a : annotations) {
    std::vector<int> choices;
    for (int pos = 0; pos < 3; ++pos) {
      for (int k = 0; k < a.votes[static_cast<std::size_t>(pos)]; ++k) choices.push_back(pos);
    }
    tasks.push_back(std::move(choices));
  }
  return consensus_stats(tasks);
}

std::string annotation_to_json(const TripletAnnotation& a) {
  nlohmann::ordered_json j;
  j["triplet_id"] = a.triplet_id;
  j["image_a"] = a.image_ids[0];
  j["image_b"] = a.image_ids[1];
  j["image_c"] = a.image_ids[2];
  j["votes"] = a.votes;
  if (!a.regions.empty()) j["regions"] = a.regions;
  return j.dump();
}

std::vector<TripletAnnotation> parse_annotations(std::istream& in) {
  std::vector<TripletAnnotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "annotation line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
    try {
      TripletAnnotation a;
      a.triplet_id = j.at("triplet_id").get<std::string>();
      a.image_ids = {j.at("image_a").get<std::string>(), j.at("image_b").get<std::string>(),
                     j.at("image_c").get<std::string>()};
      const auto votes = j.at("votes").get<std::vector<int>>();
      require(votes.size() == 3, ErrorCode::kParse, where + ": votes must have length 3");
      a.votes = {votes[0], votes[1], votes[2]};
      if (j.contains("regions")) {
        a.regions = j["regions"].get<std::vector<std::string>>();
        require(a.regions.size() == 4, ErrorCode::kParse, where + ": regions must have length 4");
      }
      require(a.image_ids[0] != a.image_ids[1] && a.image_ids[0] != a.image_ids[2] &&
                  a.image_ids[1] != a.image_ids[2],
              ErrorCode::kInvalidArgument, where + ": image ids must be distinct");
      out.push_back(std::move(a));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
  }
  return out;
}

std::vector<TripletAnnotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open annotations file " + path.string());
  return parse_annotations(in);
}

void save_annotations(const std::filesystem::path& path, const std::vector<TripletAnnotation>& annotations) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write annotations file " + path.string());
  for (const auto& a : annotations) out << annotation_to_json(a) << '\n';
}

}  // namespace pdiv
