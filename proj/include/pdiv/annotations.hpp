#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pdiv {

/// Three images and how many of the four annotators picked each one as most
/// different.
struct TripletAnnotation {
  std::string triplet_id;
  std::array<std::string, 3> image_ids;
  std::array<int, 3> votes{};
  std::vector<std::string> regions;  // empty, or one tag per vote (4)
};

/// Unordered pair of positions within a triplet, stored with i < j.
struct Edge {
  int i = 0;
  int j = 1;
  friend bool operator==(const Edge&, const Edge&) = default;
};

Edge make_edge(int a, int b);
int edge_index(const Edge& e);  // (0,1) → 0, (0,2) → 1, (1,2) → 2

enum class Relation { kStrictlyLess, kEqual };

/// S(low) < S(high), or S(low) = S(high).
struct SimilarityConstraint {
  Edge low;
  Edge high;
  Relation relation = Relation::kStrictlyLess;
};

enum class TripletCase { kCase1, kCase2, kCase3 };
std::string_view to_string(TripletCase c);

/// How a {2, 2, 0} vote split is turned into inequalities. kPaperLiteral makes
/// the tied pair the most similar edge; kCentroidGeometric makes it the least
/// similar.
enum class Case3Mode { kPaperLiteral, kCentroidGeometric };
std::string_view to_string(Case3Mode mode);
Case3Mode parse_case3_mode(std::string_view text);

struct AnchoredSign {
  int anchor = 0;
  int first = 1;
  int second = 2;
  int sign = 0;  // sgn(S(anchor, first) − S(anchor, second)); 0 when undetermined
};

struct ConstraintSet {
  std::string triplet_id;
  std::array<std::string, 3> image_ids;
  TripletCase case_label = TripletCase::kCase1;
  std::vector<SimilarityConstraint> constraints;

  /// One entry per anchor position, derived from the transitive closure of
  /// the constraints.
  std::array<AnchoredSign, 3> anchored_signs() const;
};

ConstraintSet votes_to_constraints(const TripletAnnotation& annotation,
                                   Case3Mode mode = Case3Mode::kPaperLiteral);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

/// Seeded uniform shuffle, then 85% / 10% / 5% (validation and test sizes
/// rounded, remainder to train).
DatasetSplit split_dataset(const std::vector<TripletAnnotation>& annotations, std::uint64_t seed);

struct ConsensusStats {
  double percent_full_agreement = 0.0;
  std::vector<int> agreement_counts;  // votes for the modal choice, per task
};

/// `tasks[t]` lists the image index chosen by each annotator of task t.
ConsensusStats consensus_stats(const std::vector<std::vector<int>>& tasks);
ConsensusStats consensus_stats(const std::vector<TripletAnnotation>& annotations);

std::vector<TripletAnnotation> parse_annotations(std::istream& in);
std::vector<TripletAnnotation> load_annotations(const std::filesystem::path& path);
std::string annotation_to_json(const TripletAnnotation& annotation);
void save_annotations(const std::filesystem::path& path, const std::vector<TripletAnnotation>& annotations);

}  // namespace pdiv
