#pragma once

#include "pdiv/alignment.hpp"
#include "pdiv/annotations.hpp"
#include "pdiv/ranking.hpp"
#include "pdiv/subspace.hpp"
#include "pdiv/synth_world.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace pdiv {

/// Simulated annotator: picks the image whose summed weighted latent distance
/// to the other two is largest, through a softmax at `temperature`.
struct AnnotatorModel {
  Vector weights;
  double temperature = 0.3;
};

AnnotatorModel default_annotator(const SynthWorld& world);

/// sqrt(Σ (w_d (a_d − b_d))²)
double weighted_distance(const Vector& a, const Vector& b, const Vector& weights);

/// Four votes over three person latents. Temperature 0 is a deterministic
/// argmax with lowest-index tie-break.
std::array<int, 3> simulate_votes(const std::array<Vector, 3>& latents, const AnnotatorModel& model,
                                  std::mt19937_64& rng);

TripletAnnotation simulate_annotation(std::string triplet_id, const std::array<std::string, 3>& ids,
                                      const std::array<Vector, 3>& latents, const AnnotatorModel& model,
                                      std::mt19937_64& rng);

/// `count` triplets of distinct world images drawn uniformly under `seed`.
std::vector<TripletAnnotation> simulate_annotations(const SynthWorld& world, std::size_t count,
                                                    const AnnotatorModel& model, std::uint64_t seed);

/// Mean pairwise weighted distance between person latents.
double set_diversity(const std::vector<Vector>& person_latents, const Vector& weights);
double set_diversity_oracle(const std::vector<std::string>& ids, const SynthWorld& world,
                            const Vector& weights);

struct NetChange {
  double net_change = 0.0;
  std::size_t wins = 0;
  std::size_t neutral = 0;
  std::size_t losses = 0;
  double ci95 = 0.0;  // normal-approximation half-width
};

/// +1 when oracle(diversified) > oracle(baseline) + epsilon, −1 when below by
/// more than epsilon, else 0; averaged over the paired sets.
NetChange net_diversity_change(const std::vector<std::vector<std::string>>& diversified,
                               const std::vector<std::vector<std::string>>& baseline,
                               const std::function<double(const std::vector<std::string>&)>& oracle,
                               double epsilon = 1e-6);
/// Same, from already-evaluated oracle values.
NetChange net_diversity_change(const std::vector<double>& diversified, const std::vector<double>& baseline,
                               double epsilon = 1e-6);

/// A set of images with raw embeddings and their generating latents.
struct ImageSet {
  std::vector<std::string> ids;
  RowMatrix raw;
  std::vector<ImageLatent> latents;

  std::size_t size() const { return ids.size(); }
};

ImageSet world_images(const SynthWorld& world);

enum class BaselineKind {
  kRandom,
  kTwoAttribute,
  kRawEmbedding,
  kTextDerivedOnly,
  kPerceptionAlignedOnly,
  kPaths,
};
std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(std::string_view text);

struct TrainedArtifacts {
  const ProjectionPipeline* pipeline = nullptr;
  const TrainedAdapter* paths = nullptr;            // multiplicative adapter
  const TrainedAdapter* perception_only = nullptr;  // ambient × d_p adapter
};

struct Baseline {
  BaselineKind kind = BaselineKind::kRawEmbedding;
  std::size_t dimension = 0;  // 0 for RANDOM
  std::function<RowMatrix(const ImageSet&)> represent;
  bool random_diversity() const { return kind == BaselineKind::kRandom; }
};

Baseline baseline_representation(BaselineKind kind, const SynthWorld& world, const TrainedArtifacts& artifacts);

struct BoostMethod {
  std::string name;
  Baseline baseline;
  CalibrationStats stats;
};

struct BoostTable {
  std::vector<std::string> methods;
  std::vector<std::string> images;
  std::vector<std::vector<double>> boosts;  // [image][method]
  std::vector<std::size_t> argmax;          // per method, index into images
};

/// Marginal diversity of each probe image against the context set under each
/// method's representation.
BoostTable diversity_boost_table(const ImageSet& probes, const ImageSet& context,
                                 const std::vector<BoostMethod>& methods);

void write_boost_csv(std::ostream& out, const BoostTable& table);

/// Candidate pools: a majority group close together on the most salient
/// attribute and a minority group far from it that is tightly clustered on the
/// two designated attributes.
struct QueryConfig {
  std::size_t count = 50;
  std::size_t candidates = 100;
  double minority_min = 0.05;
  double minority_max = 0.3;
  double majority_center = 0.7;
  double minority_center = -1.5;
  double cluster_spread = 0.3;
  double minority_shrink = 0.3;
  std::uint64_t seed = 0;
};

struct SynthQuery {
  std::string name;
  ImageSet candidates;
  std::vector<double> relevance;  // retrieval score, independent of the person latents
};

std::vector<SynthQuery> generate_queries(const SynthWorld& world, const QueryConfig& config);

struct EvalRow {
  std::string method;
  double alpha = 0.0;
  NetChange change;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  const EvalRow* find(std::string_view method, double alpha) const;
};

struct EvalConfig {
  std::vector<double> alphas = {0.5};
  std::size_t k = 9;
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
};

/// Diversified (MMR at each alpha) versus undiversified (alpha = 0) top-k,
/// judged by the weighted latent oracle. Each method is calibrated on the
/// world's images.
EvalReport evaluate_methods(const SynthWorld& world, const std::vector<SynthQuery>& queries,
                            const std::vector<Baseline>& methods, const EvalConfig& config);

void write_eval_csv(std::ostream& out, const EvalReport& report);

/// Everything needed for PATHS and the learned baselines on one world.
struct ArtifactConfig {
  std::size_t d_p = 12;
  std::size_t d_b = 3;
  BackgroundMode background_mode = BackgroundMode::kPhraseCentered;
  std::size_t annotation_count = 5000;
  Case3Mode case3_mode = Case3Mode::kPaperLiteral;
  TrainConfig train;
  bool train_perception_only = true;
  TrainConfig perception_train;
  std::uint64_t seed = 0;
};

struct WorldArtifacts {
  ProjectionPipeline pipeline;
  std::vector<TripletAnnotation> annotations;
  DatasetSplit split;
  std::vector<ConstraintSet> train_set;
  std::vector<ConstraintSet> val_set;
  std::vector<ConstraintSet> test_set;
  TrainedAdapter paths;
  std::optional<TrainedAdapter> perception_only;

  TrainedArtifacts view() const;
};

WorldArtifacts build_artifacts(const SynthWorld& world, const ArtifactConfig& config);

/// Constraint sets for the ids of one split part, in split order.
std::vector<ConstraintSet> select_constraints(const std::vector<TripletAnnotation>& annotations,
                                              const std::vector<std::string>& ids, Case3Mode mode);

/// Representation-space length of a unit change of each person latent.
Vector effective_scales(const SynthWorld& world, const ProjectionPipeline& pipeline, const Matrix& adapter);

}  // namespace pdiv
