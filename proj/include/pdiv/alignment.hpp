#pragma once

#include "pdiv/annotations.hpp"
#include "pdiv/embedding.hpp"
#include "pdiv/kernels.hpp"
#include "pdiv/linalg.hpp"
#include "pdiv/subspace.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdiv {

enum class AdapterKind { kPerceptionOnly, kMultiplicative, kAdditive };
std::string_view to_string(AdapterKind kind);
AdapterKind parse_adapter_kind(std::string_view text);

/// Shape and regularization target of the learned matrix M. Representations
/// are row vectors: e = u·M, where u is the raw embedding (PERCEPTION_ONLY,
/// ADDITIVE) or the projected embedding raw·Pᵀ (MULTIPLICATIVE).
struct AdapterVariant {
  AdapterKind kind = AdapterKind::kMultiplicative;
  Matrix target;

  Eigen::Index rows() const { return target.rows(); }
  Eigen::Index cols() const { return target.cols(); }
  bool needs_projection() const { return kind != AdapterKind::kPerceptionOnly; }
};

/// `pipeline` may be null only for PERCEPTION_ONLY, which then needs `d_p`.
AdapterVariant make_variant(AdapterKind kind, std::size_t ambient_dim,
                            const ProjectionPipeline* pipeline, std::size_t d_p = 12);

struct TrainConfig {
  std::size_t batch_size = 1000;
  std::size_t steps = 60000;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double margin_beta = 0.0;
  double gamma = -1.0;   // < 0 → 1/(rows×cols)
  double lambda = -1.0;  // < 0 → 1/(rows×cols)
  std::size_t eval_every = 600;
  std::uint64_t seed = 0;

  /// Copy with the regularizer weights filled in for `variant`.
  TrainConfig resolved(const AdapterVariant& variant) const;
  void validate() const;
};

struct HistoryRow {
  std::size_t step = 0;
  double train_loss = 0.0;
  double val_error = 0.0;
};

struct TrainedAdapter {
  AdapterVariant variant;
  Matrix matrix;
  std::vector<HistoryRow> history;
  std::size_t best_checkpoint_step = 0;
};

/// Rows fed to the adapter for each row of `raw`.
RowMatrix adapter_inputs(AdapterKind kind, const RowMatrix& raw, const ProjectionPipeline* pipeline);

/// e(I) for every row of `raw`.
RowMatrix embed_rows(const TrainedAdapter& adapter, const RowMatrix& raw,
                     const ProjectionPipeline* pipeline);

double similarity_hat(std::span<const double> a, std::span<const double> b);

/// max(−gt_sign·(s_hat_ab − s_hat_ac) + beta, 0)
double anchored_triplet_loss(int gt_sign, double s_hat_ab, double s_hat_ac, double beta);

/// γ·|M − T|₁ + λ·|M − T|²_F
double regularization_loss(const Matrix& m, const Matrix& target, double gamma, double lambda);

/// The three anchored terms of one triplet plus the regularizers. `inputs`
/// are the adapter inputs of the triplet's images, in constraint-set order.
double triplet_total_loss(const std::array<Vector, 3>& inputs, const ConstraintSet& constraints,
                          const Matrix& m, const AdapterVariant& variant, double gamma,
                          double lambda, double beta = 0.0);

/// Triplets gathered for one optimization step: their adapter inputs and the
/// three anchored terms of each triplet (sign-0 terms included).
struct TripletBatch {
  RowMatrix inputs;
  std::vector<kernels::AnchoredTerm> terms;
  std::size_t triplet_count = 0;
};

/// Resolves each constraint set's images in `inputs_by_id` (adapter inputs,
/// one row per id) and emits its anchored terms.
TripletBatch make_batch(const EmbeddingTable& inputs_by_id, const std::vector<ConstraintSet>& sets);

/// Mean hinge loss per triplet plus regularizers (config must be resolved).
double batch_loss(const TripletBatch& batch, const Matrix& m, const AdapterVariant& variant,
                  const TrainConfig& config);
Matrix loss_gradient(const TripletBatch& batch, const Matrix& m, const AdapterVariant& variant,
                     const TrainConfig& config);

/// Adam from the regularization target; returns the best-validation checkpoint.
/// `images` holds raw embeddings for every id referenced by the two sets.
TrainedAdapter train_adapter(const EmbeddingTable& images, const std::vector<ConstraintSet>& train_set,
                             const std::vector<ConstraintSet>& val_set,
                             const ProjectionPipeline* projection, const AdapterVariant& variant,
                             const TrainConfig& config);

/// True when every strict constraint holds strictly under Ŝ = 1 − distance.
bool triplet_correct(const ConstraintSet& constraints, const std::array<std::span<const double>, 3>& reps);

using EmbedFn = std::function<Vector(std::string_view image_id)>;

double triplet_error(const std::vector<ConstraintSet>& dataset, const EmbedFn& embed);
/// Same, with representations looked up by id.
double triplet_error(const std::vector<ConstraintSet>& dataset, const EmbeddingTable& representations);

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history);

}  // namespace pdiv
