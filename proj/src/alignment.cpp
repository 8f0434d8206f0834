#include "pdiv/alignment.hpp"

#include "pdiv/error.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <unordered_map>

namespace pdiv {

std::string_view to_string(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::kPerceptionOnly: return "perception-only";
    case AdapterKind::kMultiplicative: return "multiplicative";
    case AdapterKind::kAdditive: return "additive";
  }
  return "?";
}

AdapterKind parse_adapter_kind(std::string_view text) {
  if (text == "perception-only") return AdapterKind::kPerceptionOnly;
  if (text == "multiplicative") return AdapterKind::kMultiplicative;
  if (text == "additive") return AdapterKind::kAdditive;
  fail(ErrorCode::kInvalidArgument, "unknown adapter variant '" + std::string(text) + "'");
}

AdapterVariant make_variant(AdapterKind kind, std::size_t ambient_dim,
                            const ProjectionPipeline* pipeline, std::size_t d_p) {
  AdapterVariant v;
  v.kind = kind;
  const auto ambient = static_cast<Eigen::Index>(ambient_dim);
  if (kind == AdapterKind::kPerceptionOnly) {
    if (pipeline != nullptr) d_p = pipeline->output_dim();
    require(d_p > 0 && d_p <= ambient_dim, ErrorCode::kInvalidArgument,
            "perception-only output dimension must be in [1, ambient_dim]");
    v.target = Matrix::Identity(ambient, static_cast<Eigen::Index>(d_p));
    return v;
  }
  require(pipeline != nullptr, ErrorCode::kInvalidArgument,
          std::string(to_string(kind)) + " adapter requires a projection pipeline");
  require(pipeline->ambient_dim() == ambient_dim, ErrorCode::kDimensionMismatch,
          "projection ambient dimension does not match the embeddings");
  const auto out = static_cast<Eigen::Index>(pipeline->output_dim());
  v.target = kind == AdapterKind::kMultiplicative ? Matrix(Matrix::Identity(out, out))
                                                  : Matrix(pipeline->composed.transpose());
  return v;
}

TrainConfig TrainConfig::resolved(const AdapterVariant& variant) const {
  TrainConfig c = *this;
  const double uniform = 1.0 / static_cast<double>(variant.rows() * variant.cols());
  if (c.gamma < 0.0) c.gamma = uniform;
  if (c.lambda < 0.0) c.lambda = uniform;
  return c;
}

void TrainConfig::validate() const {
  require(batch_size > 0 && eval_every > 0, ErrorCode::kInvalidArgument,
          "batch_size and eval_every must be positive");
  require(learning_rate > 0.0 && adam_epsilon > 0.0, ErrorCode::kInvalidArgument,
          "learning rate and epsilon must be positive");
  require(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0,
          ErrorCode::kInvalidArgument, "Adam decay rates must lie in (0, 1)");
  require(margin_beta >= 0.0, ErrorCode::kInvalidArgument, "margin must be non-negative");
  require(gamma >= 0.0 && lambda >= 0.0, ErrorCode::kInvalidArgument,
          "regularizer weights must be non-negative once resolved");
}

RowMatrix adapter_inputs(AdapterKind kind, const RowMatrix& raw, const ProjectionPipeline* pipeline) {
  if (kind != AdapterKind::kMultiplicative) return raw;
  require(pipeline != nullptr, ErrorCode::kInvalidArgument,
          "multiplicative adapter requires a projection pipeline");
  return pipeline->apply(raw);
}

RowMatrix embed_rows(const TrainedAdapter& adapter, const RowMatrix& raw,
                     const ProjectionPipeline* pipeline) {
  const RowMatrix inputs = adapter_inputs(adapter.variant.kind, raw, pipeline);
  require(inputs.cols() == adapter.matrix.rows(), ErrorCode::kDimensionMismatch,
          "adapter input dimension does not match the embeddings");
  return inputs * adapter.matrix;
}

double similarity_hat(std::span<const double> a, std::span<const double> b) {
  return 1.0 - euclidean_distance(a, b);
}

double anchored_triplet_loss(int gt_sign, double s_hat_ab, double s_hat_ac, double beta) {
  return std::max(-static_cast<double>(gt_sign) * (s_hat_ab - s_hat_ac) + beta, 0.0);
}

double regularization_loss(const Matrix& m, const Matrix& target, double gamma, double lambda) {
  require(m.rows() == target.rows() && m.cols() == target.cols(), ErrorCode::kDimensionMismatch,
          "adapter shape does not match its regularization target");
  const Matrix diff = m - target;
  return gamma * diff.cwiseAbs().sum() + lambda * diff.squaredNorm();
}

double triplet_total_loss(const std::array<Vector, 3>& inputs, const ConstraintSet& constraints,
                          const Matrix& m, const AdapterVariant& variant, double gamma,
                          double lambda, double beta) {
  require(m.rows() == variant.rows() && m.cols() == variant.cols(), ErrorCode::kDimensionMismatch,
          "adapter shape does not match the variant");
  std::array<Vector, 3> reps;
  for (std::size_t i = 0; i < 3; ++i) {
    require(inputs[i].size() == m.rows(), ErrorCode::kDimensionMismatch,
            "triplet input dimension does not match the adapter");
    reps[i] = m.transpose() * inputs[i];
  }
  double loss = 0.0;
  for (const auto& a : constraints.anchored_signs()) {
    const auto& anchor = reps[static_cast<std::size_t>(a.anchor)];
    const double s_first = similarity_hat(as_span(anchor), as_span(reps[static_cast<std::size_t>(a.first)]));
    const double s_second = similarity_hat(as_span(anchor), as_span(reps[static_cast<std::size_t>(a.second)]));
    loss += anchored_triplet_loss(a.sign, s_first, s_second, beta);
  }
  return loss + regularization_loss(m, variant.target, gamma, lambda);
}

namespace {

std::array<kernels::AnchoredTerm, 3> anchored_terms(const ConstraintSet& set,
                                                    const std::array<std::uint32_t, 3>& rows) {
  std::array<kernels::AnchoredTerm, 3> out;
  const auto signs = set.anchored_signs();
  for (std::size_t k = 0; k < 3; ++k) {
    out[k] = {rows[static_cast<std::size_t>(signs[k].anchor)],
              rows[static_cast<std::size_t>(signs[k].first)],
              rows[static_cast<std::size_t>(signs[k].second)], signs[k].sign};
  }
  return out;
}

std::array<std::uint32_t, 3> resolve_rows(const EmbeddingTable& table, const ConstraintSet& set) {
  std::array<std::uint32_t, 3> rows{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto found = table.find(set.image_ids[i]);
    require(found.has_value(), ErrorCode::kNotFound,
            "triplet '" + set.triplet_id + "' references unknown image '" + set.image_ids[i] + "'");
    rows[i] = static_cast<std::uint32_t>(*found);
  }
  return rows;
}

struct Objective {
  double loss = 0.0;
  Matrix gradient;
};

Objective evaluate(const RowMatrix& inputs, std::span<const kernels::AnchoredTerm> terms,
                   std::size_t triplet_count, const Matrix& m, const AdapterVariant& variant,
                   const TrainConfig& config, bool with_gradient) {
  require(triplet_count > 0, ErrorCode::kInvalidArgument, "batch is empty");
  require(m.rows() == variant.rows() && m.cols() == variant.cols(), ErrorCode::kDimensionMismatch,
          "adapter shape does not match the variant");
  const double scale = 1.0 / static_cast<double>(triplet_count);
  kernels::HingeResult hinge = kernels::hinge_loss(inputs, m, terms, config.margin_beta, with_gradient);
  Objective out;
  out.loss = scale * hinge.loss + regularization_loss(m, variant.target, config.gamma, config.lambda);
  if (with_gradient) {
    const Matrix diff = m - variant.target;
    const Matrix l1 = diff.unaryExpr([](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); });
    out.gradient = scale * hinge.gradient + config.gamma * l1 + 2.0 * config.lambda * diff;
  }
  return out;
}

}  // namespace

TripletBatch make_batch(const EmbeddingTable& inputs_by_id, const std::vector<ConstraintSet>& sets) {
  TripletBatch batch;
  batch.inputs = inputs_by_id.matrix();
  batch.triplet_count = sets.size();
  for (const auto& set : sets) {
    for (const auto& t : anchored_terms(set, resolve_rows(inputs_by_id, set))) batch.terms.push_back(t);
  }
  return batch;
}

double batch_loss(const TripletBatch& batch, const Matrix& m, const AdapterVariant& variant,
                  const TrainConfig& config) {
  return evaluate(batch.inputs, batch.terms, batch.triplet_count, m, variant, config, false).loss;
}

Matrix loss_gradient(const TripletBatch& batch, const Matrix& m, const AdapterVariant& variant,
                     const TrainConfig& config) {
  return evaluate(batch.inputs, batch.terms, batch.triplet_count, m, variant, config, true).gradient;
}

bool triplet_correct(const ConstraintSet& constraints, const std::array<std::span<const double>, 3>& reps) {
  for (const auto& c : constraints.constraints) {
    if (c.relation == Relation::kEqual) continue;
    const double s_low = similarity_hat(reps[static_cast<std::size_t>(c.low.i)], reps[static_cast<std::size_t>(c.low.j)]);
    const double s_high = similarity_hat(reps[static_cast<std::size_t>(c.high.i)], reps[static_cast<std::size_t>(c.high.j)]);
    if (!(s_low < s_high)) return false;
  }
  return true;
}

double triplet_error(const std::vector<ConstraintSet>& dataset, const EmbedFn& embed) {
  require(!dataset.empty(), ErrorCode::kInvalidArgument, "triplet error needs a non-empty dataset");
  std::size_t wrong = 0;
  for (const auto& set : dataset) {
    const std::array<Vector, 3> reps = {embed(set.image_ids[0]), embed(set.image_ids[1]),
                                        embed(set.image_ids[2])};
    require(reps[0].size() == reps[1].size() && reps[0].size() == reps[2].size(),
            ErrorCode::kDimensionMismatch, "representations differ in dimension");
    if (!triplet_correct(set, {as_span(reps[0]), as_span(reps[1]), as_span(reps[2])})) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(dataset.size());
}

double triplet_error(const std::vector<ConstraintSet>& dataset, const EmbeddingTable& representations) {
  require(!dataset.empty(), ErrorCode::kInvalidArgument, "triplet error needs a non-empty dataset");
  std::size_t wrong = 0;
  for (const auto& set : dataset) {
    const auto rows = resolve_rows(representations, set);
    if (!triplet_correct(set, {representations.row(rows[0]), representations.row(rows[1]),
                               representations.row(rows[2])})) {
      ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(dataset.size());
}

TrainedAdapter train_adapter(const EmbeddingTable& images, const std::vector<ConstraintSet>& train_set,
                             const std::vector<ConstraintSet>& val_set,
                             const ProjectionPipeline* projection, const AdapterVariant& variant,
                             const TrainConfig& input_config) {
  require(!train_set.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  require(!val_set.empty(), ErrorCode::kInvalidArgument, "validation set is empty");
  require(!variant.needs_projection() || projection != nullptr, ErrorCode::kInvalidArgument,
          std::string(to_string(variant.kind)) + " adapter requires a projection pipeline");
  const TrainConfig config = input_config.resolved(variant);
  config.validate();

  // Adapter inputs for exactly the images the two sets reference.
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::uint32_t> row_of;
  for (const auto* sets : {&train_set, &val_set}) {
    for (const auto& s : *sets) {
      for (const auto& id : s.image_ids) {
        if (row_of.emplace(id, static_cast<std::uint32_t>(ids.size())).second) ids.push_back(id);
      }
    }
  }
  const EmbeddingTable raw = images.subset(ids);
  const RowMatrix inputs = adapter_inputs(variant.kind, raw.matrix(), projection);
  require(inputs.cols() == variant.rows(), ErrorCode::kDimensionMismatch,
          "adapter rows do not match the input dimension");

  const auto rows_of = [&](const ConstraintSet& s) {
    return std::array<std::uint32_t, 3>{row_of.at(s.image_ids[0]), row_of.at(s.image_ids[1]),
                                        row_of.at(s.image_ids[2])};
  };
  std::vector<kernels::AnchoredTerm> train_terms;
  train_terms.reserve(3 * train_set.size());
  for (const auto& s : train_set) {
    for (const auto& t : anchored_terms(s, rows_of(s))) train_terms.push_back(t);
  }
  std::vector<std::array<std::uint32_t, 3>> val_rows;
  val_rows.reserve(val_set.size());
  for (const auto& s : val_set) val_rows.push_back(rows_of(s));

  const auto val_error = [&](const Matrix& m) {
    const RowMatrix reps = inputs * m;
    const auto span_of = [&](std::uint32_t r) {
      return std::span<const double>(reps.data() + static_cast<Eigen::Index>(r) * reps.cols(),
                                     static_cast<std::size_t>(reps.cols()));
    };
    std::size_t wrong = 0;
    for (std::size_t k = 0; k < val_set.size(); ++k) {
      const auto& r = val_rows[k];
      if (!triplet_correct(val_set[k], {span_of(r[0]), span_of(r[1]), span_of(r[2])})) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(val_set.size());
  };

  TrainedAdapter result;
  result.variant = variant;
  Matrix m = variant.target;
  Matrix first_moment = Matrix::Zero(m.rows(), m.cols());
  Matrix second_moment = Matrix::Zero(m.rows(), m.cols());
  double best_error = 2.0;
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);
  std::vector<kernels::AnchoredTerm> batch_terms(3 * config.batch_size);

  for (std::size_t step = 0;; ++step) {
    if (step % config.eval_every == 0) {
      const double error = val_error(m);
      const double loss =
          evaluate(inputs, train_terms, train_set.size(), m, variant, config, false).loss;
      result.history.push_back({step, loss, error});
      if (error < best_error) {
        best_error = error;
        result.matrix = m;
        result.best_checkpoint_step = step;
      }
    }
    if (step == config.steps) break;

    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t t = pick(rng);
      for (std::size_t k = 0; k < 3; ++k) batch_terms[3 * b + k] = train_terms[3 * t + k];
    }
    const Matrix grad =
        evaluate(inputs, batch_terms, config.batch_size, m, variant, config, true).gradient;
    const double t = static_cast<double>(step + 1);
    first_moment = config.adam_beta1 * first_moment + (1.0 - config.adam_beta1) * grad;
    second_moment = config.adam_beta2 * second_moment +
                    (1.0 - config.adam_beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config.adam_beta1, t);
    const double c2 = 1.0 - std::pow(config.adam_beta2, t);
    m.array() -= config.learning_rate * (first_moment.array() / c1) /
                 ((second_moment.array() / c2).sqrt() + config.adam_epsilon);
  }
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history) {
  out << "step,loss,val_error\n";
  const auto old_precision = out.precision(17);
  for (const auto& row : history) {
    out << row.step << ',' << row.train_loss << ',' << row.val_error << '\n';
  }
  out.precision(old_precision);
}

}  // namespace pdiv
