#include "pdiv/kernels.hpp"

#include "pdiv/error.hpp"

#include <cmath>

namespace pdiv::kernels {

namespace {

double row_distance(const RowMatrix& points, Eigen::Index i, Eigen::Index j) {
  return (points.row(i) - points.row(j)).norm();
}

std::size_t pair_offset(std::size_t i, std::size_t n) {
  // Number of pairs (a, b), a < b, with a < i.
  return i * n - i * (i + 1) / 2;
}

void check_terms(const RowMatrix& inputs, const Matrix& adapter, std::span<const AnchoredTerm> terms) {
  require(inputs.cols() == adapter.rows(), ErrorCode::kDimensionMismatch,
          "adapter rows do not match input dimension");
  for (const auto& t : terms) {
    require(t.anchor < inputs.rows() && t.first < inputs.rows() && t.second < inputs.rows(),
            ErrorCode::kInvalidArgument, "anchored term references a missing row");
  }
}

}  // namespace

std::vector<double> all_pair_distances(const RowMatrix& points) {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<double> out(n < 2 ? 0 : n * (n - 1) / 2);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    std::size_t slot = pair_offset(static_cast<std::size_t>(i), n);
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
      out[slot++] = row_distance(points, i, static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

std::vector<double> pair_distances(const RowMatrix& points, std::span<const IndexPair> pairs) {
  std::vector<double> out(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(pairs.size()); ++k) {
    const auto& [i, j] = pairs[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(k)] = row_distance(points, i, j);
  }
  return out;
}

void accumulate_zscores(const RowMatrix& points, std::span<const std::size_t> remaining,
                        std::size_t selected, double mu, double sigma, std::span<double> running) {
  require(running.size() == remaining.size(), ErrorCode::kDimensionMismatch,
          "running sums must align with remaining candidates");
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(remaining.size()); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const double d = row_distance(points, static_cast<Eigen::Index>(remaining[idx]),
                                  static_cast<Eigen::Index>(selected));
    running[idx] += (d - mu) / sigma;
  }
}

HingeResult hinge_loss(const RowMatrix& inputs, const Matrix& adapter,
                       std::span<const AnchoredTerm> terms, double beta, bool with_gradient) {
  check_terms(inputs, adapter, terms);
  const Eigen::Index out_dim = adapter.cols();
  const auto n_terms = static_cast<std::ptrdiff_t>(terms.size());

  // Per-term slots: hinge value and the two output-space weight vectors
  // w = coef · (e_x − e_y) / |e_x − e_y| for the (anchor, first) and
  // (anchor, second) edges.
  const RowMatrix outputs = inputs * adapter;
  std::vector<double> term_loss(terms.size(), 0.0);
  Matrix w_first;
  Matrix w_second;
  if (with_gradient) {
    w_first = Matrix::Zero(out_dim, static_cast<Eigen::Index>(terms.size()));
    w_second = Matrix::Zero(out_dim, static_cast<Eigen::Index>(terms.size()));
  }

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n_terms; ++k) {
    const auto& t = terms[static_cast<std::size_t>(k)];
    const Vector e_f = (outputs.row(t.anchor) - outputs.row(t.first)).transpose();
    const Vector e_s = (outputs.row(t.anchor) - outputs.row(t.second)).transpose();
    const double d_f = e_f.norm();
    const double d_s = e_s.norm();
    // −sign·(Ŝ_f − Ŝ_s) = sign·(d_f − d_s)
    const double margin = static_cast<double>(t.sign) * (d_f - d_s) + beta;
    if (margin <= 0.0) continue;
    term_loss[static_cast<std::size_t>(k)] = margin;
    if (!with_gradient || t.sign == 0) continue;
    const double s = static_cast<double>(t.sign);
    if (d_f > 0.0) w_first.col(k) = (s / d_f) * e_f;
    if (d_s > 0.0) w_second.col(k) = (-s / d_s) * e_s;
  }

  HingeResult result;
  for (double l : term_loss) result.loss += l;
  if (!with_gradient) return result;

  // Scatter per-row output weights in term order, then one product with the
  // input rows: G = Σ_rows u_rowᵀ g_row.
  Matrix row_weights = Matrix::Zero(out_dim, inputs.rows());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& t = terms[k];
    const auto kk = static_cast<Eigen::Index>(k);
    row_weights.col(t.anchor) += w_first.col(kk) + w_second.col(kk);
    row_weights.col(t.first) -= w_first.col(kk);
    row_weights.col(t.second) -= w_second.col(kk);
  }
  result.gradient = inputs.transpose() * row_weights.transpose();
  return result;
}

namespace reference {

std::vector<double> all_pair_distances(const RowMatrix& points) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      out.push_back((points.row(i) - points.row(j)).norm());
    }
  }
  return out;
}

std::vector<double> pair_distances(const RowMatrix& points, std::span<const IndexPair> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) out.push_back((points.row(i) - points.row(j)).norm());
  return out;
}

void accumulate_zscores(const RowMatrix& points, std::span<const std::size_t> remaining,
                        std::size_t selected, double mu, double sigma, std::span<double> running) {
  for (std::size_t k = 0; k < remaining.size(); ++k) {
    const double d = (points.row(static_cast<Eigen::Index>(remaining[k])) -
                      points.row(static_cast<Eigen::Index>(selected)))
                         .norm();
    running[k] += (d - mu) / sigma;
  }
}

HingeResult hinge_loss(const RowMatrix& inputs, const Matrix& adapter,
                       std::span<const AnchoredTerm> terms, double beta, bool with_gradient) {
  check_terms(inputs, adapter, terms);
  HingeResult result;
  if (with_gradient) result.gradient = Matrix::Zero(adapter.rows(), adapter.cols());
  for (const auto& t : terms) {
    const Vector delta_f = (inputs.row(t.anchor) - inputs.row(t.first)).transpose();
    const Vector delta_s = (inputs.row(t.anchor) - inputs.row(t.second)).transpose();
    const double d_f = (adapter.transpose() * delta_f).norm();
    const double d_s = (adapter.transpose() * delta_s).norm();
    const double s_hat_f = 1.0 - d_f;
    const double s_hat_s = 1.0 - d_s;
    const double value = -static_cast<double>(t.sign) * (s_hat_f - s_hat_s) + beta;
    if (value <= 0.0) continue;
    result.loss += value;
    if (!with_gradient) continue;
    // d|Mᵀδ|/dM = δ (Mᵀδ)ᵀ / |Mᵀδ|
    if (d_f > 0.0) {
      result.gradient += static_cast<double>(t.sign) * delta_f *
                         (adapter.transpose() * delta_f).transpose() / d_f;
    }
    if (d_s > 0.0) {
      result.gradient -= static_cast<double>(t.sign) * delta_s *
                         (adapter.transpose() * delta_s).transpose() / d_s;
    }
  }
  return result;
}

}  // namespace reference

}  // namespace pdiv::kernels
