#include "pdiv/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace pdiv {

Matrix orthonormal_basis(const Matrix& m, double rel_tol) {
  if (m.cols() == 0 || m.rows() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index rank = 0;
  const double cutoff = s.size() > 0 ? s(0) * rel_tol : 0.0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  return svd.matrixU().leftCols(rank);
}

Vector principal_angles(const Matrix& a, const Matrix& b) {
  Matrix qa = orthonormal_basis(a);
  Matrix qb = orthonormal_basis(b);
  // qb is projected onto qa below, so qa must be the larger span.
  if (qa.cols() < qb.cols()) std::swap(qa, qb);
  const Eigen::Index n = std::min(qa.cols(), qb.cols());
  if (n == 0) return Vector(0);
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  Vector cosines = svd.singularValues().head(n);
  Vector angles(n);
  // Small angles are inaccurate through acos; use the sine route via the
  // residual of the projection instead.
  const Matrix residual = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Matrix> rsvd(residual);
  Vector sines = rsvd.singularValues();
  std::sort(sines.data(), sines.data() + sines.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = std::clamp(cosines(i), 0.0, 1.0);
    const double s = i < sines.size() ? std::clamp(sines(i), 0.0, 1.0) : 0.0;
    angles(i) = std::atan2(s, c);
  }
  std::sort(angles.data(), angles.data() + angles.size());
  return angles;
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
  const Vector angles = principal_angles(a, b);
  return angles.size() == 0 ? 0.0 : angles.maxCoeff();
}

Eigen::Index numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > rel_tol * s(0)) ++rank;
  return rank;
}

double row_orthonormality_error(const Matrix& m) {
  const Matrix gram = m * m.transpose();
  return (gram - Matrix::Identity(m.rows(), m.rows())).cwiseAbs().maxCoeff();
}

void canonicalize_row_signs(Matrix& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Eigen::Index best = 0;
    double best_mag = -1.0;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      const double mag = std::abs(rows(r, c));
      if (mag > best_mag) {
        best_mag = mag;
        best = c;
      }
    }
    if (rows(r, best) < 0.0) rows.row(r) *= -1.0;
  }
}

}  // namespace pdiv
