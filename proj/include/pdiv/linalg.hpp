#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace pdiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline Vector to_vector(std::span<const double> values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Orthonormal basis (as columns) for the column span of `m`, rank-revealed at
/// `rel_tol` relative to the largest singular value.
Matrix orthonormal_basis(const Matrix& m, double rel_tol = 1e-10);

/// Principal angles in radians between the column spans of `a` and `b`,
/// ascending. Inputs need not be orthonormal.
Vector principal_angles(const Matrix& a, const Matrix& b);

double max_principal_angle(const Matrix& a, const Matrix& b);

/// Number of singular values above rel_tol * largest.
Eigen::Index numerical_rank(const Matrix& m, double rel_tol = 1e-8);

/// max |M Mᵀ − I| for a matrix whose rows should be orthonormal.
double row_orthonormality_error(const Matrix& m);

/// Flips each row so its largest-magnitude coordinate is positive (first index
/// wins ties).
void canonicalize_row_signs(Matrix& rows);

}  // namespace pdiv
