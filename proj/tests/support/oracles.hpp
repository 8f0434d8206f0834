#pragma once

// Test-only reference computations. None of these call into the library's
// numerics; they are deliberately plain loops over std::vector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;  // row-major, m[r][c]

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat transpose(const Mat& a) {
  Mat t = zeros(a.empty() ? 0 : a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c = zeros(a.size(), b.empty() ? 0 : b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[k].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

/// Cyclic Jacobi rotations on a symmetric matrix. Returns eigenvalues sorted
/// descending and the matching eigenvectors as columns.
inline std::pair<std::vector<double>, Mat> jacobi_eigen(Mat a, int max_sweeps = 100) {
  const std::size_t n = a.size();
  Mat v = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  std::vector<double> values(n);
  Mat vectors = zeros(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    values[k] = a[order[k]][order[k]];
    for (std::size_t i = 0; i < n; ++i) vectors[i][k] = v[i][order[k]];
  }
  return {values, vectors};
}

/// Sample covariance (n − 1 denominator) of the rows of `x`.
inline Mat covariance(const Mat& x) {
  const std::size_t n = x.size(), d = x[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& row : x)
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j] / static_cast<double>(n);
  Mat c = zeros(d, d);
  for (const auto& row : x)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
  for (auto& row : c)
    for (double& v : row) v /= static_cast<double>(n - 1);
  return c;
}

/// Modified Gram-Schmidt on the columns of `a` (assumed full column rank).
inline Mat orthonormal_columns(Mat a) {
  const std::size_t r = a.size(), c = a[0].size();
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < r; ++i) dot += a[i][k] * a[i][j];
      for (std::size_t i = 0; i < r; ++i) a[i][j] -= dot * a[i][k];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < r; ++i) norm += a[i][j] * a[i][j];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < r; ++i) a[i][j] /= norm;
  }
  return a;
}

/// Largest principal angle between the column spans of `a` and `b` (same
/// column count), via the sine form ‖(I − QaQaᵀ)Qb‖₂, which stays accurate
/// for tiny angles.
inline double max_principal_angle(const Mat& a, const Mat& b) {
  const Mat qa = orthonormal_columns(a);
  const Mat qb = orthonormal_columns(b);
  const Mat proj = matmul(qa, matmul(transpose(qa), qb));
  Mat resid = qb;
  for (std::size_t i = 0; i < resid.size(); ++i)
    for (std::size_t j = 0; j < resid[i].size(); ++j) resid[i][j] -= proj[i][j];
  const auto [values, vectors] = jacobi_eigen(matmul(transpose(resid), resid));
  const double s = std::sqrt(std::max(values.front(), 0.0));
  return std::asin(std::min(s, 1.0));
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Population mean and standard deviation over all unordered pairs.
inline std::pair<double, double> pair_distance_stats(const Mat& points) {
  std::vector<double> d;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) d.push_back(distance(points[i], points[j]));
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= static_cast<double>(d.size());
  return {mean, std::sqrt(var)};
}

/// Textbook greedy MMR: recomputes every marginal diversity from scratch each
/// round. Ties prefer higher relevance, then the earlier candidate.
inline std::vector<std::size_t> greedy_mmr(const Mat& reps, const std::vector<double>& relevance, double alpha,
                                           std::size_t k, double mu, double sigma) {
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(reps.size(), false);
  while (chosen.size() < std::min(k, reps.size())) {
    std::size_t best = reps.size();
    double best_score = 0.0;
    for (std::size_t c = 0; c < reps.size(); ++c) {
      if (taken[c]) continue;
      double md = 0.0;
      if (!chosen.empty()) {
        for (std::size_t s : chosen) md += (distance(reps[c], reps[s]) - mu) / sigma;
        md /= static_cast<double>(chosen.size());
      }
      const double score = (1.0 - alpha) * relevance[c] + alpha * md;
      const bool better = best == reps.size() || score > best_score ||
                          (score == best_score && relevance[c] > relevance[best]);
      if (better) {
        best = c;
        best_score = score;
      }
    }
    taken[best] = true;
    chosen.push_back(best);
  }
  return chosen;
}

/// AUC by counting every positive/negative pair; ties score one half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Central differences of a scalar function of a matrix.
inline Mat finite_difference_gradient(const std::function<double(const Mat&)>& f, Mat m, double h) {
  Mat g = zeros(m.size(), m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      const double keep = m[i][j];
      m[i][j] = keep + h;
      const double up = f(m);
      m[i][j] = keep - h;
      const double down = f(m);
      m[i][j] = keep;
      g[i][j] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

// Vote conversion, written from the conversion table directly.
// An edge is a pair of positions (a < b); a constraint is
// (low edge, high edge, strict) meaning S(low) < S(high), or S(low) = S(high)
// when not strict (then stored with low < high lexicographically).
using OEdge = std::pair<int, int>;
using OConstraint = std::tuple<OEdge, OEdge, bool>;

inline OEdge oedge(int a, int b) { return a < b ? OEdge{a, b} : OEdge{b, a}; }

inline OConstraint less(OEdge lo, OEdge hi) { return {lo, hi, true}; }
inline OConstraint equal(OEdge x, OEdge y) { return x < y ? OConstraint{x, y, false} : OConstraint{y, x, false}; }

struct ExpectedConversion {
  int case_number = 0;  // 1, 2 or 3
  std::set<OConstraint> constraints;
};

/// `centroid` selects the geometric reading of the {2,2,0} case.
inline ExpectedConversion expected_conversion(const std::array<int, 3>& v, bool centroid) {
  std::array<int, 3> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  ExpectedConversion out;
  auto position_with = [&](int votes, int skip) {
    for (int i = 0; i < 3; ++i)
      if (v[static_cast<std::size_t>(i)] == votes && i != skip) return i;
    return -1;
  };
  if ((sorted[0] == 4) || (sorted[0] == 2 && sorted[1] == 1 && sorted[2] == 1)) {
    const int x = position_with(sorted[0], -1);
    const int y = (x + 1) % 3, z = (x + 2) % 3;
    out.case_number = 1;
    out.constraints = {less(oedge(x, y), oedge(y, z)), less(oedge(x, z), oedge(y, z)),
                       equal(oedge(x, y), oedge(x, z))};
  } else if (sorted[0] == 3) {
    const int x = position_with(3, -1), y = position_with(1, -1), z = position_with(0, -1);
    out.case_number = 2;
    out.constraints = {less(oedge(x, y), oedge(x, z)), less(oedge(x, z), oedge(y, z))};
  } else {
    const int x = position_with(2, -1), y = position_with(2, x), z = position_with(0, -1);
    out.case_number = 3;
    if (centroid)
      out.constraints = {less(oedge(x, y), oedge(x, z)), less(oedge(x, y), oedge(y, z))};
    else
      out.constraints = {less(oedge(x, z), oedge(x, y)), less(oedge(y, z), oedge(x, y))};
  }
  return out;
}

/// Every labeled way to split 4 votes over 3 images (15 of them).
inline std::vector<std::array<int, 3>> all_vote_patterns() {
  std::vector<std::array<int, 3>> out;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b) out.push_back({a, b, 4 - a - b});
  return out;
}

}  // namespace oracle
