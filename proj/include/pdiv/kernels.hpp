#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version (namespace
// `kernels`) and a plain serial version (namespace `kernels::reference`) that
// the tests and the benchmark compare against. Parallel versions write
// per-item results to fixed slots and reduce in index order, so their output
// does not depend on the thread count.

#include "pdiv/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace pdiv::kernels {

using IndexPair = std::pair<std::uint32_t, std::uint32_t>;

/// Distances for every unordered pair i < j, ordered (0,1), (0,2), ..., (1,2), ...
std::vector<double> all_pair_distances(const RowMatrix& points);

/// Distances for the listed pairs, in list order.
std::vector<double> pair_distances(const RowMatrix& points, std::span<const IndexPair> pairs);

/// running[k] += (|points[remaining[k]] − points[selected]| − mu) / sigma
void accumulate_zscores(const RowMatrix& points, std::span<const std::size_t> remaining,
                        std::size_t selected, double mu, double sigma, std::span<double> running);

/// One anchored hinge term: compares the (anchor, first) edge against the
/// (anchor, second) edge; `sign` = sgn(S(anchor, first) − S(anchor, second)).
struct AnchoredTerm {
  std::uint32_t anchor = 0;
  std::uint32_t first = 0;
  std::uint32_t second = 0;
  int sign = 0;
};

struct HingeResult {
  double loss = 0.0;
  Matrix gradient;  // same shape as the adapter; empty when not requested
};

/// Sum over terms of max(−sign·(Ŝ(a,f) − Ŝ(a,s)) + beta, 0), with
/// Ŝ(x, y) = 1 − |(u_x − u_y)·M| and u the rows of `inputs`. The gradient is
/// the subgradient w.r.t. M, taking 0 at hinge kinks and at zero distance.
HingeResult hinge_loss(const RowMatrix& inputs, const Matrix& adapter,
                       std::span<const AnchoredTerm> terms, double beta, bool with_gradient);

namespace reference {

std::vector<double> all_pair_distances(const RowMatrix& points);
std::vector<double> pair_distances(const RowMatrix& points, std::span<const IndexPair> pairs);
void accumulate_zscores(const RowMatrix& points, std::span<const std::size_t> remaining,
                        std::size_t selected, double mu, double sigma, std::span<double> running);
HingeResult hinge_loss(const RowMatrix& inputs, const Matrix& adapter,
                       std::span<const AnchoredTerm> terms, double beta, bool with_gradient);

}  // namespace reference

}  // namespace pdiv::kernels
