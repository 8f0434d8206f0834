#pragma once

#include "pdiv/embedding.hpp"
#include "pdiv/linalg.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdiv {

struct CalibrationStats {
  double mu = 0.0;
  double sigma = 1.0;
  std::size_t calibration_size = 0;
};

/// Pairs drawn when the calibration set is too large for all pairs.
inline constexpr std::size_t kCalibrationExactLimit = 2000;
inline constexpr std::size_t kCalibrationSampledPairs = 2'000'000;

/// Population mean and standard deviation of pairwise distances between rows.
/// Above kCalibrationExactLimit rows, kCalibrationSampledPairs pairs of distinct
/// rows are drawn uniformly with `seed`.
CalibrationStats calibrate(const RowMatrix& representations, std::uint64_t seed = 0);

struct RankingConfig {
  double alpha = 0.5;
  std::size_t k = 9;
  void validate() const;
};

struct TraceRow {
  double relevance = 0.0;
  double marginal_diversity = 0.0;
  double mmr_score = 0.0;
};

struct RankedResult {
  std::vector<std::string> ids;
  std::vector<std::size_t> indices;  // positions in the candidate list
  std::vector<TraceRow> trace;
};

double embed_dist_zscore(const CalibrationStats& stats, std::span<const double> a,
                         std::span<const double> b);

/// Mean z-scored distance from `candidate` to each row of `selected`; 0 when
/// `selected` is empty.
double marginal_diversity(std::span<const double> candidate,
                          const std::vector<std::span<const double>>& selected,
                          const CalibrationStats& stats);

/// Id-level form; fails when `candidate` is itself selected.
double marginal_diversity(std::string_view candidate, const std::vector<std::string>& selected,
                          const CalibrationStats& stats, const EmbeddingTable& representations);

/// Mean cosine similarity of `image` to each seed image in `general`.
double relevance_celis(std::string_view image, const std::vector<std::string>& seeds,
                       const EmbeddingTable& general);

/// Seeds for relevance_celis: the first min(10, n) candidates.
std::vector<std::string> celis_seed_set(const std::vector<std::string>& candidates);

/// Replaces the z-score marginal diversity: (candidate index, selected indices
/// in selection order) → value.
using DiversityFn = std::function<double(std::size_t, std::span<const std::size_t>)>;

/// Greedy MMR over candidates with aligned relevance scores and representation
/// rows. Ties go to higher relevance, then lower candidate index.
RankedResult mmr_select(const std::vector<std::string>& candidates,
                        const std::vector<double>& relevance, const RowMatrix& representations,
                        const CalibrationStats& stats, const RankingConfig& config,
                        const DiversityFn& diversity_override = {});

void write_ranking_csv(std::ostream& out, const RankedResult& result);

}  // namespace pdiv
