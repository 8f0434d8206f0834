#include "pdiv/ranking.hpp"

#include "pdiv/corpus.hpp"
#include "pdiv/error.hpp"
#include "pdiv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace pdiv {

CalibrationStats calibrate(const RowMatrix& representations, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(representations.rows());
  require(n >= 2, ErrorCode::kInvalidArgument, "calibration needs at least 2 representations");
  std::vector<double> distances;
  if (n <= kCalibrationExactLimit) {
    distances = kernels::all_pair_distances(representations);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> first(0, static_cast<std::uint32_t>(n - 1));
    std::uniform_int_distribution<std::uint32_t> other(0, static_cast<std::uint32_t>(n - 2));
    std::vector<kernels::IndexPair> pairs(kCalibrationSampledPairs);
    for (auto& p : pairs) {
      const std::uint32_t i = first(rng);
      std::uint32_t j = other(rng);
      if (j >= i) ++j;
      p = {i, j};
    }
    distances = kernels::pair_distances(representations, pairs);
  }
  double sum = 0.0;
  for (double d : distances) sum += d;
  const double mu = sum / static_cast<double>(distances.size());
  double ss = 0.0;
  for (double d : distances) ss += (d - mu) * (d - mu);
  const double sigma = std::sqrt(ss / static_cast<double>(distances.size()));
  require(sigma > 0.0, ErrorCode::kDegenerate,
          "calibration distances have zero spread (all representations identical?)");
  return {mu, sigma, n};
}

void RankingConfig::validate() const {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  require(k > 0, ErrorCode::kInvalidArgument, "k must be positive");
}

double embed_dist_zscore(const CalibrationStats& stats, std::span<const double> a,
                         std::span<const double> b) {
  require(stats.sigma > 0.0, ErrorCode::kInvalidArgument, "calibration sigma must be positive");
  require(a.size() == b.size(), ErrorCode::kDimensionMismatch, "representation dimensions differ");
  return (euclidean_distance(a, b) - stats.mu) / stats.sigma;
}

double marginal_diversity(std::span<const double> candidate,
                          const std::vector<std::span<const double>>& selected,
                          const CalibrationStats& stats) {
  if (selected.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : selected) sum += embed_dist_zscore(stats, candidate, s);
  return sum / static_cast<double>(selected.size());
}

double marginal_diversity(std::string_view candidate, const std::vector<std::string>& selected,
                          const CalibrationStats& stats, const EmbeddingTable& representations) {
  std::vector<std::span<const double>> rows;
  rows.reserve(selected.size());
  for (const auto& id : selected) {
    require(id != candidate, ErrorCode::kInvalidArgument,
            "candidate '" + std::string(candidate) + "' is already selected");
    rows.push_back(representations.at(id));
  }
  return marginal_diversity(representations.at(candidate), rows, stats);
}

double relevance_celis(std::string_view image, const std::vector<std::string>& seeds,
                       const EmbeddingTable& general) {
  require(!seeds.empty(), ErrorCode::kInvalidArgument, "relevance needs at least one seed image");
  const auto x = general.at(image);
  double sum = 0.0;
  for (const auto& s : seeds) sum += cosine_similarity(x, general.at(s));
  return sum / static_cast<double>(seeds.size());
}

std::vector<std::string> celis_seed_set(const std::vector<std::string>& candidates) {
  const std::size_t n = std::min<std::size_t>(10, candidates.size());
  return {candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n)};
}

RankedResult mmr_select(const std::vector<std::string>& candidates,
                        const std::vector<double>& relevance, const RowMatrix& representations,
                        const CalibrationStats& stats, const RankingConfig& config,
                        const DiversityFn& diversity_override) {
  config.validate();
  const std::size_t n = candidates.size();
  require(n > 0, ErrorCode::kInvalidArgument, "no candidates to rank");
  require(relevance.size() == n, ErrorCode::kDimensionMismatch,
          "relevance scores must align with candidates");
  const bool zscore = !diversity_override && config.alpha > 0.0;
  if (zscore) {
    require(static_cast<std::size_t>(representations.rows()) == n, ErrorCode::kDimensionMismatch,
            "representations must align with candidates");
    require(stats.sigma > 0.0, ErrorCode::kInvalidArgument, "calibration sigma must be positive");
  }

  std::vector<std::size_t> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = i;
  std::vector<double> running(n, 0.0);  // aligned with `remaining`
  RankedResult result;
  const std::size_t rounds = std::min(config.k, n);
  for (std::size_t round = 0; round < rounds; ++round) {
    std::size_t best = 0;
    TraceRow best_row;
    for (std::size_t pos = 0; pos < remaining.size(); ++pos) {
      const std::size_t c = remaining[pos];
      double md = 0.0;
      if (diversity_override) {
        md = diversity_override(c, result.indices);
      } else if (round > 0) {
        md = running[pos] / static_cast<double>(round);
      }
      const TraceRow row{relevance[c], md, (1.0 - config.alpha) * relevance[c] + config.alpha * md};
      const bool better =
          pos == 0 || row.mmr_score > best_row.mmr_score ||
          (row.mmr_score == best_row.mmr_score &&
           (row.relevance > best_row.relevance ||
            (row.relevance == best_row.relevance && c < remaining[best])));
      if (better) {
        best = pos;
        best_row = row;
      }
    }
    const std::size_t chosen = remaining[best];
    result.ids.push_back(candidates[chosen]);
    result.indices.push_back(chosen);
    result.trace.push_back(best_row);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    running.erase(running.begin() + static_cast<std::ptrdiff_t>(best));
    if (zscore && !remaining.empty()) {
      kernels::accumulate_zscores(representations, remaining, chosen, stats.mu, stats.sigma, running);
    }
  }
  return result;
}

void write_ranking_csv(std::ostream& out, const RankedResult& result) {
  out << "rank,id,relevance,marginal_diversity,mmr_score\n";
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < result.ids.size(); ++i) {
    const auto& t = result.trace[i];
    out << i + 1 << ',' << csv_escape(result.ids[i]) << ',' << t.relevance << ',' << t.marginal_diversity << ','
        << t.mmr_score << '\n';
  }
  out.precision(old_precision);
}

}  // namespace pdiv
