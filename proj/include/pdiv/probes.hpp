#pragma once

#include "pdiv/corpus.hpp"
#include "pdiv/embedding.hpp"
#include "pdiv/linalg.hpp"
#include "pdiv/subspace.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdiv {

enum class ProbeCategory { kPeople, kNonPeople };
std::string_view to_string(ProbeCategory category);

/// A q-way classification problem; each group holds raw embeddings (rows).
struct ProbeTask {
  std::string name;
  ProbeCategory category = ProbeCategory::kPeople;
  std::vector<RowMatrix> groups;
};

struct ProbeResult {
  std::string task;
  double auc = 0.0;        // macro one-vs-rest on held-out examples
  double train_auc = 0.0;  // same statistic on the training examples
};

struct ProbeConfig {
  std::size_t iterations = 500;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  double held_out_fraction = 0.25;
};

/// Maps raw rows to representation rows.
using RepresentationFn = std::function<RowMatrix(const RowMatrix&)>;

/// Area under the ROC curve of `scores` for `positive`, ties counted half.
double binary_auc(std::span<const double> scores, const std::vector<bool>& positive);

/// Macro one-vs-rest AUC of per-class scores (rows = examples).
double macro_auc(const RowMatrix& class_scores, const std::vector<std::size_t>& labels);

ProbeResult train_probe(const ProbeTask& task, const RepresentationFn& representation,
                        std::uint64_t seed, const ProbeConfig& config = {});

struct SweepRow {
  std::size_t d_p = 0;
  std::size_t d_b = 0;
  double people_auc = 0.0;
  double nonpeople_auc = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<std::string> notes;  // skipped grid points
};

struct SweepInputs {
  const EmbeddingTable* phrase_table = nullptr;
  const std::vector<PhraseRecord>* person_records = nullptr;
  const std::vector<PhraseRecord>* location_records = nullptr;
  BackgroundMode mode = BackgroundMode::kPhraseCentered;
};

/// Builds the projection for every valid (d_p, d_b) and probes each task in
/// projected space. Category means are NaN when a category has no tasks.
SweepReport run_sweep(const std::vector<std::size_t>& d_p_grid, const std::vector<std::size_t>& d_b_grid,
                      const SweepInputs& inputs, const std::vector<ProbeTask>& tasks,
                      std::uint64_t seed, const ProbeConfig& config = {});

void write_sweep_csv(std::ostream& out, const SweepReport& report);

}  // namespace pdiv
