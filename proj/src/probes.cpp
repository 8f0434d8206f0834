#include "pdiv/probes.hpp"

#include "pdiv/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace pdiv {

std::string_view to_string(ProbeCategory category) {
  return category == ProbeCategory::kPeople ? "people" : "non-people";
}

double binary_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  require(scores.size() == positive.size(), ErrorCode::kDimensionMismatch,
          "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney: sum of mid-ranks of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorCode::kDegenerate, "AUC needs both positive and negative examples");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double macro_auc(const RowMatrix& class_scores, const std::vector<std::size_t>& labels) {
  require(static_cast<std::size_t>(class_scores.rows()) == labels.size(), ErrorCode::kDimensionMismatch,
          "scores and labels differ in length");
  const auto q = static_cast<std::size_t>(class_scores.cols());
  double sum = 0.0;
  std::vector<double> column(labels.size());
  std::vector<bool> positive(labels.size());
  for (std::size_t c = 0; c < q; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      column[i] = class_scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      positive[i] = labels[i] == c;
    }
    sum += binary_auc(column, positive);
  }
  return sum / static_cast<double>(q);
}

namespace {

RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - top).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace

ProbeResult train_probe(const ProbeTask& task, const RepresentationFn& representation,
                        std::uint64_t seed, const ProbeConfig& config) {
  const std::size_t q = task.groups.size();
  require(q >= 2, ErrorCode::kInvalidArgument, "probe task '" + task.name + "' needs at least 2 groups");
  std::mt19937_64 rng(seed);

  // Per-group seeded split.
  std::vector<RowMatrix> train_parts;
  std::vector<RowMatrix> test_parts;
  std::vector<std::size_t> train_labels;
  std::vector<std::size_t> test_labels;
  for (std::size_t g = 0; g < q; ++g) {
    const RowMatrix& rows = task.groups[g];
    const auto n = static_cast<std::size_t>(rows.rows());
    require(n >= 4, ErrorCode::kInvalidArgument,
            "probe task '" + task.name + "' group " + std::to_string(g) + " has fewer than 4 examples");
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }
    const std::size_t n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(config.held_out_fraction * static_cast<double>(n))), 1, n - 1);
    RowMatrix train(static_cast<Eigen::Index>(n - n_test), rows.cols());
    RowMatrix test(static_cast<Eigen::Index>(n_test), rows.cols());
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_test) {
        test.row(static_cast<Eigen::Index>(i)) = rows.row(order[i]);
      } else {
        train.row(static_cast<Eigen::Index>(i - n_test)) = rows.row(order[i]);
      }
    }
    train_parts.push_back(std::move(train));
    test_parts.push_back(std::move(test));
    train_labels.insert(train_labels.end(), n - n_test, g);
    test_labels.insert(test_labels.end(), n_test, g);
  }
  const auto stack = [](const std::vector<RowMatrix>& parts) {
    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.rows();
    RowMatrix out(total, parts.front().cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      out.middleRows(at, p.rows()) = p;
      at += p.rows();
    }
    return out;
  };
  RowMatrix x_train = representation(stack(train_parts));
  RowMatrix x_test = representation(stack(test_parts));
  require(x_train.cols() == x_test.cols() && x_train.cols() > 0, ErrorCode::kDimensionMismatch,
          "representation produced inconsistent dimensions");

  // Centre on the training mean; one global scale keeps the feature geometry.
  const Eigen::RowVectorXd mean = x_train.colwise().mean();
  x_train.rowwise() -= mean;
  x_test.rowwise() -= mean;
  const double rms = std::sqrt(x_train.squaredNorm() / static_cast<double>(x_train.size()));
  require(rms > 1e-12, ErrorCode::kDegenerate, "probe task '" + task.name + "' has degenerate features");
  x_train /= rms;
  x_test /= rms;

  const auto n = static_cast<double>(x_train.rows());
  RowMatrix targets = RowMatrix::Zero(x_train.rows(), static_cast<Eigen::Index>(q));
  for (std::size_t i = 0; i < train_labels.size(); ++i) {
    targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(train_labels[i])) = 1.0;
  }
  Matrix w = Matrix::Zero(x_train.cols(), static_cast<Eigen::Index>(q));
  Eigen::RowVectorXd bias = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(q));
  for (std::size_t it = 0; it < config.iterations; ++it) {
    RowMatrix logits = x_train * w;
    logits.rowwise() += bias;
    const RowMatrix residual = (softmax_rows(logits) - targets) / n;
    w -= config.learning_rate * (x_train.transpose() * residual + config.l2 * w);
    bias -= config.learning_rate * residual.colwise().sum();
  }
  const auto scores = [&](const RowMatrix& x) {
    RowMatrix logits = x * w;
    logits.rowwise() += bias;
    return softmax_rows(logits);
  };
  return {task.name, macro_auc(scores(x_test), test_labels), macro_auc(scores(x_train), train_labels)};
}

SweepReport run_sweep(const std::vector<std::size_t>& d_p_grid, const std::vector<std::size_t>& d_b_grid,
                      const SweepInputs& inputs, const std::vector<ProbeTask>& tasks,
                      std::uint64_t seed, const ProbeConfig& config) {
  require(!d_p_grid.empty() && !d_b_grid.empty(), ErrorCode::kInvalidArgument, "sweep grids must be non-empty");
  require(inputs.phrase_table != nullptr && inputs.person_records != nullptr,
          ErrorCode::kInvalidArgument, "sweep needs a phrase table and person phrases");
  require(!tasks.empty(), ErrorCode::kInvalidArgument, "sweep needs at least one probe task");
  SweepReport report;
  for (std::size_t d_p : d_p_grid) {
    for (std::size_t d_b : d_b_grid) {
      if (d_b >= d_p) {
        report.notes.push_back("skipped d_p=" + std::to_string(d_p) + " d_b=" + std::to_string(d_b) +
                               ": d_b must be smaller than d_p");
        continue;
      }
      const PeopleProjection people = extract_person_subspace(*inputs.phrase_table, *inputs.person_records, d_p);
      BackgroundRemoval removal;
      if (d_b == 0) {
        removal.d_p = d_p;
        removal.directions = Matrix::Zero(0, static_cast<Eigen::Index>(d_p));
      } else {
        require(inputs.location_records != nullptr, ErrorCode::kInvalidArgument,
                "sweep with d_b > 0 needs location phrases");
        removal = extract_background_subspace(*inputs.phrase_table, *inputs.location_records, people, d_b,
                                              inputs.mode);
      }
      const ProjectionPipeline pipeline = compose_projection(people, removal);
      const RepresentationFn rep = [&](const RowMatrix& raw) { return pipeline.apply(raw); };

      std::vector<ProbeResult> results(tasks.size());
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.size()); ++t) {
        const auto k = static_cast<std::size_t>(t);
        results[k] = train_probe(tasks[k], rep, seed + k, config);
      }
      double sums[2] = {0.0, 0.0};
      std::size_t counts[2] = {0, 0};
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        const int c = tasks[k].category == ProbeCategory::kPeople ? 0 : 1;
        sums[c] += results[k].auc;
        ++counts[c];
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      report.rows.push_back({d_p, d_b, counts[0] ? sums[0] / static_cast<double>(counts[0]) : nan,
                             counts[1] ? sums[1] / static_cast<double>(counts[1]) : nan});
    }
  }
  require(!report.rows.empty(), ErrorCode::kInvalidArgument, "no valid (d_p, d_b) grid point");
  return report;
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << "d_p,d_b,people_auc,nonpeople_auc\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : report.rows) {
    out << r.d_p << ',' << r.d_b << ',' << r.people_auc << ',' << r.nonpeople_auc << '\n';
  }
  out.precision(old_precision);
}

}  // namespace pdiv
