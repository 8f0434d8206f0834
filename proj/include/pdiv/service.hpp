#pragma once

#include "pdiv/alignment.hpp"
#include "pdiv/annotations.hpp"
#include "pdiv/embedding.hpp"
#include "pdiv/ranking.hpp"
#include "pdiv/subspace.hpp"
#include "pdiv/synth_eval.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace httplib {
class Server;
}

namespace pdiv {

enum class TaskKind { kThreeInARow, kTriplet, kPairwise, kSideBySide };
std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);
std::size_t image_count(TaskKind kind);  // 3, 3, 2, 18

/// Side-by-side labels, as seen by the annotator (left vs right grid).
inline constexpr std::array<std::string_view, 3> kSideBySideLabels = {
    "more diverse", "equivalently diverse", "less diverse"};

struct TaskEnvelope {
  std::string task_id;
  TaskKind kind = TaskKind::kThreeInARow;
  /// SIDE_BY_SIDE: the left grid's 9 refs, then the right grid's 9.
  std::vector<std::string> image_refs;
  std::string issued_at;
  /// SIDE_BY_SIDE only: true when the diversified grid was placed on the left.
  bool diversified_left = true;
  std::string method;  // SIDE_BY_SIDE provenance
  double alpha = 0.0;
};

struct VoteSubmission {
  std::string task_id;
  std::string annotator_id;
  int choice = -1;    // image index (triplet kinds) or scale point (PAIRWISE)
  std::string label;  // SIDE_BY_SIDE label
  std::string region;
  std::string submitted_at;
};

/// Aggregated side-by-side task with the left/right placement undone:
/// votes say whether the diversified grid looked more, equally or less diverse.
struct SideBySideRecord {
  std::string task_id;
  std::string method;
  double alpha = 0.0;
  int more = 0;
  int equal = 0;
  int less = 0;
};

/// Votes that close a task.
inline constexpr std::size_t kVotesPerTask = 4;

struct StoreConfig {
  bool enforce_regions = false;  // each vote of a task must name a distinct region
};

/// Tasks, votes and completed annotations, backed by a line-delimited append
/// log that is replayed on open. Every mutation is written and flushed before
/// it becomes visible.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path log_path, StoreConfig config = {});

  /// Assigns a task id when empty; fails on a duplicate id or wrong ref count.
  TaskEnvelope add_task(TaskEnvelope task);

  /// Oldest open task of `kind` never issued to `annotator`; marks it issued.
  std::optional<TaskEnvelope> next_task(TaskKind kind, const std::string& annotator);

  struct SubmitResult {
    bool completed = false;
  };
  SubmitResult submit(VoteSubmission vote);

  /// Folds the votes of `task_id` into its record and closes the task.
  /// Triplet kinds need exactly kVotesPerTask votes, other kinds at least one.
  void complete_task(const std::string& task_id);

  std::vector<VoteSubmission> submissions(const std::string& task_id) const;
  std::optional<TaskEnvelope> task(const std::string& task_id) const;
  bool is_open(const std::string& task_id) const;

  std::vector<TripletAnnotation> annotations() const;
  std::vector<SideBySideRecord> side_by_side_records() const;
  /// Sorted image-id triples of every triplet task ever created.
  std::set<std::array<std::string, 3>> known_triplets() const;
  std::size_t open_task_count() const;

  /// Rewrites the log to hold exactly the current state.
  void compact();

  const std::filesystem::path& log_path() const { return log_path_; }

 private:
  struct TaskState {
    TaskEnvelope envelope;
    bool open = true;
    std::vector<VoteSubmission> votes;
    std::set<std::string> issued_to;
  };

  void replay();
  void append(const std::string& line);
  void apply_task(TaskEnvelope task);
  void validate_vote(const TaskState& state, const VoteSubmission& vote) const;
  void apply_complete(const std::string& task_id);

  std::filesystem::path log_path_;
  StoreConfig config_;
  mutable std::mutex mutex_;
  std::ofstream log_;
  std::map<std::string, TaskState> tasks_;
  std::vector<std::string> order_;
  std::vector<TripletAnnotation> annotations_;
  std::vector<SideBySideRecord> sxs_;
  std::uint64_t next_id_ = 0;
};

/// Canonical (sorted) key of an image triple.
std::array<std::string, 3> triplet_key(std::array<std::string, 3> ids);

/// Hardness = min over anchors of |Ŝ(a, b) − Ŝ(a, c)| under `representations`
/// (rows aligned with `pool`). Enumerates every triple up to 10,000, otherwise
/// samples 10,000 distinct triples under `seed`; returns the `n` hardest not
/// in `exclude`.
inline constexpr std::size_t kMiningCandidateLimit = 10000;
std::vector<std::array<std::string, 3>> mine_hard_triplets(const std::vector<std::string>& pool,
                                                           const RowMatrix& representations,
                                                           const std::set<std::array<std::string, 3>>& exclude,
                                                           std::size_t n, std::uint64_t seed);

double triplet_hardness(std::span<const double> a, std::span<const double> b, std::span<const double> c);

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "pdiv-data";
  StoreConfig store;
  AdapterKind adapter_kind = AdapterKind::kMultiplicative;
  TrainConfig train;
  Case3Mode case3_mode = Case3Mode::kPaperLiteral;
  std::size_t min_round_annotations = 20;
  std::size_t mine_per_round = 50;
  std::uint64_t seed = 0;
};

/// Service state shared by the HTTP handlers: the store, the image table, the
/// current representation and the training-round lock.
class ServiceCore {
 public:
  ServiceCore(ServiceConfig config, EmbeddingTable images, std::optional<ProjectionPipeline> pipeline);

  AnnotationStore& store() { return store_; }
  const EmbeddingTable& images() const { return images_; }
  const ServiceConfig& config() const { return config_; }

  struct RoundResult {
    std::size_t version = 0;
    TrainedAdapter adapter;
    std::filesystem::path adapter_path;
    std::size_t mined = 0;
  };
  /// Exclusive: a concurrent call fails with kConflict.
  RoundResult training_round();
  std::size_t adapter_version() const;
  std::optional<TrainedAdapter> current_adapter() const;

  /// Representation rows for `ids` (PATHS when an adapter exists, else the
  /// projection, else raw embeddings).
  RowMatrix represent(const std::vector<std::string>& ids) const;

  /// MMR over `candidates`; relevance defaults to relevance_celis on the raw
  /// image table with the first candidates as seeds.
  RankedResult rank(const std::vector<std::string>& candidates, std::optional<std::vector<double>> relevance,
                    const RankingConfig& ranking) const;

  /// Mines `n` tasks against the current representation and enqueues them.
  std::size_t enqueue_hard_triplets(std::size_t n, std::uint64_t seed);

  EvalReport report() const;
  void set_offline_report(EvalReport report);

 private:
  ServiceConfig config_;
  EmbeddingTable images_;
  std::optional<ProjectionPipeline> pipeline_;
  AnnotationStore store_;
  mutable std::mutex state_mutex_;
  std::mutex round_mutex_;
  std::optional<TrainedAdapter> adapter_;
  std::size_t version_ = 0;
  mutable std::optional<CalibrationStats> stats_;
  EvalReport offline_report_;
};

void register_routes(httplib::Server& server, ServiceCore& core);

/// JSON forms used on the wire.
std::string task_to_json(const TaskEnvelope& task);
std::string submission_to_json(const VoteSubmission& vote);
VoteSubmission submission_from_json(const std::string& text);

/// Blocks until the server stops (SIGINT/SIGTERM when `install_signal_handlers`).
void serve(ServiceCore& core, bool install_signal_handlers = true);

}  // namespace pdiv
