#include "pdiv/service.hpp"

#include "pdiv/error.hpp"
#include "pdiv/serialize.hpp"
#include "pdiv/timestamp.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <numeric>
#include <random>
#include <regex>

namespace pdiv {

using Json = nlohmann::ordered_json;

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kThreeInARow: return "three_in_a_row";
    case TaskKind::kTriplet: return "triplet";
    case TaskKind::kPairwise: return "pairwise";
    case TaskKind::kSideBySide: return "side_by_side";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view text) {
  for (auto k : {TaskKind::kThreeInARow, TaskKind::kTriplet, TaskKind::kPairwise, TaskKind::kSideBySide}) {
    if (text == to_string(k)) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown task kind '" + std::string(text) + "'");
}

std::size_t image_count(TaskKind kind) {
  switch (kind) {
    case TaskKind::kThreeInARow:
    case TaskKind::kTriplet: return 3;
    case TaskKind::kPairwise: return 2;
    case TaskKind::kSideBySide: return 18;
  }
  return 0;
}

namespace {

bool is_triplet_kind(TaskKind kind) { return kind == TaskKind::kThreeInARow || kind == TaskKind::kTriplet; }

Json task_json(const TaskEnvelope& t) {
  Json j;
  j["task_id"] = t.task_id;
  j["kind"] = std::string(to_string(t.kind));
  j["image_refs"] = t.image_refs;
  j["issued_at"] = t.issued_at;
  if (t.kind == TaskKind::kSideBySide) {
    j["diversified_left"] = t.diversified_left;
    j["method"] = t.method;
    j["alpha"] = t.alpha;
    j["labels"] = Json::array();
    for (auto label : kSideBySideLabels) j["labels"].push_back(std::string(label));
  }
  return j;
}

TaskEnvelope task_from(const Json& j) {
  TaskEnvelope t;
  t.task_id = j.value("task_id", "");
  t.kind = parse_task_kind(j.at("kind").get<std::string>());
  t.image_refs = j.at("image_refs").get<std::vector<std::string>>();
  t.issued_at = j.value("issued_at", "");
  t.diversified_left = j.value("diversified_left", true);
  t.method = j.value("method", "");
  t.alpha = j.value("alpha", 0.0);
  return t;
}

Json vote_json(const VoteSubmission& v) {
  Json j;
  j["task_id"] = v.task_id;
  j["annotator_id"] = v.annotator_id;
  if (v.label.empty()) {
    j["choice"] = v.choice;
  } else {
    j["choice"] = v.label;
  }
  if (!v.region.empty()) j["region"] = v.region;
  j["submitted_at"] = v.submitted_at;
  return j;
}

VoteSubmission vote_from(const Json& j) {
  VoteSubmission v;
  v.task_id = j.at("task_id").get<std::string>();
  v.annotator_id = j.at("annotator_id").get<std::string>();
  const auto& choice = j.at("choice");
  if (choice.is_string()) {
    v.label = choice.get<std::string>();
  } else {
    v.choice = choice.get<int>();
  }
  v.region = j.value("region", "");
  v.submitted_at = j.value("submitted_at", "");
  return v;
}

}  // namespace

std::string task_to_json(const TaskEnvelope& task) { return task_json(task).dump(); }
std::string submission_to_json(const VoteSubmission& vote) { return vote_json(vote).dump(); }

VoteSubmission submission_from_json(const std::string& text) {
  try {
    return vote_from(Json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid vote submission: ") + e.what());
  }
}

AnnotationStore::AnnotationStore(std::filesystem::path log_path, StoreConfig config)
    : log_path_(std::move(log_path)), config_(config) {
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  replay();
  log_.open(log_path_, std::ios::app);
  require(log_.good(), ErrorCode::kIo, "cannot open annotation log " + log_path_.string());
}

void AnnotationStore::replay() {
  std::ifstream in(log_path_);
  if (!in.good()) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      // A torn final write is dropped; anything earlier is corruption.
      require(in.peek() == EOF, ErrorCode::kParse,
              "corrupt annotation log line " + std::to_string(line_no));
      break;
    }
    const std::string type = j.value("type", "");
    if (type == "task") {
      apply_task(task_from(j));
    } else if (type == "issue") {
      tasks_.at(j.at("task_id").get<std::string>()).issued_to.insert(j.at("annotator").get<std::string>());
    } else if (type == "vote") {
      VoteSubmission v = vote_from(j);
      tasks_.at(v.task_id).votes.push_back(std::move(v));
    } else if (type == "complete") {
      apply_complete(j.at("task_id").get<std::string>());
    } else {
      fail(ErrorCode::kParse, "unknown record type in annotation log line " + std::to_string(line_no));
    }
  }
}

void AnnotationStore::append(const std::string& line) {
  log_ << line << '\n';
  log_.flush();
  require(log_.good(), ErrorCode::kIo, "failed appending to annotation log");
}

void AnnotationStore::apply_task(TaskEnvelope task) {
  const std::string id = task.task_id;
  if (id.rfind("task_", 0) == 0) {
    try {
      next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(5)) + 1);
    } catch (const std::exception&) {
    }
  }
  order_.push_back(id);
  tasks_.emplace(id, TaskState{std::move(task), true, {}, {}});
}

TaskEnvelope AnnotationStore::add_task(TaskEnvelope task) {
  require(task.image_refs.size() == image_count(task.kind), ErrorCode::kInvalidArgument,
          std::string(to_string(task.kind)) + " tasks carry exactly " +
              std::to_string(image_count(task.kind)) + " image refs");
  std::lock_guard lock(mutex_);
  if (task.task_id.empty()) {
    char buf[32];
    do {
      std::snprintf(buf, sizeof buf, "task_%06llu", static_cast<unsigned long long>(next_id_++));
    } while (tasks_.count(buf));
    task.task_id = buf;
  }
  require(!tasks_.count(task.task_id), ErrorCode::kConflict, "task '" + task.task_id + "' already exists");
  if (task.issued_at.empty()) task.issued_at = utc_timestamp();
  Json j = task_json(task);
  j["type"] = "task";
  append(j.dump());
  apply_task(task);
  return task;
}

std::optional<TaskEnvelope> AnnotationStore::next_task(TaskKind kind, const std::string& annotator) {
  require(!annotator.empty(), ErrorCode::kInvalidArgument, "annotator id is required");
  std::lock_guard lock(mutex_);
  for (const auto& id : order_) {
    auto& state = tasks_.at(id);
    if (!state.open || state.envelope.kind != kind || state.issued_to.count(annotator)) continue;
    append(Json{{"type", "issue"}, {"task_id", id}, {"annotator", annotator}}.dump());
    state.issued_to.insert(annotator);
    return state.envelope;
  }
  return std::nullopt;
}

void AnnotationStore::validate_vote(const TaskState& state, const VoteSubmission& vote) const {
  require(!vote.annotator_id.empty(), ErrorCode::kInvalidArgument, "annotator id is required");
  require(state.open, ErrorCode::kConflict, "task '" + vote.task_id + "' is closed");
  for (const auto& v : state.votes) {
    require(v.annotator_id != vote.annotator_id, ErrorCode::kConflict,
            "annotator '" + vote.annotator_id + "' already voted on task '" + vote.task_id + "'");
    if (config_.enforce_regions) {
      require(v.region != vote.region, ErrorCode::kConflict,
              "region '" + vote.region + "' already voted on task '" + vote.task_id + "'");
    }
  }
  if (config_.enforce_regions) {
    require(!vote.region.empty(), ErrorCode::kInvalidArgument, "a region tag is required");
  }
  const TaskKind kind = state.envelope.kind;
  if (kind == TaskKind::kSideBySide) {
    require(std::find(kSideBySideLabels.begin(), kSideBySideLabels.end(), vote.label) != kSideBySideLabels.end(),
            ErrorCode::kInvalidArgument, "side-by-side choice must be one of the three rating labels");
  } else {
    require(vote.label.empty() && vote.choice >= 0 && vote.choice < 3, ErrorCode::kInvalidArgument,
            std::string(to_string(kind)) + " choice must be an index in [0, 2]");
  }
}

AnnotationStore::SubmitResult AnnotationStore::submit(VoteSubmission vote) {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(vote.task_id);
  require(it != tasks_.end(), ErrorCode::kNotFound, "unknown task '" + vote.task_id + "'");
  validate_vote(it->second, vote);
  if (vote.submitted_at.empty()) vote.submitted_at = utc_timestamp();
  Json j = vote_json(vote);
  j["type"] = "vote";
  append(j.dump());
  it->second.votes.push_back(std::move(vote));
  SubmitResult result;
  if (it->second.votes.size() == kVotesPerTask) {
    append(Json{{"type", "complete"}, {"task_id", it->first}}.dump());
    apply_complete(it->first);
    result.completed = true;
  }
  return result;
}

void AnnotationStore::complete_task(const std::string& task_id) {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(task_id);
  require(it != tasks_.end(), ErrorCode::kNotFound, "unknown task '" + task_id + "'");
  require(it->second.open, ErrorCode::kConflict, "task '" + task_id + "' is already closed");
  const std::size_t n = it->second.votes.size();
  if (is_triplet_kind(it->second.envelope.kind)) {
    require(n == kVotesPerTask, ErrorCode::kInvalidArgument,
            "task '" + task_id + "' has " + std::to_string(n) + " of " + std::to_string(kVotesPerTask) + " votes");
  } else {
    require(n > 0, ErrorCode::kInvalidArgument, "task '" + task_id + "' has no votes");
  }
  append(Json{{"type", "complete"}, {"task_id", task_id}}.dump());
  apply_complete(task_id);
}

void AnnotationStore::apply_complete(const std::string& task_id) {
  auto& state = tasks_.at(task_id);
  state.open = false;
  const auto& e = state.envelope;
  if (is_triplet_kind(e.kind)) {
    TripletAnnotation a;
    a.triplet_id = task_id;
    a.image_ids = {e.image_refs[0], e.image_refs[1], e.image_refs[2]};
    bool all_regions = true;
    for (const auto& v : state.votes) {
      ++a.votes[static_cast<std::size_t>(v.choice)];
      all_regions = all_regions && !v.region.empty();
    }
    if (all_regions && state.votes.size() == kVotesPerTask) {
      for (const auto& v : state.votes) a.regions.push_back(v.region);
    }
    annotations_.push_back(std::move(a));
  } else if (e.kind == TaskKind::kSideBySide) {
    SideBySideRecord r{task_id, e.method, e.alpha, 0, 0, 0};
    for (const auto& v : state.votes) {
      // Labels rate the left grid against the right one.
      const bool left_more = v.label == kSideBySideLabels[0];
      const bool left_less = v.label == kSideBySideLabels[2];
      if (!left_more && !left_less) {
        ++r.equal;
      } else if (left_more == e.diversified_left) {
        ++r.more;
      } else {
        ++r.less;
      }
    }
    sxs_.push_back(std::move(r));
  }
}

std::vector<VoteSubmission> AnnotationStore::submissions(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(task_id);
  require(it != tasks_.end(), ErrorCode::kNotFound, "unknown task '" + task_id + "'");
  return it->second.votes;
}

std::optional<TaskEnvelope> AnnotationStore::task(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second.envelope;
}

bool AnnotationStore::is_open(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(task_id);
  require(it != tasks_.end(), ErrorCode::kNotFound, "unknown task '" + task_id + "'");
  return it->second.open;
}

std::vector<TripletAnnotation> AnnotationStore::annotations() const {
  std::lock_guard lock(mutex_);
  return annotations_;
}

std::vector<SideBySideRecord> AnnotationStore::side_by_side_records() const {
  std::lock_guard lock(mutex_);
  return sxs_;
}

std::set<std::array<std::string, 3>> AnnotationStore::known_triplets() const {
  std::lock_guard lock(mutex_);
  std::set<std::array<std::string, 3>> out;
  for (const auto& [id, state] : tasks_) {
    const auto& refs = state.envelope.image_refs;
    if (is_triplet_kind(state.envelope.kind)) out.insert(triplet_key({refs[0], refs[1], refs[2]}));
  }
  return out;
}

std::size_t AnnotationStore::open_task_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [id, state] : tasks_) n += state.open ? 1 : 0;
  return n;
}

void AnnotationStore::compact() {
  std::lock_guard lock(mutex_);
  std::string text;
  for (const auto& id : order_) {
    const auto& state = tasks_.at(id);
    Json t = task_json(state.envelope);
    t["type"] = "task";
    text += t.dump() + '\n';
    for (const auto& a : state.issued_to) {
      text += Json{{"type", "issue"}, {"task_id", id}, {"annotator", a}}.dump() + '\n';
    }
    for (const auto& v : state.votes) {
      Json j = vote_json(v);
      j["type"] = "vote";
      text += j.dump() + '\n';
    }
    if (!state.open) text += Json{{"type", "complete"}, {"task_id", id}}.dump() + '\n';
  }
  log_.close();
  write_text_file(log_path_, text);
  log_.open(log_path_, std::ios::app);
  require(log_.good(), ErrorCode::kIo, "cannot reopen annotation log " + log_path_.string());
}

std::array<std::string, 3> triplet_key(std::array<std::string, 3> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

double triplet_hardness(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  const double ab = similarity_hat(a, b);
  const double ac = similarity_hat(a, c);
  const double bc = similarity_hat(b, c);
  return std::min({std::abs(ab - ac), std::abs(ab - bc), std::abs(ac - bc)});
}

std::vector<std::array<std::string, 3>> mine_hard_triplets(const std::vector<std::string>& pool,
                                                           const RowMatrix& representations,
                                                           const std::set<std::array<std::string, 3>>& exclude,
                                                           std::size_t n, std::uint64_t seed) {
  const std::size_t m = pool.size();
  require(m >= 3, ErrorCode::kInvalidArgument, "mining needs a pool of at least 3 images");
  require(static_cast<std::size_t>(representations.rows()) == m, ErrorCode::kDimensionMismatch,
          "representations must align with the pool");
  if (n == 0) return {};

  std::vector<std::array<std::uint32_t, 3>> candidates;
  const long double total = static_cast<long double>(m) * (m - 1) * (m - 2) / 6.0L;
  if (total <= static_cast<long double>(kMiningCandidateLimit)) {
    for (std::uint32_t i = 0; i < m; ++i) {
      for (std::uint32_t j = i + 1; j < m; ++j) {
        for (std::uint32_t k = j + 1; k < m; ++k) candidates.push_back({i, j, k});
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(m - 1));
    std::set<std::array<std::uint32_t, 3>> seen;
    while (candidates.size() < kMiningCandidateLimit) {
      std::array<std::uint32_t, 3> t = {pick(rng), pick(rng), pick(rng)};
      if (t[0] == t[1] || t[0] == t[2] || t[1] == t[2]) continue;
      std::sort(t.begin(), t.end());
      if (seen.insert(t).second) candidates.push_back(t);
    }
  }

  const auto row = [&](std::uint32_t r) {
    return std::span<const double>(representations.data() + static_cast<Eigen::Index>(r) * representations.cols(),
                                   static_cast<std::size_t>(representations.cols()));
  };
  std::vector<double> hardness(candidates.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(candidates.size()); ++t) {
    const auto& c = candidates[static_cast<std::size_t>(t)];
    hardness[static_cast<std::size_t>(t)] = triplet_hardness(row(c[0]), row(c[1]), row(c[2]));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return hardness[a] < hardness[b]; });

  std::vector<std::array<std::string, 3>> out;
  for (std::size_t idx : order) {
    const auto& c = candidates[idx];
    std::array<std::string, 3> ids = {pool[c[0]], pool[c[1]], pool[c[2]]};
    if (exclude.count(triplet_key(ids))) continue;
    out.push_back(std::move(ids));
    if (out.size() == n) break;
  }
  return out;
}

ServiceCore::ServiceCore(ServiceConfig config, EmbeddingTable images, std::optional<ProjectionPipeline> pipeline)
    : config_(std::move(config)),
      images_(std::move(images)),
      pipeline_(std::move(pipeline)),
      store_(config_.data_dir / "annotations.log", config_.store) {
  require(images_.size() >= 3, ErrorCode::kInvalidArgument, "service needs at least 3 images");
  if (pipeline_) {
    require(pipeline_->ambient_dim() == images_.dimension(), ErrorCode::kDimensionMismatch,
            "projection ambient dimension does not match the image table");
  }
  // Resume from the newest persisted adapter.
  for (std::size_t v = 1;; ++v) {
    const auto path = config_.data_dir / ("adapter_v" + std::to_string(v) + ".json");
    if (!std::filesystem::exists(path)) break;
    adapter_ = load_adapter(path);
    version_ = v;
  }
}

std::size_t ServiceCore::adapter_version() const {
  std::lock_guard lock(state_mutex_);
  return version_;
}

std::optional<TrainedAdapter> ServiceCore::current_adapter() const {
  std::lock_guard lock(state_mutex_);
  return adapter_;
}

RowMatrix ServiceCore::represent(const std::vector<std::string>& ids) const {
  const RowMatrix raw = images_.subset(ids).matrix();
  std::lock_guard lock(state_mutex_);
  if (adapter_) return embed_rows(*adapter_, raw, pipeline_ ? &*pipeline_ : nullptr);
  if (pipeline_) return pipeline_->apply(raw);
  return raw;
}

RankedResult ServiceCore::rank(const std::vector<std::string>& candidates,
                               std::optional<std::vector<double>> relevance, const RankingConfig& ranking) const {
  require(!candidates.empty(), ErrorCode::kInvalidArgument, "no candidates to rank");
  if (!relevance) {
    const auto seeds = celis_seed_set(candidates);
    relevance.emplace();
    for (const auto& id : candidates) relevance->push_back(relevance_celis(id, seeds, images_));
  }
  CalibrationStats stats;
  if (ranking.alpha > 0.0) {
    std::optional<CalibrationStats> cached;
    {
      std::lock_guard lock(state_mutex_);
      cached = stats_;
    }
    if (!cached) {
      cached = calibrate(represent(images_.ids()), config_.seed);
      std::lock_guard lock(state_mutex_);
      stats_ = cached;
    }
    stats = *cached;
  }
  return mmr_select(candidates, *relevance, represent(candidates), stats, ranking);
}

std::size_t ServiceCore::enqueue_hard_triplets(std::size_t n, std::uint64_t seed) {
  const auto mined = mine_hard_triplets(images_.ids(), represent(images_.ids()), store_.known_triplets(), n, seed);
  for (const auto& ids : mined) {
    TaskEnvelope t;
    t.kind = TaskKind::kThreeInARow;
    t.image_refs = {ids[0], ids[1], ids[2]};
    store_.add_task(std::move(t));
  }
  return mined.size();
}

ServiceCore::RoundResult ServiceCore::training_round() {
  std::unique_lock round(round_mutex_, std::try_to_lock);
  require(round.owns_lock(), ErrorCode::kConflict, "a training round is already running");
  const auto annotations = store_.annotations();
  require(annotations.size() >= config_.min_round_annotations, ErrorCode::kInvalidArgument,
          "training round needs at least " + std::to_string(config_.min_round_annotations) +
              " complete annotations, have " + std::to_string(annotations.size()));
  const DatasetSplit split = split_dataset(annotations, config_.seed);
  const auto train = select_constraints(annotations, split.train, config_.case3_mode);
  const auto val = select_constraints(annotations, split.validation, config_.case3_mode);
  const ProjectionPipeline* pipeline = pipeline_ ? &*pipeline_ : nullptr;
  const AdapterVariant variant = make_variant(config_.adapter_kind, images_.dimension(), pipeline);
  RoundResult result;
  result.adapter = train_adapter(images_, train, val, pipeline, variant, config_.train);
  {
    std::lock_guard lock(state_mutex_);
    result.version = version_ + 1;
    result.adapter_path = config_.data_dir / ("adapter_v" + std::to_string(result.version) + ".json");
    save_adapter(result.adapter_path, result.adapter);
    adapter_ = result.adapter;
    version_ = result.version;
    stats_.reset();
  }
  result.mined = enqueue_hard_triplets(config_.mine_per_round, config_.seed + result.version);
  return result;
}

EvalReport ServiceCore::report() const {
  EvalReport out;
  std::map<std::pair<std::string, double>, std::vector<double>> groups;
  for (const auto& r : store_.side_by_side_records()) {
    groups[{r.method, r.alpha}].push_back(static_cast<double>(r.more - r.less));
  }
  for (const auto& [key, scores] : groups) {
    out.rows.push_back({key.first, key.second,
                        net_diversity_change(scores, std::vector<double>(scores.size(), 0.0), 0.0)});
  }
  std::lock_guard lock(state_mutex_);
  out.rows.insert(out.rows.end(), offline_report_.rows.begin(), offline_report_.rows.end());
  return out;
}

void ServiceCore::set_offline_report(EvalReport report) {
  std::lock_guard lock(state_mutex_);
  offline_report_ = std::move(report);
}

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_json(res, http_status(e.code()), Json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, Json{{"error", "parse_error"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, Json{{"error", "internal"}, {"message", e.what()}});
    }
  };
}

Json parse_body(const httplib::Request& req) {
  try {
    return req.body.empty() ? Json::object() : Json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("request body is not valid JSON: ") + e.what());
  }
}

Json eval_row_json(const EvalRow& r) {
  return Json{{"method", r.method},        {"alpha", r.alpha},
              {"net_change", r.change.net_change}, {"wins", r.change.wins},
              {"neutral", r.change.neutral},       {"losses", r.change.losses},
              {"ci95", r.change.ci95}};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find(',', start);
    const std::string item = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!item.empty()) out.push_back(item);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

void register_routes(httplib::Server& server, ServiceCore& core) {
  server.Get("/health", guarded([&core](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, Json{{"status", "ok"},
                             {"adapter_version", core.adapter_version()},
                             {"open_tasks", core.store().open_task_count()}});
  }));

  server.Get("/tasks/next", guarded([&core](const httplib::Request& req, httplib::Response& res) {
    require(req.has_param("kind") && req.has_param("annotator"), ErrorCode::kInvalidArgument,
            "kind and annotator query parameters are required");
    const auto task = core.store().next_task(parse_task_kind(req.get_param_value("kind")),
                                             req.get_param_value("annotator"));
    if (!task) {
      res.status = 204;
      return;
    }
    send_json(res, 200, task_json(*task));
  }));

  server.Post("/tasks", guarded([&core](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 201, task_json(core.store().add_task(task_from(parse_body(req)))));
  }));

  server.Post("/annotations", guarded([&core](const httplib::Request& req, httplib::Response& res) {
    VoteSubmission vote = vote_from(parse_body(req));
    const auto result = core.store().submit(vote);
    send_json(res, 201, Json{{"status", "stored"}, {"task_id", vote.task_id}, {"task_completed", result.completed}});
  }));

  server.Get(R"(/annotations/([^/]+))", guarded([&core](const httplib::Request& req, httplib::Response& res) {
    const std::string task_id = req.matches[1];
    Json subs = Json::array();
    for (const auto& v : core.store().submissions(task_id)) subs.push_back(vote_json(v));
    send_json(res, 200, Json{{"task_id", task_id}, {"open", core.store().is_open(task_id)}, {"submissions", subs}});
  }));

  server.Post("/rounds", guarded([&core](const httplib::Request&, httplib::Response& res) {
    const auto round = core.training_round();
    const auto& best = std::find_if(round.adapter.history.begin(), round.adapter.history.end(),
                                    [&](const HistoryRow& h) { return h.step == round.adapter.best_checkpoint_step; });
    send_json(res, 200, Json{{"version", round.version},
                             {"variant", std::string(to_string(round.adapter.variant.kind))},
                             {"best_checkpoint_step", round.adapter.best_checkpoint_step},
                             {"val_error", best != round.adapter.history.end() ? best->val_error : 0.0},
                             {"adapter_path", round.adapter_path.string()},
                             {"mined", round.mined}});
  }));

  const auto rank_handler = guarded([&core](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    RankingConfig config;
    if (req.has_param("alpha")) config.alpha = std::stod(req.get_param_value("alpha"));
    if (req.has_param("k")) config.k = std::stoul(req.get_param_value("k"));
    std::vector<std::string> candidates;
    if (body.contains("candidates")) {
      candidates = body.at("candidates").get<std::vector<std::string>>();
    } else if (req.has_param("candidates")) {
      candidates = split_list(req.get_param_value("candidates"));
    }
    std::optional<std::vector<double>> relevance;
    if (body.contains("relevance")) relevance = body.at("relevance").get<std::vector<double>>();
    const RankedResult ranked = core.rank(candidates, relevance, config);
    Json trace = Json::array();
    for (const auto& t : ranked.trace) {
      trace.push_back(Json{{"relevance", t.relevance}, {"marginal_diversity", t.marginal_diversity}, {"mmr_score", t.mmr_score}});
    }
    send_json(res, 200, Json{{"alpha", config.alpha}, {"k", config.k}, {"ids", ranked.ids}, {"trace", trace}});
  });
  server.Get("/rank", rank_handler);
  server.Post("/rank", rank_handler);

  server.Get("/report", guarded([&core](const httplib::Request&, httplib::Response& res) {
    Json rows = Json::array();
    for (const auto& r : core.report().rows) rows.push_back(eval_row_json(r));
    send_json(res, 200, Json{{"rows", rows}});
  }));
}

namespace {
httplib::Server* g_server = nullptr;
extern "C" void stop_server(int) {
  if (g_server != nullptr) g_server->stop();
}
}  // namespace

void serve(ServiceCore& core, bool install_signal_handlers) {
  httplib::Server server;
  register_routes(server, core);
  if (install_signal_handlers) {
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
  }
  const auto& cfg = core.config();
  const bool ok = server.bind_to_port(cfg.host, cfg.port);
  if (!ok) {
    g_server = nullptr;
    fail(ErrorCode::kIo, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  }
  server.listen_after_bind();
  g_server = nullptr;
  core.store().compact();
}

}  // namespace pdiv
