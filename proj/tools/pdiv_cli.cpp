// Command-line front end. Every subcommand takes --seed; failures print one
// JSON error line on stderr and exit nonzero.

#include "pdiv/alignment.hpp"
#include "pdiv/annotations.hpp"
#include "pdiv/corpus.hpp"
#include "pdiv/embedding.hpp"
#include "pdiv/error.hpp"
#include "pdiv/probes.hpp"
#include "pdiv/ranking.hpp"
#include "pdiv/serialize.hpp"
#include "pdiv/service.hpp"
#include "pdiv/subspace.hpp"
#include "pdiv/synth_eval.hpp"
#include "pdiv/synth_world.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace pdiv {
namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

/// Writes to `path`, or stdout when it is empty or "-".
template <typename F>
void emit(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
  } else {
    auto out = open_out(path);
    write(out);
  }
}

std::vector<std::string> read_id_list(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

/// `id,score` rows; a non-numeric first row is taken as a header.
std::map<std::string, double> read_scores(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::map<std::string, double> scores;
  const auto rows = parse_csv(in);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() >= 2, ErrorCode::kParse, path.string() + ": expected id,score rows");
    try {
      std::size_t used = 0;
      const double v = std::stod(rows[r][1], &used);
      scores[rows[r][0]] = v;
    } catch (const std::exception&) {
      require(r == 0, ErrorCode::kParse, path.string() + ": non-numeric score on row " + std::to_string(r + 1));
    }
  }
  return scores;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, "not a non-negative integer list: '" + text + "'");
    }
  }
  return out;
}

struct Representation {
  std::optional<ProjectionPipeline> pipeline;
  std::optional<TrainedAdapter> adapter;

  RowMatrix apply(const RowMatrix& raw) const {
    if (adapter) return embed_rows(*adapter, raw, pipeline ? &*pipeline : nullptr);
    if (pipeline) return pipeline->apply(raw);
    return raw;
  }
};

Representation load_representation(const std::string& pipeline_path, const std::string& adapter_path) {
  Representation r;
  if (!pipeline_path.empty()) r.pipeline = load_pipeline(pipeline_path);
  if (!adapter_path.empty()) r.adapter = load_adapter(adapter_path);
  return r;
}

EmbeddingTable represent_table(const EmbeddingTable& raw, const Representation& rep) {
  RowMatrix rows = rep.apply(raw.matrix());
  const auto dim = static_cast<std::size_t>(rows.cols());
  return EmbeddingTable(dim, false, raw.ids(), std::move(rows));
}

/// Probe tasks from `task,category,group,embedding_id` rows.
std::vector<ProbeTask> load_probe_tasks(const fs::path& path, const EmbeddingTable& table) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  const auto rows = parse_csv(in);
  require(!rows.empty() && rows[0].size() >= 4 && rows[0][0] == "task", ErrorCode::kParse,
          path.string() + ": expected header task,category,group,embedding_id");
  std::map<std::string, std::pair<ProbeCategory, std::map<std::string, std::vector<std::string>>>> grouped;
  std::vector<std::string> order;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    require(row.size() >= 4, ErrorCode::kParse, path.string() + ": short row " + std::to_string(r + 1));
    const ProbeCategory category = row[1] == "people" ? ProbeCategory::kPeople : ProbeCategory::kNonPeople;
    require(row[1] == "people" || row[1] == "non-people", ErrorCode::kParse,
            path.string() + ": category must be people or non-people");
    auto [it, inserted] = grouped.try_emplace(row[0]);
    if (inserted) {
      order.push_back(row[0]);
      it->second.first = category;
    }
    it->second.second[row[2]].push_back(row[3]);
  }
  std::vector<ProbeTask> tasks;
  for (const auto& name : order) {
    const auto& [category, groups] = grouped.at(name);
    ProbeTask t{name, category, {}};
    for (const auto& [label, ids] : groups) t.groups.push_back(table.subset(ids).matrix());
    tasks.push_back(std::move(t));
  }
  return tasks;
}

void write_probe_tasks(const fs::path& path, const SynthWorld& world) {
  auto out = open_out(path);
  out << "task,category,group,embedding_id\n";
  const auto& cfg = world.config;
  const std::size_t leak_free = 0;
  for (std::size_t i = 0; i < world.images.size(); ++i) {
    const auto& l = world.image_latents[i];
    const double z = l.person(static_cast<Eigen::Index>(leak_free));
    if (std::abs(z) > 0.5) out << "person_attr_" << leak_free << ",people," << (z > 0 ? "high" : "low") << ',' << world.images.id(i) << '\n';
  }
  if (cfg.background_dims == 0) return;
  for (std::size_t i = 0; i < world.images.size(); ++i) {
    const double z = world.image_latents[i].background(0);
    if (std::abs(z) > 0.5) out << "background_0,non-people," << (z > 0 ? "high" : "low") << ',' << world.images.id(i) << '\n';
  }
}

void add_world_options(CLI::App* app, SynthWorldConfig& cfg) {
  app->add_option("--ambient-dim", cfg.ambient_dim, "Ambient embedding dimension");
  app->add_option("--person-dims", cfg.person_dims, "Person attribute count");
  app->add_option("--background-dims", cfg.background_dims, "Background latent count");
  app->add_option("--noise", cfg.noise_sigma, "Isotropic embedding noise");
  app->add_option("--image-count", cfg.image_count, "Images in the world");
  app->add_option("--nouns", cfg.noun_count, "Noun count");
  app->add_option("--adjectives", cfg.adjective_count, "Adjective count");
  app->add_option("--locations", cfg.location_count, "Location count");
  app->add_option("--temperature", cfg.annotator_temperature, "Simulated annotator temperature");
  app->add_option("--background-leak", cfg.background_leak, "Background leak into person coordinates");
  app->add_option("--salience", cfg.salience_weights, "Per-attribute salience weights")->delimiter(',');
  app->add_option("--gains", cfg.embedding_gains, "Per-attribute embedding gains")->delimiter(',');
  app->add_flag("--normalize", cfg.normalize, "L2-normalize generated image embeddings");
}

void add_train_options(CLI::App* app, TrainConfig& cfg) {
  app->add_option("--batch-size", cfg.batch_size, "Triplets per step");
  app->add_option("--steps", cfg.steps, "Optimization steps");
  app->add_option("--lr", cfg.learning_rate, "Adam learning rate");
  app->add_option("--margin", cfg.margin_beta, "Hinge margin");
  app->add_option("--gamma", cfg.gamma, "L1 weight (default 1/(rows*cols))");
  app->add_option("--lambda", cfg.lambda, "L2 weight (default 1/(rows*cols))");
  app->add_option("--eval-every", cfg.eval_every, "Validation interval in steps");
}

int run(int argc, char** argv) {
  CLI::App app{"People-diversity representation toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  const auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Random seed"); };

  // extract-subspace
  auto* extract = app.add_subcommand("extract-subspace", "People projection from adjective+noun phrase embeddings");
  std::string phrases_path, adjectives_path, nouns_path, out_path, pipeline_path, adapter_path;
  std::size_t d_p = 12, d_b = 3;
  bool no_normalize = false;
  std::string mode_text = "phrase-centered";
  extract->add_option("--phrases", phrases_path, "Phrase embeddings (JSONL)")->required();
  extract->add_option("--adjectives", adjectives_path, "Adjectives CSV (Type,Text)")->required();
  extract->add_option("--nouns", nouns_path, "Nouns/locations CSV (Type,Text)")->required();
  extract->add_option("--d-p", d_p, "People subspace dimension");
  extract->add_option("--out", out_path, "Pipeline file to write")->required();
  extract->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_seed(extract);

  // remove-background
  auto* remove = app.add_subcommand("remove-background", "Project location-driven directions out of a pipeline");
  remove->add_option("--pipeline", pipeline_path, "Pipeline from extract-subspace")->required();
  remove->add_option("--phrases", phrases_path, "Phrase embeddings (JSONL)")->required();
  remove->add_option("--adjectives", adjectives_path, "Adjectives CSV")->required();
  remove->add_option("--nouns", nouns_path, "Nouns/locations CSV")->required();
  remove->add_option("--d-b", d_b, "Background directions to remove");
  remove->add_option("--mode", mode_text, "phrase-centered or literal-global");
  remove->add_option("--out", out_path, "Pipeline file to write")->required();
  remove->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_seed(remove);

  // train-adapter
  auto* train = app.add_subcommand("train-adapter", "Fit the perception adapter on triplet annotations");
  std::string images_path, annotations_path, history_path, variant_text = "multiplicative", case3_text = "paper-literal";
  TrainConfig train_cfg;
  std::size_t perception_dim = 12;
  train->add_option("--images", images_path, "Image embeddings (JSONL)")->required();
  train->add_option("--annotations", annotations_path, "Triplet annotations (JSONL)")->required();
  train->add_option("--pipeline", pipeline_path, "Projection pipeline");
  train->add_option("--variant", variant_text, "multiplicative, additive or perception-only");
  train->add_option("--output-dim", perception_dim, "Output dimension for perception-only without a pipeline");
  train->add_option("--case3-mode", case3_text, "paper-literal or centroid-geometric");
  train->add_option("--out", out_path, "Adapter file to write")->required();
  train->add_option("--history", history_path, "Training history CSV");
  train->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_train_options(train, train_cfg);
  add_seed(train);

  // embed
  auto* embed = app.add_subcommand("embed", "Apply a pipeline and optional adapter to embeddings");
  embed->add_option("--images", images_path, "Image embeddings (JSONL)")->required();
  embed->add_option("--pipeline", pipeline_path, "Projection pipeline");
  embed->add_option("--adapter", adapter_path, "Trained adapter");
  embed->add_option("--out", out_path, "Representation table (JSONL); stdout when omitted");
  embed->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_seed(embed);

  // rank
  auto* rank = app.add_subcommand("rank", "Diversify a candidate list with calibrated MMR");
  std::string candidates_path, relevance_path, general_path, calibration_path;
  RankingConfig ranking;
  rank->add_option("--candidates", candidates_path, "Ordered candidate ids, one per line")->required();
  rank->add_option("--images", images_path, "Image embeddings (JSONL)")->required();
  rank->add_option("--pipeline", pipeline_path, "Projection pipeline");
  rank->add_option("--adapter", adapter_path, "Trained adapter");
  rank->add_option("--relevance", relevance_path, "id,score rows; default is mean cosine to the first 10 candidates");
  rank->add_option("--general", general_path, "Embedding table for default relevance (defaults to --images)");
  rank->add_option("--calibration", calibration_path, "Calibration ids (defaults to every image)");
  rank->add_option("--alpha", ranking.alpha, "Diversity weight in [0, 1]");
  rank->add_option("--k", ranking.k, "Results to select");
  rank->add_option("--out", out_path, "Ranking CSV; stdout when omitted");
  rank->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_seed(rank);

  // probe
  auto* probe = app.add_subcommand("probe", "Linear-probe AUC of a representation");
  std::string tasks_path;
  probe->add_option("--embeddings", images_path, "Embeddings referenced by the tasks (JSONL)")->required();
  probe->add_option("--tasks", tasks_path, "CSV task,category,group,embedding_id")->required();
  probe->add_option("--pipeline", pipeline_path, "Projection pipeline");
  probe->add_option("--adapter", adapter_path, "Trained adapter");
  probe->add_option("--out", out_path, "Result CSV; stdout when omitted");
  probe->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_seed(probe);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Probe AUC over a (d_p, d_b) grid");
  std::string dp_grid = "4,8,12,16", db_grid = "0,1,2,3";
  sweep->add_option("--phrases", phrases_path, "Phrase embeddings (JSONL)")->required();
  sweep->add_option("--adjectives", adjectives_path, "Adjectives CSV")->required();
  sweep->add_option("--nouns", nouns_path, "Nouns/locations CSV")->required();
  sweep->add_option("--embeddings", images_path, "Embeddings referenced by the tasks (JSONL)")->required();
  sweep->add_option("--tasks", tasks_path, "CSV task,category,group,embedding_id")->required();
  sweep->add_option("--dp-grid", dp_grid, "Comma-separated d_p values");
  sweep->add_option("--db-grid", db_grid, "Comma-separated d_b values");
  sweep->add_option("--mode", mode_text, "phrase-centered or literal-global");
  sweep->add_option("--out", out_path, "Sweep CSV; stdout when omitted");
  sweep->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_seed(sweep);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic world and simulated annotations");
  SynthWorldConfig world_cfg;
  std::size_t annotation_count = 5000;
  std::string out_dir;
  simulate->add_option("--out-dir", out_dir, "Directory for the generated files")->required();
  simulate->add_option("--annotations", annotation_count, "Simulated triplet annotations");
  add_world_options(simulate, world_cfg);
  add_seed(simulate);

  // eval
  auto* eval = app.add_subcommand("eval", "End-to-end net diversity change on synthetic queries");
  QueryConfig query_cfg;
  EvalConfig eval_cfg;
  ArtifactConfig artifact_cfg;
  artifact_cfg.train.steps = 10000;
  artifact_cfg.perception_train.steps = 10000;
  std::vector<std::string> method_names = {"random", "two-attribute", "raw-embedding", "text-derived-only",
                                           "perception-aligned-only", "paths"};
  eval->add_option("--queries", query_cfg.count, "Synthetic queries");
  eval->add_option("--candidates", query_cfg.candidates, "Candidates per query");
  eval->add_option("--alphas", eval_cfg.alphas, "Diversity weights")->delimiter(',');
  eval->add_option("--k", eval_cfg.k, "Results per query");
  eval->add_option("--epsilon", eval_cfg.epsilon, "Oracle dead-band");
  eval->add_option("--methods", method_names, "Methods to compare")->delimiter(',');
  eval->add_option("--annotations", artifact_cfg.annotation_count, "Simulated training annotations");
  eval->add_option("--steps", artifact_cfg.train.steps, "Adapter training steps");
  eval->add_option("--perception-steps", artifact_cfg.perception_train.steps, "Perception-only training steps");
  eval->add_option("--d-p", artifact_cfg.d_p, "People subspace dimension");
  eval->add_option("--d-b", artifact_cfg.d_b, "Background directions removed");
  eval->add_option("--case3-mode", case3_text, "paper-literal or centroid-geometric");
  eval->add_option("--out", out_path, "Report CSV; stdout when omitted");
  add_world_options(eval, world_cfg);
  add_seed(eval);

  // convert-annotations
  auto* convert = app.add_subcommand("convert-annotations", "Votes to similarity constraints, split and consensus");
  std::string split_path;
  convert->add_option("--annotations", annotations_path, "Triplet annotations (JSONL)")->required();
  convert->add_option("--case3-mode", case3_text, "paper-literal or centroid-geometric");
  convert->add_option("--out", out_path, "Constraint sets (JSONL); stdout when omitted");
  convert->add_option("--split-out", split_path, "Write the 85/10/5 split here (JSON)");
  add_seed(convert);

  // mine
  auto* mine = app.add_subcommand("mine", "Hardest unannotated triplets under the current representation");
  std::size_t mine_n = 50;
  std::string pool_path;
  mine->add_option("--images", images_path, "Image embeddings (JSONL)")->required();
  mine->add_option("--pipeline", pipeline_path, "Projection pipeline");
  mine->add_option("--adapter", adapter_path, "Trained adapter");
  mine->add_option("--annotations", annotations_path, "Already annotated triplets to exclude");
  mine->add_option("--pool", pool_path, "Candidate image ids (defaults to every image)");
  mine->add_option("--n", mine_n, "Triplets to return");
  mine->add_option("--out", out_path, "Triplets CSV; stdout when omitted");
  mine->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_seed(mine);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP annotation and ranking service");
  ServiceConfig service_cfg;
  std::string report_path;
  serve_cmd->add_option("--host", service_cfg.host, "Bind address");
  serve_cmd->add_option("--port", service_cfg.port, "Port");
  serve_cmd->add_option("--data-dir", service_cfg.data_dir, "Annotation log and adapter versions");
  serve_cmd->add_option("--images", images_path, "Image embeddings (JSONL)")->required();
  serve_cmd->add_option("--pipeline", pipeline_path, "Projection pipeline");
  serve_cmd->add_option("--variant", variant_text, "Adapter variant trained by rounds");
  serve_cmd->add_option("--case3-mode", case3_text, "paper-literal or centroid-geometric");
  serve_cmd->add_option("--mine-per-round", service_cfg.mine_per_round, "Tasks mined after each round");
  serve_cmd->add_option("--report", report_path, "Offline eval report CSV served by /report");
  serve_cmd->add_flag("--enforce-regions", service_cfg.store.enforce_regions, "Require one vote per region");
  serve_cmd->add_flag("--no-normalize", no_normalize, "Keep embeddings as stored");
  add_train_options(serve_cmd, service_cfg.train);
  add_seed(serve_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << Json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  const bool normalize = !no_normalize;

  if (extract->parsed()) {
    const PhraseCorpus corpus = load_phrase_corpus(adjectives_path, nouns_path);
    const EmbeddingTable phrases = load_embeddings(phrases_path, normalize);
    const auto records = person_phrase_records(corpus);
    check_records_resolve(records, phrases);
    const PeopleProjection people = extract_person_subspace(phrases, records, d_p);
    BackgroundRemoval none;
    none.d_p = d_p;
    none.directions = Matrix::Zero(0, static_cast<Eigen::Index>(d_p));
    ProjectionPipeline pipeline = compose_projection(people, none);
    pipeline.provenance.corpus_ids = {fs::path(adjectives_path).filename().string(), fs::path(nouns_path).filename().string(),
                                      fs::path(phrases_path).filename().string()};
    save_pipeline(out_path, pipeline);
    std::cout << Json{{"pipeline", out_path}, {"d_p", d_p}, {"d_b", 0}}.dump() << '\n';
  } else if (remove->parsed()) {
    const ProjectionPipeline base = load_pipeline(pipeline_path);
    const PhraseCorpus corpus = load_phrase_corpus(adjectives_path, nouns_path);
    const EmbeddingTable phrases = load_embeddings(phrases_path, normalize);
    const auto records = location_phrase_records(corpus);
    check_records_resolve(records, phrases);
    const BackgroundMode mode = parse_background_mode(mode_text);
    const BackgroundRemoval removal = extract_background_subspace(phrases, records, base.people, d_b, mode);
    ProjectionPipeline pipeline = compose_projection(base.people, removal);
    pipeline.provenance.corpus_ids = base.provenance.corpus_ids;
    pipeline.provenance.mode = mode;
    save_pipeline(out_path, pipeline);
    Json warnings = removal.warnings;
    std::cout << Json{{"pipeline", out_path}, {"d_p", pipeline.output_dim()}, {"d_b", removal.d_b()}, {"warnings", warnings}}.dump()
              << '\n';
  } else if (train->parsed()) {
    const EmbeddingTable images = load_embeddings(images_path, normalize);
    const auto annotations = load_annotations(annotations_path);
    const Case3Mode case3 = parse_case3_mode(case3_text);
    const DatasetSplit split = split_dataset(annotations, seed);
    const auto train_set = select_constraints(annotations, split.train, case3);
    const auto val_set = select_constraints(annotations, split.validation, case3);
    const auto test_set = select_constraints(annotations, split.test, case3);
    std::optional<ProjectionPipeline> pipeline;
    if (!pipeline_path.empty()) pipeline = load_pipeline(pipeline_path);
    const ProjectionPipeline* p = pipeline ? &*pipeline : nullptr;
    const AdapterVariant variant = make_variant(parse_adapter_kind(variant_text), images.dimension(), p, perception_dim);
    train_cfg.seed = seed;
    const TrainedAdapter adapter = train_adapter(images, train_set, val_set, p, variant, train_cfg);
    save_adapter(out_path, adapter);
    if (!history_path.empty()) {
      auto out = open_out(history_path);
      write_history_csv(out, adapter.history);
    }
    TrainedAdapter initial = adapter;
    initial.matrix = variant.target;
    const auto error_of = [&](const TrainedAdapter& a) {
      RowMatrix rows = embed_rows(a, images.matrix(), p);
      const auto dim = static_cast<std::size_t>(rows.cols());
      return triplet_error(test_set, EmbeddingTable(dim, false, images.ids(), std::move(rows)));
    };
    std::cout << Json{{"adapter", out_path},
                      {"variant", variant_text},
                      {"best_checkpoint_step", adapter.best_checkpoint_step},
                      {"test_error_initial", error_of(initial)},
                      {"test_error", error_of(adapter)},
                      {"train", split.train.size()},
                      {"validation", split.validation.size()},
                      {"test", split.test.size()}}
                     .dump()
              << '\n';
  } else if (embed->parsed()) {
    const EmbeddingTable images = load_embeddings(images_path, normalize);
    const EmbeddingTable reps = represent_table(images, load_representation(pipeline_path, adapter_path));
    emit(out_path, [&](std::ostream& out) { write_embeddings(out, reps); });
  } else if (rank->parsed()) {
    const EmbeddingTable images = load_embeddings(images_path, normalize);
    const Representation rep = load_representation(pipeline_path, adapter_path);
    const auto candidates = read_id_list(candidates_path);
    std::vector<double> relevance;
    if (!relevance_path.empty()) {
      const auto scores = read_scores(relevance_path);
      for (const auto& id : candidates) {
        const auto it = scores.find(id);
        require(it != scores.end(), ErrorCode::kNotFound, "no relevance score for '" + id + "'");
        relevance.push_back(it->second);
      }
    } else {
      const EmbeddingTable general = general_path.empty() ? images : load_embeddings(general_path, normalize);
      const auto seeds = celis_seed_set(candidates);
      for (const auto& id : candidates) relevance.push_back(relevance_celis(id, seeds, general));
    }
    const RowMatrix reps = rep.apply(images.subset(candidates).matrix());
    CalibrationStats stats;
    if (ranking.alpha > 0.0) {
      const RowMatrix calib = calibration_path.empty() ? rep.apply(images.matrix())
                                                       : rep.apply(images.subset(read_id_list(calibration_path)).matrix());
      stats = calibrate(calib, seed);
    }
    const RankedResult result = mmr_select(candidates, relevance, reps, stats, ranking);
    emit(out_path, [&](std::ostream& out) { write_ranking_csv(out, result); });
  } else if (probe->parsed()) {
    const EmbeddingTable table = load_embeddings(images_path, normalize);
    const Representation rep = load_representation(pipeline_path, adapter_path);
    const auto tasks = load_probe_tasks(tasks_path, table);
    emit(out_path, [&](std::ostream& out) {
      out << "task,category,auc,train_auc\n";
      out.precision(17);
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        const ProbeResult r = train_probe(tasks[i], [&](const RowMatrix& raw) { return rep.apply(raw); }, seed + i);
        out << csv_escape(r.task) << ',' << to_string(tasks[i].category) << ',' << r.auc << ',' << r.train_auc << '\n';
      }
    });
  } else if (sweep->parsed()) {
    const PhraseCorpus corpus = load_phrase_corpus(adjectives_path, nouns_path);
    const EmbeddingTable phrases = load_embeddings(phrases_path, normalize);
    const EmbeddingTable table = load_embeddings(images_path, normalize);
    const auto person = person_phrase_records(corpus);
    const auto location = location_phrase_records(corpus);
    const auto tasks = load_probe_tasks(tasks_path, table);
    const SweepInputs inputs{&phrases, &person, &location, parse_background_mode(mode_text)};
    const SweepReport report = run_sweep(parse_size_list(dp_grid), parse_size_list(db_grid), inputs, tasks, seed);
    for (const auto& note : report.notes) std::cerr << Json{{"note", note}}.dump() << '\n';
    emit(out_path, [&](std::ostream& out) { write_sweep_csv(out, report); });
  } else if (simulate->parsed()) {
    world_cfg.seed = seed;
    const SynthWorld world = generate_world(world_cfg);
    const fs::path dir = out_dir;
    fs::create_directories(dir);
    save_embeddings(dir / "images.jsonl", world.images);
    save_embeddings(dir / "phrases.jsonl", world.phrases);
    save_phrase_corpus(world.corpus, dir / "adjectives.csv", dir / "nouns.csv");
    {
      auto out = open_out(dir / "latents.jsonl");
      for (std::size_t i = 0; i < world.images.size(); ++i) {
        const auto& l = world.image_latents[i];
        out << Json{{"id", world.images.id(i)},
                    {"person", std::vector<double>(l.person.data(), l.person.data() + l.person.size())},
                    {"background", std::vector<double>(l.background.data(), l.background.data() + l.background.size())}}
                   .dump()
            << '\n';
      }
    }
    const auto annotations = simulate_annotations(world, annotation_count, default_annotator(world), seed);
    save_annotations(dir / "annotations.jsonl", annotations);
    write_probe_tasks(dir / "probe_tasks.csv", world);
    const auto& c = world.config;
    std::cout << Json{{"out_dir", dir.string()},
                      {"images", world.images.size()},
                      {"phrases", world.phrases.size()},
                      {"annotations", annotations.size()},
                      {"normalized", c.normalize},
                      {"salience", c.salience_weights},
                      {"gains", c.embedding_gains}}
                     .dump()
              << '\n';
  } else if (eval->parsed()) {
    world_cfg.seed = seed;
    const SynthWorld world = generate_world(world_cfg);
    artifact_cfg.seed = seed;
    artifact_cfg.train.seed = seed;
    artifact_cfg.perception_train.seed = seed + 1;
    artifact_cfg.case3_mode = parse_case3_mode(case3_text);
    std::vector<BaselineKind> kinds;
    for (const auto& name : method_names) kinds.push_back(parse_baseline_kind(name));
    artifact_cfg.train_perception_only =
        std::find(kinds.begin(), kinds.end(), BaselineKind::kPerceptionAlignedOnly) != kinds.end();
    const WorldArtifacts artifacts = build_artifacts(world, artifact_cfg);
    query_cfg.seed = seed;
    const auto queries = generate_queries(world, query_cfg);
    std::vector<Baseline> methods;
    for (auto k : kinds) methods.push_back(baseline_representation(k, world, artifacts.view()));
    eval_cfg.seed = seed;
    const EvalReport report = evaluate_methods(world, queries, methods, eval_cfg);
    emit(out_path, [&](std::ostream& out) { write_eval_csv(out, report); });
  } else if (convert->parsed()) {
    const auto annotations = load_annotations(annotations_path);
    const Case3Mode case3 = parse_case3_mode(case3_text);
    emit(out_path, [&](std::ostream& out) {
      for (const auto& a : annotations) {
        const ConstraintSet set = votes_to_constraints(a, case3);
        Json constraints = Json::array();
        for (const auto& c : set.constraints) {
          constraints.push_back(Json{{"edge_low", {set.image_ids[static_cast<std::size_t>(c.low.i)], set.image_ids[static_cast<std::size_t>(c.low.j)]}},
                                     {"edge_high", {set.image_ids[static_cast<std::size_t>(c.high.i)], set.image_ids[static_cast<std::size_t>(c.high.j)]}},
                                     {"relation", c.relation == Relation::kEqual ? "EQUAL" : "STRICTLY_LESS"}});
        }
        out << Json{{"triplet_id", set.triplet_id}, {"case", std::string(to_string(set.case_label))}, {"constraints", constraints}}.dump()
            << '\n';
      }
    });
    if (!split_path.empty()) {
      const DatasetSplit split = split_dataset(annotations, seed);
      auto out = open_out(split_path);
      out << Json{{"seed", seed}, {"train", split.train}, {"validation", split.validation}, {"test", split.test}}.dump(1) << '\n';
    }
    const ConsensusStats stats = consensus_stats(annotations);
    std::cerr << Json{{"annotations", annotations.size()}, {"percent_full_agreement", stats.percent_full_agreement}}.dump() << '\n';
  } else if (mine->parsed()) {
    const EmbeddingTable images = load_embeddings(images_path, normalize);
    const Representation rep = load_representation(pipeline_path, adapter_path);
    const auto pool = pool_path.empty() ? images.ids() : read_id_list(pool_path);
    std::set<std::array<std::string, 3>> exclude;
    if (!annotations_path.empty()) {
      for (const auto& a : load_annotations(annotations_path)) exclude.insert(triplet_key(a.image_ids));
    }
    const auto mined = mine_hard_triplets(pool, rep.apply(images.subset(pool).matrix()), exclude, mine_n, seed);
    emit(out_path, [&](std::ostream& out) {
      out << "image_a,image_b,image_c\n";
      for (const auto& t : mined) out << csv_escape(t[0]) << ',' << csv_escape(t[1]) << ',' << csv_escape(t[2]) << '\n';
    });
  } else if (serve_cmd->parsed()) {
    EmbeddingTable images = load_embeddings(images_path, normalize);
    std::optional<ProjectionPipeline> pipeline;
    if (!pipeline_path.empty()) pipeline = load_pipeline(pipeline_path);
    service_cfg.adapter_kind = parse_adapter_kind(variant_text);
    service_cfg.case3_mode = parse_case3_mode(case3_text);
    service_cfg.seed = seed;
    service_cfg.train.seed = seed;
    ServiceCore core(service_cfg, std::move(images), std::move(pipeline));
    if (!report_path.empty()) {
      std::ifstream in(report_path);
      require(in.good(), ErrorCode::kIo, "cannot open " + report_path);
      const auto rows = parse_csv(in);
      EvalReport report;
      for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() < 7) continue;
        report.rows.push_back({rows[r][0], std::stod(rows[r][1]),
                               NetChange{std::stod(rows[r][2]), std::stoul(rows[r][3]), std::stoul(rows[r][4]),
                                         std::stoul(rows[r][5]), std::stod(rows[r][6])}});
      }
      core.set_offline_report(std::move(report));
    }
    std::cerr << Json{{"listening", service_cfg.host + ":" + std::to_string(service_cfg.port)}}.dump() << '\n';
    serve(core);
  }
  return 0;
}

}  // namespace
}  // namespace pdiv

int main(int argc, char** argv) {
  try {
    return pdiv::run(argc, argv);
  } catch (const pdiv::Error& e) {
    std::cerr << Json{{"error", std::string(pdiv::to_string(e.code()))}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 3;
  }
}
