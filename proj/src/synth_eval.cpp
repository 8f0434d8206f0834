#include "pdiv/synth_eval.hpp"

#include "pdiv/corpus.hpp"
#include "pdiv/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <unordered_map>

namespace pdiv {

AnnotatorModel default_annotator(const SynthWorld& world) {
  const auto& w = world.config.salience_weights;
  return {Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())),
          world.config.annotator_temperature};
}

double weighted_distance(const Vector& a, const Vector& b, const Vector& weights) {
  require(a.size() == weights.size() && b.size() == weights.size(), ErrorCode::kDimensionMismatch,
          "latent and weight lengths differ");
  double sum = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    const double x = weights(d) * (a(d) - b(d));
    sum += x * x;
  }
  return std::sqrt(sum);
}

std::array<int, 3> simulate_votes(const std::array<Vector, 3>& latents, const AnnotatorModel& model,
                                  std::mt19937_64& rng) {
  require(model.temperature >= 0.0, ErrorCode::kInvalidArgument, "temperature must be non-negative");
  std::array<double, 3> score{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) score[static_cast<std::size_t>(i)] += weighted_distance(latents[static_cast<std::size_t>(i)], latents[static_cast<std::size_t>(j)], model.weights);
    }
  }
  std::array<int, 3> votes{};
  if (model.temperature == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (score[i] > score[best]) best = i;
    }
    votes[best] = 4;
    return votes;
  }
  const double top = *std::max_element(score.begin(), score.end());
  std::array<double, 3> p{};
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    p[i] = std::exp((score[i] - top) / model.temperature);
    total += p[i];
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int v = 0; v < 4; ++v) {
    const double u = unit(rng) * total;
    std::size_t pick = 2;
    double acc = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      acc += p[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    ++votes[pick];
  }
  return votes;
}

TripletAnnotation simulate_annotation(std::string triplet_id, const std::array<std::string, 3>& ids,
                                      const std::array<Vector, 3>& latents, const AnnotatorModel& model,
                                      std::mt19937_64& rng) {
  TripletAnnotation a;
  a.triplet_id = std::move(triplet_id);
  a.image_ids = ids;
  a.votes = simulate_votes(latents, model, rng);
  return a;
}

std::vector<TripletAnnotation> simulate_annotations(const SynthWorld& world, std::size_t count,
                                                    const AnnotatorModel& model, std::uint64_t seed) {
  const std::size_t n = world.images.size();
  require(n >= 3, ErrorCode::kInvalidArgument, "world needs at least 3 images");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<TripletAnnotation> out;
  out.reserve(count);
  char name[32];
  for (std::size_t t = 0; t < count; ++t) {
    std::array<std::size_t, 3> idx{};
    idx[0] = pick(rng);
    do idx[1] = pick(rng); while (idx[1] == idx[0]);
    do idx[2] = pick(rng); while (idx[2] == idx[0] || idx[2] == idx[1]);
    std::snprintf(name, sizeof name, "tri_%06zu", t);
    out.push_back(simulate_annotation(
        name, {world.images.id(idx[0]), world.images.id(idx[1]), world.images.id(idx[2])},
        {world.image_latents[idx[0]].person, world.image_latents[idx[1]].person,
         world.image_latents[idx[2]].person},
        model, rng));
  }
  return out;
}

double set_diversity(const std::vector<Vector>& person_latents, const Vector& weights) {
  const std::size_t n = person_latents.size();
  require(n >= 2, ErrorCode::kInvalidArgument, "set diversity needs at least 2 images");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) sum += weighted_distance(person_latents[i], person_latents[j], weights);
  }
  return sum / (0.5 * static_cast<double>(n * (n - 1)));
}

double set_diversity_oracle(const std::vector<std::string>& ids, const SynthWorld& world,
                            const Vector& weights) {
  std::vector<Vector> latents;
  latents.reserve(ids.size());
  for (const auto& id : ids) latents.push_back(world.latent(id).person);
  return set_diversity(latents, weights);
}

NetChange net_diversity_change(const std::vector<double>& diversified, const std::vector<double>& baseline,
                               double epsilon) {
  require(diversified.size() == baseline.size(), ErrorCode::kInvalidArgument,
          "diversified and baseline sets must be paired");
  require(!diversified.empty(), ErrorCode::kInvalidArgument, "no paired sets to compare");
  require(epsilon >= 0.0, ErrorCode::kInvalidArgument, "epsilon must be non-negative");
  NetChange out;
  std::vector<double> scores;
  scores.reserve(diversified.size());
  for (std::size_t i = 0; i < diversified.size(); ++i) {
    if (diversified[i] > baseline[i] + epsilon) {
      ++out.wins;
      scores.push_back(1.0);
    } else if (diversified[i] < baseline[i] - epsilon) {
      ++out.losses;
      scores.push_back(-1.0);
    } else {
      ++out.neutral;
      scores.push_back(0.0);
    }
  }
  const auto n = static_cast<double>(scores.size());
  out.net_change = (static_cast<double>(out.wins) - static_cast<double>(out.losses)) / n;
  if (scores.size() > 1) {
    double ss = 0.0;
    for (double s : scores) ss += (s - out.net_change) * (s - out.net_change);
    out.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

NetChange net_diversity_change(const std::vector<std::vector<std::string>>& diversified,
                               const std::vector<std::vector<std::string>>& baseline,
                               const std::function<double(const std::vector<std::string>&)>& oracle,
                               double epsilon) {
  require(diversified.size() == baseline.size(), ErrorCode::kInvalidArgument,
          "diversified and baseline sets must be paired");
  std::vector<double> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < diversified.size(); ++i) {
    a.push_back(oracle(diversified[i]));
    b.push_back(oracle(baseline[i]));
  }
  return net_diversity_change(a, b, epsilon);
}

ImageSet world_images(const SynthWorld& world) {
  return {world.images.ids(), world.images.matrix(), world.image_latents};
}

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kRandom: return "random";
    case BaselineKind::kTwoAttribute: return "two-attribute";
    case BaselineKind::kRawEmbedding: return "raw-embedding";
    case BaselineKind::kTextDerivedOnly: return "text-derived-only";
    case BaselineKind::kPerceptionAlignedOnly: return "perception-aligned-only";
    case BaselineKind::kPaths: return "paths";
  }
  return "?";
}

BaselineKind parse_baseline_kind(std::string_view text) {
  for (auto k : {BaselineKind::kRandom, BaselineKind::kTwoAttribute, BaselineKind::kRawEmbedding,
                 BaselineKind::kTextDerivedOnly, BaselineKind::kPerceptionAlignedOnly, BaselineKind::kPaths}) {
    if (text == to_string(k)) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown method '" + std::string(text) + "'");
}

Baseline baseline_representation(BaselineKind kind, const SynthWorld& world, const TrainedArtifacts& artifacts) {
  Baseline b;
  b.kind = kind;
  switch (kind) {
    case BaselineKind::kRandom:
      b.dimension = 0;
      b.represent = [](const ImageSet& s) { return RowMatrix(static_cast<Eigen::Index>(s.size()), 0); };
      break;
    case BaselineKind::kTwoAttribute: {
      b.dimension = 2;
      const auto dims = world.config.two_attribute_dims;
      b.represent = [dims](const ImageSet& s) {
        require(s.latents.size() == s.size(), ErrorCode::kInvalidArgument,
                "two-attribute representation needs image latents");
        RowMatrix out(static_cast<Eigen::Index>(s.size()), 2);
        for (std::size_t i = 0; i < s.size(); ++i) {
          out(static_cast<Eigen::Index>(i), 0) = s.latents[i].person(static_cast<Eigen::Index>(dims[0]));
          out(static_cast<Eigen::Index>(i), 1) = s.latents[i].person(static_cast<Eigen::Index>(dims[1]));
        }
        return out;
      };
      break;
    }
    case BaselineKind::kRawEmbedding:
      b.dimension = world.config.ambient_dim;
      b.represent = [](const ImageSet& s) { return s.raw; };
      break;
    case BaselineKind::kTextDerivedOnly: {
      const ProjectionPipeline* p = artifacts.pipeline;
      require(p != nullptr, ErrorCode::kInvalidArgument, "text-derived representation needs a projection pipeline");
      b.dimension = p->output_dim();
      b.represent = [p](const ImageSet& s) { return p->apply(s.raw); };
      break;
    }
    case BaselineKind::kPerceptionAlignedOnly: {
      const TrainedAdapter* a = artifacts.perception_only;
      require(a != nullptr, ErrorCode::kInvalidArgument, "perception-aligned representation needs its adapter");
      b.dimension = static_cast<std::size_t>(a->matrix.cols());
      b.represent = [a](const ImageSet& s) { return embed_rows(*a, s.raw, nullptr); };
      break;
    }
    case BaselineKind::kPaths: {
      const ProjectionPipeline* p = artifacts.pipeline;
      const TrainedAdapter* a = artifacts.paths;
      require(p != nullptr && a != nullptr, ErrorCode::kInvalidArgument,
              "paths representation needs a projection pipeline and an adapter");
      b.dimension = static_cast<std::size_t>(a->matrix.cols());
      b.represent = [p, a](const ImageSet& s) { return embed_rows(*a, s.raw, p); };
      break;
    }
  }
  return b;
}

BoostTable diversity_boost_table(const ImageSet& probes, const ImageSet& context,
                                 const std::vector<BoostMethod>& methods) {
  require(probes.size() > 0 && context.size() > 0, ErrorCode::kInvalidArgument,
          "boost table needs probe and context images");
  const std::set<std::string> context_ids(context.ids.begin(), context.ids.end());
  for (const auto& id : probes.ids) {
    require(!context_ids.count(id), ErrorCode::kInvalidArgument,
            "probe image '" + id + "' is part of the context set");
  }
  BoostTable table;
  table.images = probes.ids;
  table.boosts.assign(probes.size(), std::vector<double>(methods.size(), 0.0));
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto& method = methods[m];
    require(!method.baseline.random_diversity(), ErrorCode::kInvalidArgument,
            "random diversity has no boost table");
    table.methods.push_back(method.name);
    const RowMatrix ctx = method.baseline.represent(context);
    const RowMatrix prb = method.baseline.represent(probes);
    std::vector<std::span<const double>> selected;
    for (Eigen::Index r = 0; r < ctx.rows(); ++r) {
      selected.emplace_back(ctx.data() + r * ctx.cols(), static_cast<std::size_t>(ctx.cols()));
    }
    std::size_t best = 0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const std::span<const double> row(prb.data() + static_cast<Eigen::Index>(i) * prb.cols(),
                                        static_cast<std::size_t>(prb.cols()));
      table.boosts[i][m] = marginal_diversity(row, selected, method.stats);
      if (table.boosts[i][m] > table.boosts[best][m]) best = i;
    }
    table.argmax.push_back(best);
  }
  return table;
}

void write_boost_csv(std::ostream& out, const BoostTable& table) {
  out << "image";
  for (const auto& m : table.methods) out << ',' << csv_escape(m);
  out << '\n';
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < table.images.size(); ++i) {
    out << csv_escape(table.images[i]);
    for (double b : table.boosts[i]) out << ',' << b;
    out << '\n';
  }
  out << "argmax";
  for (std::size_t idx : table.argmax) out << ',' << csv_escape(table.images[idx]);
  out << '\n';
  out.precision(old_precision);
}

std::vector<SynthQuery> generate_queries(const SynthWorld& world, const QueryConfig& config) {
  require(config.candidates >= 2 && config.count > 0, ErrorCode::kInvalidArgument,
          "queries need at least 2 candidates");
  require(config.minority_min >= 0.0 && config.minority_min <= config.minority_max && config.minority_max <= 1.0,
          ErrorCode::kInvalidArgument, "minority fraction range must lie within [0, 1]");
  const auto& cfg = world.config;
  const auto dominant = static_cast<Eigen::Index>(
      std::max_element(cfg.salience_weights.begin(), cfg.salience_weights.end()) - cfg.salience_weights.begin());
  const auto p = static_cast<Eigen::Index>(cfg.person_dims);
  std::vector<SynthQuery> out;
  char name[48];
  for (std::size_t q = 0; q < config.count; ++q) {
    std::seed_seq seq{config.seed, static_cast<std::uint64_t>(q), std::uint64_t{0x51ee}};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> fraction(config.minority_min, config.minority_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double minority_fraction = fraction(rng);

    SynthQuery query;
    std::snprintf(name, sizeof name, "q%03zu", q);
    query.name = name;
    auto& c = query.candidates;
    c.raw.resize(static_cast<Eigen::Index>(config.candidates), static_cast<Eigen::Index>(cfg.ambient_dim));
    for (std::size_t i = 0; i < config.candidates; ++i) {
      ImageLatent latent;
      latent.person.resize(p);
      for (Eigen::Index d = 0; d < p; ++d) latent.person(d) = normal(rng);
      const bool minority = unit(rng) < minority_fraction;
      latent.person(dominant) = (minority ? config.minority_center : config.majority_center) +
                                config.cluster_spread * normal(rng);
      if (minority) {
        for (std::size_t d : cfg.two_attribute_dims) latent.person(static_cast<Eigen::Index>(d)) *= config.minority_shrink;
      }
      latent.background.resize(static_cast<Eigen::Index>(cfg.background_dims));
      for (Eigen::Index d = 0; d < latent.background.size(); ++d) latent.background(d) = cfg.background_scale * normal(rng);
      const Vector x = world.render(latent.person, latent.background, rng);
      std::snprintf(name, sizeof name, "q%03zu_c%03zu", q, i);
      c.ids.emplace_back(name);
      c.raw.row(static_cast<Eigen::Index>(i)) = x.transpose();
      query.relevance.push_back(unit(rng));
      c.latents.push_back(std::move(latent));
    }
    out.push_back(std::move(query));
  }
  return out;
}

const EvalRow* EvalReport::find(std::string_view method, double alpha) const {
  for (const auto& r : rows) {
    if (r.method == method && r.alpha == alpha) return &r;
  }
  return nullptr;
}

EvalReport evaluate_methods(const SynthWorld& world, const std::vector<SynthQuery>& queries,
                            const std::vector<Baseline>& methods, const EvalConfig& config) {
  require(!queries.empty() && !methods.empty() && !config.alphas.empty(), ErrorCode::kInvalidArgument,
          "evaluation needs queries, methods and alphas");
  const Vector weights = default_annotator(world).weights;
  const ImageSet calibration = world_images(world);

  // Undiversified reference: top-k by relevance.
  std::vector<double> base_values;
  for (const auto& q : queries) {
    const RankedResult top = mmr_select(q.candidates.ids, q.relevance, RowMatrix(), CalibrationStats{},
                                        RankingConfig{0.0, config.k});
    std::vector<Vector> latents;
    for (std::size_t idx : top.indices) latents.push_back(q.candidates.latents[idx].person);
    base_values.push_back(set_diversity(latents, weights));
  }

  EvalReport report;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto& method = methods[m];
    CalibrationStats stats;
    if (!method.random_diversity()) stats = calibrate(method.represent(calibration), config.seed);
    std::vector<RowMatrix> reps;
    for (const auto& q : queries) reps.push_back(method.represent(q.candidates));
    for (std::size_t a = 0; a < config.alphas.size(); ++a) {
      const double alpha = config.alphas[a];
      std::vector<double> values;
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto& q = queries[qi];
        DiversityFn random_fn;
        std::seed_seq seq{config.seed, static_cast<std::uint64_t>(qi), static_cast<std::uint64_t>(m),
                          static_cast<std::uint64_t>(a)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, 1.0);
        if (method.random_diversity()) {
          random_fn = [&](std::size_t, std::span<const std::size_t>) { return normal(rng); };
        }
        const RankedResult picked =
            mmr_select(q.candidates.ids, q.relevance, reps[qi], stats, RankingConfig{alpha, config.k}, random_fn);
        std::vector<Vector> latents;
        for (std::size_t idx : picked.indices) latents.push_back(q.candidates.latents[idx].person);
        values.push_back(set_diversity(latents, weights));
      }
      report.rows.push_back({std::string(to_string(method.kind)), alpha,
                             net_diversity_change(values, base_values, config.epsilon)});
    }
  }
  return report;
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << "method,alpha,net_change,wins,neutral,losses,ci95\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : report.rows) {
    out << r.method << ',' << r.alpha << ',' << r.change.net_change << ',' << r.change.wins << ','
        << r.change.neutral << ',' << r.change.losses << ',' << r.change.ci95 << '\n';
  }
  out.precision(old_precision);
}

TrainedArtifacts WorldArtifacts::view() const {
  return {&pipeline, &paths, perception_only ? &*perception_only : nullptr};
}

std::vector<ConstraintSet> select_constraints(const std::vector<TripletAnnotation>& annotations,
                                              const std::vector<std::string>& ids, Case3Mode mode) {
  std::unordered_map<std::string, const TripletAnnotation*> by_id;
  for (const auto& a : annotations) by_id.emplace(a.triplet_id, &a);
  std::vector<ConstraintSet> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    require(it != by_id.end(), ErrorCode::kNotFound, "unknown triplet '" + id + "'");
    out.push_back(votes_to_constraints(*it->second, mode));
  }
  return out;
}

WorldArtifacts build_artifacts(const SynthWorld& world, const ArtifactConfig& config) {
  WorldArtifacts out;
  const PeopleProjection people = extract_person_subspace(world.phrases, world.person_phrases, config.d_p);
  const BackgroundRemoval removal =
      extract_background_subspace(world.phrases, world.location_phrases, people, config.d_b, config.background_mode);
  out.pipeline = compose_projection(people, removal);
  out.pipeline.provenance.mode = config.background_mode;

  out.annotations = simulate_annotations(world, config.annotation_count, default_annotator(world), config.seed);
  out.split = split_dataset(out.annotations, config.seed);
  out.train_set = select_constraints(out.annotations, out.split.train, config.case3_mode);
  out.val_set = select_constraints(out.annotations, out.split.validation, config.case3_mode);
  out.test_set = select_constraints(out.annotations, out.split.test, config.case3_mode);

  const AdapterVariant multiplicative =
      make_variant(AdapterKind::kMultiplicative, world.config.ambient_dim, &out.pipeline);
  out.paths = train_adapter(world.images, out.train_set, out.val_set, &out.pipeline, multiplicative, config.train);
  if (config.train_perception_only) {
    const AdapterVariant perception =
        make_variant(AdapterKind::kPerceptionOnly, world.config.ambient_dim, nullptr, config.d_p);
    out.perception_only =
        train_adapter(world.images, out.train_set, out.val_set, nullptr, perception, config.perception_train);
  }
  return out;
}

Vector effective_scales(const SynthWorld& world, const ProjectionPipeline& pipeline, const Matrix& adapter) {
  const Matrix projected = pipeline.composed * world.person_image_directions();  // d_p × person_dims
  require(adapter.rows() == projected.rows(), ErrorCode::kDimensionMismatch,
          "adapter does not match the projection output");
  return (adapter.transpose() * projected).colwise().norm().transpose();
}

}  // namespace pdiv
