#include "pdiv/synth_world.hpp"

#include "pdiv/error.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace pdiv {

namespace {

Vector gaussian_vector(std::size_t n, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = sigma * normal(rng);
  return v;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = normal(rng);
  }
  return m;
}

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

SynthWorldConfig SynthWorldConfig::resolved() const {
  SynthWorldConfig c = *this;
  if (c.salience_weights.empty()) {
    c.salience_weights.assign(c.person_dims, 1.0);
    if (c.person_dims > 0) c.salience_weights[0] = 3.0;
    if (c.person_dims > 1) c.salience_weights[1] = 2.0;
  }
  if (c.embedding_gains.empty()) {
    c.embedding_gains.assign(c.person_dims, 1.0);
    if (c.person_dims > 0) c.embedding_gains[0] = 0.5;
    if (c.person_dims > 1) c.embedding_gains[1] = 0.75;
  }
  if (c.leak_dims.empty() && c.background_dims <= c.person_dims) {
    for (std::size_t k = 0; k < c.background_dims; ++k) {
      c.leak_dims.push_back(c.person_dims - c.background_dims + k);
    }
  }
  return c;
}

void SynthWorldConfig::validate() const {
  require(ambient_dim > 0 && person_dims > 0, ErrorCode::kInvalidArgument,
          "ambient_dim and person_dims must be positive");
  require(person_dims + background_dims <= ambient_dim, ErrorCode::kInvalidArgument,
          "person_dims + background_dims exceeds ambient_dim");
  require(salience_weights.size() == person_dims, ErrorCode::kInvalidArgument,
          "salience_weights length must equal person_dims");
  require(embedding_gains.size() == person_dims, ErrorCode::kInvalidArgument,
          "embedding_gains length must equal person_dims");
  for (double w : salience_weights) {
    require(w > 0.0, ErrorCode::kInvalidArgument, "salience weights must be positive");
  }
  for (std::size_t d : leak_dims) {
    require(d < person_dims, ErrorCode::kInvalidArgument, "leak dim out of range");
  }
  require(noise_sigma >= 0.0 && annotator_temperature >= 0.0 && background_scale >= 0.0,
          ErrorCode::kInvalidArgument, "noise, temperature and scales must be non-negative");
  require(image_count > 0 && noun_count > 0 && adjective_count > 0, ErrorCode::kInvalidArgument,
          "image, noun and adjective counts must be positive");
  require(two_attribute_dims[0] < person_dims && two_attribute_dims[1] < person_dims &&
              two_attribute_dims[0] != two_attribute_dims[1],
          ErrorCode::kInvalidArgument, "two_attribute_dims must be distinct person attributes");
}

Vector SynthWorld::render(const Vector& person, const Vector& background) const {
  const Vector gains = Eigen::Map<const Vector>(config.embedding_gains.data(),
                                                static_cast<Eigen::Index>(config.embedding_gains.size()));
  Vector coords = gains.cwiseProduct(person);
  if (background.size() > 0) coords += leak * background;
  Vector x = person_basis * coords;
  if (background.size() > 0) x += background_basis * background;
  return x;
}

Vector SynthWorld::render(const Vector& person, const Vector& background,
                          std::mt19937_64& rng) const {
  Vector x = render(person, background);
  if (config.noise_sigma > 0.0) x += gaussian_vector(config.ambient_dim, config.noise_sigma, rng);
  return x;
}

Matrix SynthWorld::background_image_directions() const {
  return background_basis + person_basis * leak;
}

Matrix SynthWorld::person_image_directions() const {
  Matrix m = person_basis;
  for (std::size_t j = 0; j < config.person_dims; ++j) {
    m.col(static_cast<Eigen::Index>(j)) *= config.embedding_gains[j];
  }
  return m;
}

const ImageLatent& SynthWorld::latent(std::string_view image_id) const {
  return image_latents.at(images.index_of(image_id));
}

SynthWorld generate_world(const SynthWorldConfig& input) {
  SynthWorld world;
  world.config = input.resolved();
  const SynthWorldConfig& cfg = world.config;
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  const std::size_t p = cfg.person_dims;
  const std::size_t b = cfg.background_dims;
  const Matrix draws = gaussian_matrix(cfg.ambient_dim, p + b, rng);
  const Matrix q = draws.householderQr().householderQ() *
                   Matrix::Identity(static_cast<Eigen::Index>(cfg.ambient_dim),
                                    static_cast<Eigen::Index>(p + b));
  world.person_basis = q.leftCols(static_cast<Eigen::Index>(p));
  world.background_basis = q.rightCols(static_cast<Eigen::Index>(b));

  world.leak = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(b));
  if (b > 0) {
    const Matrix leak_draws = gaussian_matrix(cfg.leak_dims.size(), b, rng);
    for (std::size_t i = 0; i < cfg.leak_dims.size(); ++i) {
      world.leak.row(static_cast<Eigen::Index>(cfg.leak_dims[i])) =
          cfg.background_leak * leak_draws.row(static_cast<Eigen::Index>(i));
    }
  }

  // Images.
  {
    RowMatrix data(static_cast<Eigen::Index>(cfg.image_count),
                   static_cast<Eigen::Index>(cfg.ambient_dim));
    std::vector<std::string> ids;
    ids.reserve(cfg.image_count);
    world.image_latents.reserve(cfg.image_count);
    for (std::size_t i = 0; i < cfg.image_count; ++i) {
      ImageLatent latent{gaussian_vector(p, 1.0, rng), gaussian_vector(b, cfg.background_scale, rng)};
      Vector x = world.render(latent.person, latent.background, rng);
      if (cfg.normalize) {
        const double norm = x.norm();
        require(norm > 0.0, ErrorCode::kDegenerate, "generated a zero image vector");
        x /= norm;
      }
      data.row(static_cast<Eigen::Index>(i)) = x.transpose();
      ids.push_back(numbered("img_", i, 5));
      world.image_latents.push_back(std::move(latent));
    }
    world.images = EmbeddingTable(cfg.ambient_dim, cfg.normalize, std::move(ids), std::move(data));
  }

  // Phrase corpus: adjectives cycle through attributes with signed magnitudes.
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  for (std::size_t a = 0; a < cfg.adjective_count; ++a) {
    const std::size_t attribute = a % p;
    const double sign = ((a / p) % 2 == 0) ? 1.0 : -1.0;
    world.adjective_attribute.push_back(attribute);
    world.adjective_value.push_back(sign * magnitude(rng));
    world.corpus.adjectives.push_back({numbered("attr_", attribute, 2), numbered("adj_", a, 3)});
  }
  world.noun_offsets = 2.0 / std::sqrt(static_cast<double>(cfg.ambient_dim)) *
                       gaussian_matrix(cfg.ambient_dim, cfg.noun_count, rng);
  for (std::size_t n = 0; n < cfg.noun_count; ++n) world.corpus.nouns.push_back(numbered("noun_", n, 3));
  world.location_offsets = gaussian_matrix(b, cfg.location_count, rng);
  for (std::size_t l = 0; l < cfg.location_count; ++l) {
    world.corpus.locations.push_back(numbered("loc_", l, 2));
  }
  world.person_phrases = person_phrase_records(world.corpus);
  world.location_phrases = b > 0 ? location_phrase_records(world.corpus) : std::vector<PhraseRecord>{};

  std::vector<EmbeddingVector> phrase_vectors;
  phrase_vectors.reserve(world.person_phrases.size() + world.location_phrases.size());
  std::unordered_map<std::string, std::size_t> noun_index;
  std::unordered_map<std::string, std::size_t> adjective_index;
  std::unordered_map<std::string, std::size_t> location_index;
  for (std::size_t n = 0; n < cfg.noun_count; ++n) noun_index[world.corpus.nouns[n]] = n;
  for (std::size_t a = 0; a < cfg.adjective_count; ++a) {
    adjective_index[world.corpus.adjectives[a].text] = a;
  }
  for (std::size_t l = 0; l < cfg.location_count; ++l) location_index[world.corpus.locations[l]] = l;

  auto phrase_vector = [&](const PhraseRecord& r) {
    const std::size_t a = adjective_index.at(r.adjective);
    Vector coords = Vector::Zero(static_cast<Eigen::Index>(p));
    const std::size_t attribute = world.adjective_attribute[a];
    coords(static_cast<Eigen::Index>(attribute)) =
        cfg.salience_weights[attribute] * world.adjective_value[a];
    Vector x = world.noun_offsets.col(static_cast<Eigen::Index>(noun_index.at(r.noun)));
    if (!r.location.empty()) {
      const Vector loc = world.location_offsets.col(static_cast<Eigen::Index>(location_index.at(r.location)));
      coords += world.leak * loc;
      x += world.background_basis * loc;
    }
    x += world.person_basis * coords;
    if (cfg.noise_sigma > 0.0) x += gaussian_vector(cfg.ambient_dim, cfg.noise_sigma, rng);
    return x;
  };
  for (const auto& r : world.person_phrases) phrase_vectors.push_back({r.embedding_id, phrase_vector(r)});
  for (const auto& r : world.location_phrases) phrase_vectors.push_back({r.embedding_id, phrase_vector(r)});
  world.phrases = EmbeddingTable::from_vectors(std::move(phrase_vectors), false);
  return world;
}

}  // namespace pdiv
