#pragma once

#include "pdiv/corpus.hpp"
#include "pdiv/embedding.hpp"
#include "pdiv/linalg.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace pdiv {

/// Knobs for the synthetic universe. Empty vectors are filled with defaults by
/// `resolved()`.
struct SynthWorldConfig {
  std::size_t ambient_dim = 256;
  std::size_t person_dims = 12;
  std::size_t background_dims = 3;
  /// Perceptual weight of each person attribute; default (3, 2, 1, 1, ...).
  std::vector<double> salience_weights;
  /// How strongly each attribute is expressed in image embeddings; default
  /// (0.5, 0.75, 1, 1, ...). Lets the generic embedding disagree with
  /// perception.
  std::vector<double> embedding_gains;
  /// Person attributes whose embedding coordinates also move with the
  /// background; default the last `background_dims` attributes.
  std::vector<std::size_t> leak_dims;
  double background_leak = 1.0;
  double background_scale = 1.0;
  double noise_sigma = 0.01;
  std::size_t image_count = 2000;
  std::size_t noun_count = 10;
  std::size_t adjective_count = 50;
  std::size_t location_count = 8;
  double annotator_temperature = 0.3;
  /// Stand-ins for the gender expression and skin tone attributes.
  std::array<std::size_t, 2> two_attribute_dims = {1, 2};
  bool normalize = false;
  std::uint64_t seed = 0;

  SynthWorldConfig resolved() const;
  void validate() const;  // on a resolved config
};

struct ImageLatent {
  Vector person;
  Vector background;
};

struct SynthWorld {
  SynthWorldConfig config;
  Matrix person_basis;      // ambient × person_dims, orthonormal columns
  Matrix background_basis;  // ambient × background_dims, orthonormal, ⟂ person_basis
  Matrix leak;              // person_dims × background_dims
  Matrix noun_offsets;      // ambient × noun_count
  Matrix location_offsets;  // background_dims × location_count
  std::vector<std::size_t> adjective_attribute;
  std::vector<double> adjective_value;

  EmbeddingTable images;
  std::vector<ImageLatent> image_latents;  // aligned with images
  EmbeddingTable phrases;
  PhraseCorpus corpus;
  std::vector<PhraseRecord> person_phrases;
  std::vector<PhraseRecord> location_phrases;

  /// Noise-free embedding of a latent description.
  Vector render(const Vector& person, const Vector& background) const;
  /// Embedding with isotropic noise drawn from `rng`.
  Vector render(const Vector& person, const Vector& background, std::mt19937_64& rng) const;

  /// Ambient effect of a unit change of each background latent (columns).
  Matrix background_image_directions() const;
  /// Ambient effect of a unit change of each person latent (columns).
  Matrix person_image_directions() const;

  const ImageLatent& latent(std::string_view image_id) const;
};

SynthWorld generate_world(const SynthWorldConfig& config);

}  // namespace pdiv
