#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sketchpart/model/config.hpp"
#include "sketchpart/nn/layers.hpp"
#include "sketchpart/render/image.hpp"
#include "sketchpart/shape/primitive.hpp"

namespace sketchpart::model {

/// Differentiable network outputs: z [m, d_model] and presence c [m, 1].
struct PredictionTensors {
  nn::Tensor z;
  nn::Tensor c;
};

/// Sketch -> per-part latent code.
///
/// A ViT encoder turns the 16x16 patches of the sketch into visual
/// embeddings; a transformer decoder lets m learned part queries attend to
/// them, and two per-query heads produce the latent row and the presence
/// score of each slot.
class SketchToParts {
 public:
  SketchToParts(ModelConfig config, std::uint64_t seed);
  /// Adopts trained weights; throws ConfigError if names or shapes do not
  /// match the configuration.
  SketchToParts(ModelConfig config, nn::ParameterStore parameters);

  const ModelConfig& config() const { return config_; }
  const nn::ParameterStore& parameters() const { return params_; }
  nn::ParameterStore& parameters() { return params_; }

  /// Row t holds patch t (raster order), pixels inverted so ink is 1.
  nn::Tensor patchify(const render::Image& sketch) const;

  /// Visual embeddings, [tokens, h_d].
  nn::Tensor encode(nn::Binding& params, const render::Image& sketch) const;
  /// Latents and presence from visual embeddings.
  PredictionTensors decode(nn::Binding& params, const nn::Tensor& embeddings) const;
  PredictionTensors forward(nn::Binding& params, const render::Image& sketch) const;

  /// Inference on the current weights; c holds presence scores in (0,1).
  shape::PartSet predict(const render::Image& sketch) const;

 private:
  void declare(std::uint64_t seed);

  ModelConfig config_;
  nn::ParameterStore params_;
};

/// m flags; true marks a slot to regenerate.
struct RefineMask {
  std::vector<bool> bits;

  std::size_t popcount() const;
  bool operator==(const RefineMask&) const = default;
};

/// Draws u ~ U[range_lo, range_hi] and masks k = max(1, round(u * m))
/// distinct slots. Deterministic in seed. Requires m >= 3.
RefineMask sample_mask(std::uint64_t seed, std::size_t m, double range_lo = 0.05, double range_hi = 0.40);

/// Bidirectional transformer over the m latent rows that predicts the
/// content of masked (zeroed) rows from the others.
class Refiner {
 public:
  Refiner(ModelConfig config, std::uint64_t seed);
  Refiner(ModelConfig config, nn::ParameterStore parameters);

  const ModelConfig& config() const { return config_; }
  const nn::ParameterStore& parameters() const { return params_; }
  nn::ParameterStore& parameters() { return params_; }

  /// z_input is [m, d_model] with masked rows exactly zero (ArgumentError
  /// otherwise). Returns a full [m, d_model] prediction.
  nn::Tensor forward(nn::Binding& params, const nn::Tensor& z_input, const RefineMask& mask) const;

  /// Value form: returns the full refined m x d_model matrix.
  std::vector<double> refine(std::span<const double> z_input, const RefineMask& mask) const;

 private:
  void declare(std::uint64_t seed);

  ModelConfig config_;
  nn::ParameterStore params_;
};

/// completed[i] <=> presence[i] < threshold (strict).
std::vector<bool> flag_completed(std::span<const double> presence, double threshold = 0.01);

/// Fraction of slots where (presence >= 0.5) agrees with the binary target.
double presence_accuracy(std::span<const double> presence, std::span<const double> target);

}  // namespace sketchpart::model
