#pragma once

#include <cstddef>

#include "json.hpp"

namespace sketchpart::model {

/// Network dimensions. Encoder tokens are (image_size / patch)^2.
struct ModelConfig {
  std::size_t image_size = 256;
  std::size_t patch = 16;
  std::size_t h_d = 64;            // encoder and decoder width
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t heads = 4;
  std::size_t m = 8;               // part slots
  std::size_t d_model = 32;        // latent width per slot
  std::size_t refiner_layers = 2;
  std::size_t refiner_width = 64;  // internal width of the refinement transformer
  std::size_t refiner_heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t query_dim = 96;      // learned part-query width (1.5 * h_d)

  std::size_t tokens() const { return (image_size / patch) * (image_size / patch); }
  /// Throws ConfigError on inconsistent dimensions.
  void validate() const;

  static ModelConfig desk();
  /// Dimensions of the full single-class network, kept for reference.
  static ModelConfig paper_scale();
  /// Desk network with m = 12 slots for the three-class setting.
  static ModelConfig multi_class();

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
/// Unknown keys are rejected; missing keys keep desk defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace sketchpart::model
