#include "sketchpart/model/config.hpp"

#include <string>

#include "sketchpart/errors.hpp"
#include "sketchpart/shape/primitive.hpp"

namespace sketchpart::model {

void ModelConfig::validate() const {
  if (patch == 0 || image_size % patch != 0) throw ConfigError("image_size must be a multiple of patch");
  if (heads == 0 || h_d % heads != 0) throw ConfigError("h_d must be divisible by heads");
  if (refiner_heads == 0 || refiner_width % refiner_heads != 0) {
    throw ConfigError("refiner_width must be divisible by refiner_heads");
  }
  if (d_model < shape::kLatentSemanticWidth) throw ConfigError("d_model must be at least 16");
  if (m < 3) throw ConfigError("m must be at least 3");
  if (enc_layers == 0 || dec_layers == 0 || refiner_layers == 0) throw ConfigError("layer counts must be positive");
  if (query_dim == 0 || ffn_mult == 0) throw ConfigError("query_dim and ffn_mult must be positive");
}

ModelConfig ModelConfig::desk() { return {}; }

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.h_d = 512;
  c.enc_layers = 8;
  c.dec_layers = 12;
  c.heads = 8;
  c.m = 16;
  c.d_model = 512;
  c.query_dim = 768;
  c.refiner_width = 512;
  c.refiner_heads = 8;
  c.refiner_layers = 6;
  return c;
}

ModelConfig ModelConfig::multi_class() {
  ModelConfig c;
  c.m = 12;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"image_size", c.image_size},         {"patch", c.patch},
          {"h_d", c.h_d},                       {"enc_layers", c.enc_layers},
          {"dec_layers", c.dec_layers},         {"heads", c.heads},
          {"m", c.m},                           {"d_model", c.d_model},
          {"refiner_layers", c.refiner_layers}, {"refiner_width", c.refiner_width},
          {"refiner_heads", c.refiner_heads},   {"ffn_mult", c.ffn_mult},
          {"query_dim", c.query_dim}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    std::size_t* field = nullptr;
    if (key == "image_size") field = &c.image_size;
    else if (key == "patch") field = &c.patch;
    else if (key == "h_d") field = &c.h_d;
    else if (key == "enc_layers") field = &c.enc_layers;
    else if (key == "dec_layers") field = &c.dec_layers;
    else if (key == "heads") field = &c.heads;
    else if (key == "m") field = &c.m;
    else if (key == "d_model") field = &c.d_model;
    else if (key == "refiner_layers") field = &c.refiner_layers;
    else if (key == "refiner_width") field = &c.refiner_width;
    else if (key == "refiner_heads") field = &c.refiner_heads;
    else if (key == "ffn_mult") field = &c.ffn_mult;
    else if (key == "query_dim") field = &c.query_dim;
    else throw ConfigError("unknown model config key '" + key + "'");
    if (!value.is_number_unsigned()) throw ConfigError("model config '" + key + "' must be a non-negative integer");
    *field = value.get<std::size_t>();
  }
  c.validate();
  return c;
}

}  // namespace sketchpart::model
