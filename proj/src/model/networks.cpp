#include "sketchpart/model/networks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sketchpart/errors.hpp"

namespace sketchpart::model {
namespace {

using nn::Binding;
using nn::Tensor;

constexpr double kHeadInitScale = 0.01;

void check_layout(const nn::ParameterStore& expected, const nn::ParameterStore& actual, const char* what) {
  if (expected.size() != actual.size()) {
    throw ConfigError(std::string(what) + ": checkpoint has " + std::to_string(actual.size()) +
                      " tensors, configuration expects " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = expected.entry(i);
    if (!actual.contains(e.name)) throw ConfigError(std::string(what) + ": missing parameter " + e.name);
    if (actual.entry(e.name).shape != e.shape) {
      throw ConfigError(std::string(what) + ": parameter " + e.name + " has shape " +
                        nn::shape_string(actual.entry(e.name).shape) + ", expected " + nn::shape_string(e.shape));
    }
  }
}

// Parameter layout of the sketch network, shared by declare() and forward.
struct SketchLayout {
  const ModelConfig& c;

  nn::Linear patch_embed() const { return {"enc.patch", c.patch * c.patch, c.h_d}; }
  nn::Embedding positions() const { return {"enc.pos", c.tokens(), c.h_d}; }
  nn::EncoderBlock encoder(std::size_t i) const {
    return {"enc.block" + std::to_string(i), c.h_d, c.heads, c.ffn_mult * c.h_d};
  }
  nn::LayerNorm encoder_norm() const { return {"enc.ln", c.h_d}; }
  nn::Embedding queries() const { return {"dec.queries", c.m, c.query_dim}; }
  nn::Linear query_proj() const { return {"dec.query_proj", c.query_dim, c.h_d}; }
  nn::DecoderBlock decoder(std::size_t i) const {
    return {"dec.block" + std::to_string(i), c.h_d, c.heads, c.ffn_mult * c.h_d};
  }
  nn::LayerNorm decoder_norm() const { return {"dec.ln", c.h_d}; }
  nn::Linear latent_fc1() const { return {"head.latent.fc1", c.h_d, c.h_d}; }
  nn::Linear latent_fc2() const { return {"head.latent.fc2", c.h_d, c.d_model}; }
  nn::SigmoidHead presence() const { return {"head.presence", c.h_d, std::max<std::size_t>(1, c.d_model / 2)}; }
};

struct RefinerLayout {
  const ModelConfig& c;

  nn::Linear input() const { return {"ref.in", c.d_model, c.refiner_width}; }
  nn::Embedding positions() const { return {"ref.pos", c.m, c.refiner_width}; }
  // Row 0 is added to kept slots, row 1 to masked ones.
  nn::Embedding mask_state() const { return {"ref.mask", 2, c.refiner_width}; }
  nn::EncoderBlock block(std::size_t i) const {
    return {"ref.block" + std::to_string(i), c.refiner_width, c.refiner_heads, c.ffn_mult * c.refiner_width};
  }
  nn::LayerNorm norm() const { return {"ref.ln", c.refiner_width}; }
  nn::Linear output() const { return {"ref.out", c.refiner_width, c.d_model}; }
};

}  // namespace

SketchToParts::SketchToParts(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  declare(seed);
}

SketchToParts::SketchToParts(ModelConfig config, nn::ParameterStore parameters) : config_(config) {
  config_.validate();
  declare(0);
  check_layout(params_, parameters, "sketch network");
  params_ = std::move(parameters);
}

void SketchToParts::declare(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SketchLayout L{config_};
  L.patch_embed().declare(params_, rng);
  L.positions().declare(params_, rng);
  for (std::size_t i = 0; i < config_.enc_layers; ++i) L.encoder(i).declare(params_, rng);
  L.encoder_norm().declare(params_);
  L.queries().declare(params_, rng);
  L.query_proj().declare(params_, rng);
  for (std::size_t i = 0; i < config_.dec_layers; ++i) L.decoder(i).declare(params_, rng);
  L.decoder_norm().declare(params_);
  L.latent_fc1().declare(params_, rng);
  L.latent_fc2().declare(params_, rng);
  // The latent head starts close to zero.
  for (auto& w : params_.entry(L.latent_fc2().name + ".w").values) w *= kHeadInitScale;
  L.presence().declare(params_, rng);
}

Tensor SketchToParts::patchify(const render::Image& sketch) const {
  const auto n = config_.image_size, p = config_.patch;
  if (sketch.width != n || sketch.height != n) {
    throw ArgumentError("sketch must be " + std::to_string(n) + "x" + std::to_string(n) + ", got " +
                        std::to_string(sketch.width) + "x" + std::to_string(sketch.height));
  }
  const auto per_row = n / p;
  std::vector<double> data(config_.tokens() * p * p);
  for (std::size_t py = 0; py < per_row; ++py) {
    for (std::size_t px = 0; px < per_row; ++px) {
      double* dst = data.data() + (py * per_row + px) * p * p;
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x) dst[y * p + x] = 1.0 - sketch.at(px * p + x, py * p + y);
    }
  }
  return Tensor({config_.tokens(), p * p}, std::move(data));
}

Tensor SketchToParts::encode(Binding& params, const render::Image& sketch) const {
  SketchLayout L{config_};
  auto x = nn::add(L.patch_embed()(params, patchify(sketch)), L.positions().table(params));
  for (std::size_t i = 0; i < config_.enc_layers; ++i) x = L.encoder(i)(params, x);
  return L.encoder_norm()(params, x);
}

PredictionTensors SketchToParts::decode(Binding& params, const Tensor& embeddings) const {
  SketchLayout L{config_};
  if (embeddings.rank() != 2 || embeddings.cols() != config_.h_d) {
    throw ArgumentError("decode: embeddings must be [tokens, h_d], got " + nn::shape_string(embeddings.shape()));
  }
  auto q = L.query_proj()(params, L.queries().table(params));
  for (std::size_t i = 0; i < config_.dec_layers; ++i) q = L.decoder(i)(params, q, embeddings);
  q = L.decoder_norm()(params, q);
  auto z = L.latent_fc2()(params, nn::relu(L.latent_fc1()(params, q)));
  auto c = L.presence()(params, q);
  return {z, c};
}

PredictionTensors SketchToParts::forward(Binding& params, const render::Image& sketch) const {
  return decode(params, encode(params, sketch));
}

shape::PartSet SketchToParts::predict(const render::Image& sketch) const {
  Binding params(params_, false);
  auto out = forward(params, sketch);
  shape::PartSet set(config_.m, config_.d_model);
  std::copy(out.z.data().begin(), out.z.data().end(), set.z.begin());
  std::copy(out.c.data().begin(), out.c.data().end(), set.c.begin());
  return set;
}

std::size_t RefineMask::popcount() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true)); }

RefineMask sample_mask(std::uint64_t seed, std::size_t m, double range_lo, double range_hi) {
  if (m < 3) throw ArgumentError("sample_mask: m must be >= 3");
  if (!(0.0 < range_lo && range_lo < range_hi && range_hi < 1.0)) throw ConfigError("sample_mask: bad mask range");
  std::mt19937_64 rng(seed);
  const double u = std::uniform_real_distribution<double>(range_lo, range_hi)(rng);
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(u * static_cast<double>(m))));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  RefineMask mask{std::vector<bool>(m, false)};
  for (std::size_t i = 0; i < k; ++i) mask.bits[order[i]] = true;
  return mask;
}

Refiner::Refiner(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  declare(seed);
}

Refiner::Refiner(ModelConfig config, nn::ParameterStore parameters) : config_(config) {
  config_.validate();
  declare(0);
  check_layout(params_, parameters, "refiner");
  params_ = std::move(parameters);
}

void Refiner::declare(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RefinerLayout L{config_};
  L.input().declare(params_, rng);
  L.positions().declare(params_, rng);
  L.mask_state().declare(params_, rng);
  for (std::size_t i = 0; i < config_.refiner_layers; ++i) L.block(i).declare(params_, rng);
  L.norm().declare(params_);
  L.output().declare(params_, rng);
}

Tensor Refiner::forward(Binding& params, const Tensor& z_input, const RefineMask& mask) const {
  const auto m = config_.m, d = config_.d_model;
  if (z_input.rank() != 2 || z_input.rows() != m || z_input.cols() != d) {
    throw ArgumentError("refine: input must be [" + std::to_string(m) + "," + std::to_string(d) + "], got " +
                        nn::shape_string(z_input.shape()));
  }
  if (mask.bits.size() != m) throw ArgumentError("refine: mask length differs from m");
  auto values = z_input.data();
  for (std::size_t i = 0; i < m; ++i) {
    if (!mask.bits[i]) continue;
    for (std::size_t j = 0; j < d; ++j) {
      if (values[i * d + j] != 0.0) throw ArgumentError("refine: masked row " + std::to_string(i) + " is not zero");
    }
  }
  RefinerLayout L{config_};
  std::vector<std::size_t> state(m);
  for (std::size_t i = 0; i < m; ++i) state[i] = mask.bits[i] ? 1 : 0;
  auto x = nn::add(nn::add(L.input()(params, z_input), L.positions().table(params)), L.mask_state()(params, state));
  for (std::size_t i = 0; i < config_.refiner_layers; ++i) x = L.block(i)(params, x);
  return L.output()(params, L.norm()(params, x));
}

std::vector<double> Refiner::refine(std::span<const double> z_input, const RefineMask& mask) const {
  Binding params(params_, false);
  Tensor input({config_.m, config_.d_model}, std::vector<double>(z_input.begin(), z_input.end()));
  auto out = forward(params, input, mask);
  return {out.data().begin(), out.data().end()};
}

std::vector<bool> flag_completed(std::span<const double> presence, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("flag_completed: threshold must be in (0,1)");
  std::vector<bool> out(presence.size());
  for (std::size_t i = 0; i < presence.size(); ++i) out[i] = presence[i] < threshold;
  return out;
}

double presence_accuracy(std::span<const double> presence, std::span<const double> target) {
  if (presence.size() != target.size() || presence.empty()) throw ArgumentError("presence_accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < presence.size(); ++i) hits += (presence[i] >= 0.5) == (target[i] >= 0.5);
  return static_cast<double>(hits) / static_cast<double>(presence.size());
}

}  // namespace sketchpart::model
