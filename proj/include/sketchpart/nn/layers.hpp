#pragma once

#include <random>
#include <string>

#include "sketchpart/nn/ops.hpp"
#include "sketchpart/nn/parameters.hpp"

namespace sketchpart::nn {

/// Projection weights for multi-head attention; every matrix is [d,d].
struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Projects queries/keys/values, attends per head, and applies the output
/// projection. Output has shape [queries.rows(), d].
Tensor multi_head_attention(const Tensor& queries, const Tensor& keys, const Tensor& values, std::size_t heads,
                            const AttentionWeights& w);

// Layer descriptors. Each knows the names of its parameters (under a
// prefix), registers initial values with declare(), and runs against a
// Binding. Weight matrices are stored [in, out].

struct Linear {
  std::string name;
  std::size_t in = 0, out = 0;

  void declare(ParameterStore& store, std::mt19937_64& rng) const;
  Tensor operator()(Binding& params, const Tensor& x) const;
};

struct LayerNorm {
  std::string name;
  std::size_t width = 0;

  void declare(ParameterStore& store) const;
  Tensor operator()(Binding& params, const Tensor& x) const;
};

struct MultiHeadAttention {
  std::string name;
  std::size_t width = 0, heads = 1;

  void declare(ParameterStore& store, std::mt19937_64& rng) const;
  Tensor operator()(Binding& params, const Tensor& queries, const Tensor& context) const;
};

/// Linear -> GELU -> Linear.
struct FeedForward {
  std::string name;
  std::size_t width = 0, hidden = 0;

  void declare(ParameterStore& store, std::mt19937_64& rng) const;
  Tensor operator()(Binding& params, const Tensor& x) const;
};

/// Learned table of `count` rows of `width`, initialized N(0, stddev^2).
struct Embedding {
  std::string name;
  std::size_t count = 0, width = 0;
  double stddev = 0.02;

  void declare(ParameterStore& store, std::mt19937_64& rng) const;
  /// The whole table, [count, width].
  Tensor table(Binding& params) const;
  Tensor operator()(Binding& params, std::span<const std::size_t> indices) const;
};

/// MLP ending in a single logit and a sigmoid: in -> hidden (ReLU) -> 1.
struct SigmoidHead {
  std::string name;
  std::size_t in = 0, hidden = 0;

  void declare(ParameterStore& store, std::mt19937_64& rng) const;
  /// Returns probabilities, shape [rows, 1].
  Tensor operator()(Binding& params, const Tensor& x) const;
};

/// Pre-norm transformer encoder block: x += MHA(LN x); x += FFN(LN x).
struct EncoderBlock {
  std::string name;
  std::size_t width = 0, heads = 1, hidden = 0;

  void declare(ParameterStore& store, std::mt19937_64& rng) const;
  Tensor operator()(Binding& params, const Tensor& x) const;

 private:
  LayerNorm ln1() const { return {name + ".ln1", width}; }
  LayerNorm ln2() const { return {name + ".ln2", width}; }
  MultiHeadAttention attn() const { return {name + ".attn", width, heads}; }
  FeedForward ffn() const { return {name + ".ffn", width, hidden}; }
};

/// Pre-norm transformer decoder block: self-attention over the queries,
/// cross-attention into `memory`, then a feed-forward layer.
struct DecoderBlock {
  std::string name;
  std::size_t width = 0, heads = 1, hidden = 0;

  void declare(ParameterStore& store, std::mt19937_64& rng) const;
  Tensor operator()(Binding& params, const Tensor& x, const Tensor& memory) const;

 private:
  LayerNorm ln1() const { return {name + ".ln1", width}; }
  LayerNorm ln2() const { return {name + ".ln2", width}; }
  LayerNorm ln3() const { return {name + ".ln3", width}; }
  MultiHeadAttention self_attn() const { return {name + ".self", width, heads}; }
  MultiHeadAttention cross_attn() const { return {name + ".cross", width, heads}; }
  FeedForward ffn() const { return {name + ".ffn", width, hidden}; }
};

}  // namespace sketchpart::nn
