#include "sketchpart/nn/layers.hpp"

#include "sketchpart/errors.hpp"

namespace sketchpart::nn {

Tensor multi_head_attention(const Tensor& queries, const Tensor& keys, const Tensor& values, std::size_t heads,
                            const AttentionWeights& w) {
  const auto d = queries.cols();
  if (heads == 0 || d % heads != 0) {
    throw ArgumentError("multi_head_attention: width " + std::to_string(d) + " not divisible by " +
                        std::to_string(heads) + " heads");
  }
  auto q = linear(queries, w.wq, w.bq);
  auto k = linear(keys, w.wk, w.bk);
  auto v = linear(values, w.wv, w.bv);
  return linear(attention(q, k, v, heads), w.wo, w.bo);
}

void Linear::declare(ParameterStore& store, std::mt19937_64& rng) const {
  store.add(name + ".w", {in, out}, glorot_uniform(in, out, rng));
  store.add(name + ".b", {out}, std::vector<double>(out, 0.0));
}

Tensor Linear::operator()(Binding& params, const Tensor& x) const {
  return linear(x, params(name + ".w"), params(name + ".b"));
}

void LayerNorm::declare(ParameterStore& store) const {
  store.add(name + ".g", {width}, std::vector<double>(width, 1.0));
  store.add(name + ".b", {width}, std::vector<double>(width, 0.0));
}

Tensor LayerNorm::operator()(Binding& params, const Tensor& x) const {
  return layer_norm(x, params(name + ".g"), params(name + ".b"));
}

void MultiHeadAttention::declare(ParameterStore& store, std::mt19937_64& rng) const {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError(name + ": width " + std::to_string(width) + " not divisible by heads");
  }
  for (const char* p : {"q", "k", "v", "o"}) {
    store.add(name + ".w" + p, {width, width}, glorot_uniform(width, width, rng));
    store.add(name + ".b" + p, {width}, std::vector<double>(width, 0.0));
  }
}

Tensor MultiHeadAttention::operator()(Binding& params, const Tensor& queries, const Tensor& context) const {
  AttentionWeights w{params(name + ".wq"), params(name + ".bq"), params(name + ".wk"), params(name + ".bk"),
                     params(name + ".wv"), params(name + ".bv"), params(name + ".wo"), params(name + ".bo")};
  return multi_head_attention(queries, context, context, heads, w);
}

void FeedForward::declare(ParameterStore& store, std::mt19937_64& rng) const {
  Linear{name + ".fc1", width, hidden}.declare(store, rng);
  Linear{name + ".fc2", hidden, width}.declare(store, rng);
}

Tensor FeedForward::operator()(Binding& params, const Tensor& x) const {
  auto h = gelu(Linear{name + ".fc1", width, hidden}(params, x));
  return Linear{name + ".fc2", hidden, width}(params, h);
}

void Embedding::declare(ParameterStore& store, std::mt19937_64& rng) const {
  store.add(name, {count, width}, normal_values(count * width, stddev, rng));
}

Tensor Embedding::table(Binding& params) const { return params(name); }

Tensor Embedding::operator()(Binding& params, std::span<const std::size_t> indices) const {
  return embedding(params(name), indices);
}

void SigmoidHead::declare(ParameterStore& store, std::mt19937_64& rng) const {
  Linear{name + ".fc1", in, hidden}.declare(store, rng);
  Linear{name + ".fc2", hidden, 1}.declare(store, rng);
}

Tensor SigmoidHead::operator()(Binding& params, const Tensor& x) const {
  auto h = relu(Linear{name + ".fc1", in, hidden}(params, x));
  return sigmoid(Linear{name + ".fc2", hidden, 1}(params, h));
}

void EncoderBlock::declare(ParameterStore& store, std::mt19937_64& rng) const {
  ln1().declare(store);
  attn().declare(store, rng);
  ln2().declare(store);
  ffn().declare(store, rng);
}

Tensor EncoderBlock::operator()(Binding& params, const Tensor& x) const {
  auto h = ln1()(params, x);
  auto y = add(x, attn()(params, h, h));
  return add(y, ffn()(params, ln2()(params, y)));
}

void DecoderBlock::declare(ParameterStore& store, std::mt19937_64& rng) const {
  ln1().declare(store);
  self_attn().declare(store, rng);
  ln2().declare(store);
  cross_attn().declare(store, rng);
  ln3().declare(store);
  ffn().declare(store, rng);
}

Tensor DecoderBlock::operator()(Binding& params, const Tensor& x, const Tensor& memory) const {
  auto h = ln1()(params, x);
  auto y = add(x, self_attn()(params, h, h));
  y = add(y, cross_attn()(params, ln2()(params, y), memory));
  return add(y, ffn()(params, ln3()(params, y)));
}

}  // namespace sketchpart::nn
