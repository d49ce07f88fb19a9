#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sketchpart/nn/tensor.hpp"

namespace sketchpart::nn {

/// Named, ordered collection of trainable values. The store owns the
/// authoritative weights; forward passes read them through a Binding.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> values;
  };

  std::size_t add(std::string name, Shape shape, std::vector<double> values);
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Entry& entry(std::size_t i) { return entries_.at(i); }
  const Entry& entry(std::string_view name) const { return entries_.at(index_of(name)); }
  Entry& entry(std::string_view name) { return entries_.at(index_of(name)); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;

  bool operator==(const ParameterStore& other) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-entry gradients aligned with a ParameterStore.
using Gradients = std::vector<std::vector<double>>;

/// One forward pass's view of a ParameterStore. Each parameter becomes a
/// leaf tensor (created on first use) so independent passes never share
/// gradient buffers.
class Binding {
 public:
  Binding(const ParameterStore& store, bool track_gradients);

  Tensor operator()(std::string_view name);

  /// Gradients of the leaves touched so far; untouched entries are zero.
  Gradients gradients() const;

 private:
  const ParameterStore* store_;
  bool track_;
  std::vector<Tensor> leaves_;
};

Gradients zero_gradients(const ParameterStore& store);
/// acc += scale * g, entry by entry.
void accumulate(Gradients& acc, const Gradients& g, double scale = 1.0);

/// Weight initializers. All draws come from the caller's engine.
std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
std::vector<double> normal_values(std::size_t n, double stddev, std::mt19937_64& rng);

}  // namespace sketchpart::nn
