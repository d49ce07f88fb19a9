#include "sketchpart/nn/parameters.hpp"

#include <cmath>

#include "sketchpart/errors.hpp"

namespace sketchpart::nn {

std::size_t ParameterStore::add(std::string name, Shape shape, std::vector<double> values) {
  if (index_.contains(name)) throw ArgumentError("duplicate parameter '" + name + "'");
  if (element_count(shape) != values.size()) throw ArgumentError("parameter '" + name + "' has wrong value count");
  const auto idx = entries_.size();
  index_.emplace(name, idx);
  entries_.push_back({std::move(name), std::move(shape), std::move(values)});
  return idx;
}

std::size_t ParameterStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ArgumentError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

bool ParameterStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.values.size();
  return n;
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.shape != b.shape || a.values != b.values) return false;
  }
  return true;
}

Binding::Binding(const ParameterStore& store, bool track_gradients)
    : store_(&store), track_(track_gradients), leaves_(store.size()) {}

Tensor Binding::operator()(std::string_view name) {
  const auto idx = store_->index_of(name);
  auto& leaf = leaves_[idx];
  if (!leaf.defined()) {
    const auto& e = store_->entry(idx);
    leaf = Tensor(e.shape, e.values, track_);
  }
  return leaf;
}

Gradients Binding::gradients() const {
  Gradients out(leaves_.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    const auto n = store_->entry(i).values.size();
    auto g = leaves_[i].grad();
    if (g.empty()) {
      out[i].assign(n, 0.0);
    } else {
      out[i].assign(g.begin(), g.end());
    }
  }
  return out;
}

Gradients zero_gradients(const ParameterStore& store) {
  Gradients g(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) g[i].assign(store.entry(i).values.size(), 0.0);
  return g;
}

void accumulate(Gradients& acc, const Gradients& g, double scale) {
  if (acc.size() != g.size()) throw ArgumentError("gradient sets differ in entry count");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (acc[i].size() != g[i].size()) throw ArgumentError("gradient entry size mismatch");
    for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += scale * g[i][j];
  }
}

std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<double> normal_values(std::size_t n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace sketchpart::nn
