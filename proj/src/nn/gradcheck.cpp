#include "sketchpart/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sketchpart/errors.hpp"

namespace sketchpart::nn {
namespace {

double finite_or_throw(double v) {
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps,
                  std::span<const std::size_t> coords) {
  Tensor leaf(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  auto y = f(leaf);
  finite_or_throw(y.item());
  y.backward();
  std::vector<double> analytic(leaf.size(), 0.0);
  if (!leaf.grad().empty()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(leaf.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    coords = all;
  }
  double worst = 0.0;
  std::vector<double> probe(x.data().begin(), x.data().end());
  for (auto i : coords) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = finite_or_throw(f(Tensor(x.shape(), probe)).item());
    probe[i] = orig - eps;
    const double down = finite_or_throw(f(Tensor(x.shape(), probe)).item());
    probe[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

double grad_check_parameters(const std::function<Tensor(Binding&)>& loss, ParameterStore& store, double eps,
                             std::size_t coords_per_entry, std::uint64_t seed) {
  Binding binding(store, true);
  auto y = loss(binding);
  finite_or_throw(y.item());
  y.backward();
  const auto analytic = binding.gradients();

  auto evaluate = [&] {
    Binding b(store, false);
    return finite_or_throw(loss(b).item());
  };

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t e = 0; e < store.size(); ++e) {
    auto& values = store.entry(e).values;
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (coords_per_entry > 0 && coords_per_entry < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(coords_per_entry);
    }
    for (auto i : idx) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = evaluate();
      values[i] = orig - eps;
      const double down = evaluate();
      values[i] = orig;
      worst = std::max(worst, relative_error(analytic[e][i], (up - down) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace sketchpart::nn
