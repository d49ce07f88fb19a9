#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "sketchpart/nn/parameters.hpp"
#include "sketchpart/nn/tensor.hpp"

namespace sketchpart::nn {

/// Compares the reverse-mode gradient of scalar f at x with central
/// differences. Returns max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
/// `coords` restricts the check to some coordinates (all when empty).
/// Throws NumericError if f is not finite near x.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps,
                  std::span<const std::size_t> coords = {});

/// Same check over the entries of a parameter store. `loss` builds the
/// scalar from a Binding. At most `coords_per_entry` randomly chosen
/// coordinates of each entry are probed (0 = all).
double grad_check_parameters(const std::function<Tensor(Binding&)>& loss, ParameterStore& store, double eps,
                             std::size_t coords_per_entry, std::uint64_t seed);

}  // namespace sketchpart::nn
