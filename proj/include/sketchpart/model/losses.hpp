#pragma once

#include <span>

#include "sketchpart/model/networks.hpp"
#include "sketchpart/nn/tensor.hpp"

namespace sketchpart::model {

inline constexpr double kPresenceClamp = 1e-7;

/// (1/m) sum_i |z_pred_i - z_i|_1 over [m, d] latents.
nn::Tensor loss_full(const nn::Tensor& z_pred, const nn::Tensor& z);

/// Mean binary cross-entropy of presence scores against binary targets,
/// with scores clamped to [1e-7, 1 - 1e-7].
nn::Tensor loss_cls(const nn::Tensor& c_pred, std::span<const double> c);

/// (1/|c|_0) sum_i c_i |z_pred_i - z_i|_1; zero when no part is present.
nn::Tensor loss_part(const nn::Tensor& z_pred, const nn::Tensor& z, std::span<const double> c);

/// (1/|mask|) sum over masked rows of |z_hat_i - z_i|_1. ArgumentError on an
/// empty mask.
nn::Tensor loss_refine(const nn::Tensor& z_hat, const nn::Tensor& z, const RefineMask& mask);

}  // namespace sketchpart::model
