#include "sketchpart/model/losses.hpp"

#include "sketchpart/errors.hpp"
#include "sketchpart/nn/ops.hpp"

namespace sketchpart::model {
namespace {

void check_latents(const nn::Tensor& a, const nn::Tensor& b, const char* what) {
  if (a.shape() != b.shape() || a.rank() != 2) {
    throw ArgumentError(std::string(what) + ": latent shapes differ " + nn::shape_string(a.shape()) + " vs " +
                        nn::shape_string(b.shape()));
  }
}

// Row-weighted L1: sum_i w_i |a_i - b_i|_1.
nn::Tensor weighted_row_l1(const nn::Tensor& a, const nn::Tensor& b, std::span<const double> weights) {
  const auto m = a.rows(), d = a.cols();
  std::vector<double> w(m * d);
  for (std::size_t i = 0; i < m; ++i) std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(i * d), d, weights[i]);
  return nn::sum(nn::mul(nn::abs(nn::sub(a, b)), nn::Tensor(a.shape(), std::move(w))));
}

}  // namespace

nn::Tensor loss_full(const nn::Tensor& z_pred, const nn::Tensor& z) {
  check_latents(z_pred, z, "loss_full");
  return nn::affine(nn::sum(nn::abs(nn::sub(z_pred, z))), 1.0 / static_cast<double>(z_pred.rows()));
}

nn::Tensor loss_cls(const nn::Tensor& c_pred, std::span<const double> c) {
  if (c_pred.size() != c.size() || c.empty()) throw ArgumentError("loss_cls: presence length mismatch");
  const auto m = c.size();
  auto p = nn::clamp(c_pred, kPresenceClamp, 1.0 - kPresenceClamp);
  std::vector<double> pos(c.begin(), c.end()), neg(m);
  for (std::size_t i = 0; i < m; ++i) neg[i] = 1.0 - c[i];
  auto log_p = nn::log(p);
  auto log_q = nn::log(nn::affine(p, -1.0, 1.0));
  auto total = nn::add(nn::sum(nn::mul(log_p, nn::Tensor(p.shape(), std::move(pos)))),
                       nn::sum(nn::mul(log_q, nn::Tensor(p.shape(), std::move(neg)))));
  return nn::affine(total, -1.0 / static_cast<double>(m));
}

nn::Tensor loss_part(const nn::Tensor& z_pred, const nn::Tensor& z, std::span<const double> c) {
  check_latents(z_pred, z, "loss_part");
  if (c.size() != z_pred.rows()) throw ArgumentError("loss_part: presence length differs from m");
  std::size_t present = 0;
  for (double v : c) present += v != 0.0;
  if (present == 0) return nn::affine(nn::sum(z_pred), 0.0);
  return nn::affine(weighted_row_l1(z_pred, z, c), 1.0 / static_cast<double>(present));
}

nn::Tensor loss_refine(const nn::Tensor& z_hat, const nn::Tensor& z, const RefineMask& mask) {
  check_latents(z_hat, z, "loss_refine");
  if (mask.bits.size() != z_hat.rows()) throw ArgumentError("loss_refine: mask length differs from m");
  const auto k = mask.popcount();
  if (k == 0) throw ArgumentError("loss_refine: empty mask");
  std::vector<double> w(mask.bits.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = mask.bits[i] ? 1.0 : 0.0;
  return nn::affine(weighted_row_l1(z_hat, z, w), 1.0 / static_cast<double>(k));
}

}  // namespace sketchpart::model
