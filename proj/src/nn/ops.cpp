#include "sketchpart/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "sketchpart/errors.hpp"

namespace sketchpart::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using ConstBlock = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using MutBlock = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

ConstMap as_matrix(const Buffer& v, std::size_t rows, std::size_t cols) {
  return ConstMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(Buffer& v, std::size_t rows, std::size_t cols) {
  return MutMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

detail::Node& parent(detail::Node& self, std::size_t i) { return *self.parents[i]; }

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ArgumentError(std::string(what) + ": expected rank-2 tensor, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ArgumentError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
  }
}

// Elementwise unary op: value and derivative as functions of (input, output).
template <class Fn, class Deriv>
Tensor unary(const Tensor& x, Fn fn, Deriv deriv) {
  auto in = x.data();
  Buffer out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](detail::Node& self) {
    auto& p = parent(self, 0);
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) throw ArgumentError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  Buffer out(n * m);
  as_matrix(out, n, m).noalias() = as_matrix(a.node()->data, n, k) * as_matrix(b.node()->data, k, m);
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    auto dy = as_matrix(std::as_const(self.grad), n, m);
    if (pa.requires_grad) as_matrix(pa.ensure_grad(), n, k).noalias() += dy * as_matrix(std::as_const(pb.data), k, m).transpose();
    if (pb.requires_grad) as_matrix(pb.ensure_grad(), k, m).noalias() += as_matrix(std::as_const(pa.data), n, k).transpose() * dy;
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "linear");
  require_matrix(weight, "linear");
  const auto n = x.rows(), k = x.cols(), m = weight.cols();
  if (weight.rows() != k) {
    throw ArgumentError("linear: input width " + std::to_string(k) + " vs weight " + shape_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.size() != m) throw ArgumentError("linear: bias length mismatch");
  Buffer out(n * m);
  auto y = as_matrix(out, n, m);
  y.noalias() = as_matrix(x.node()->data, n, k) * as_matrix(weight.node()->data, k, m);
  if (has_bias) {
    Eigen::Map<const Eigen::RowVectorXd> b(bias.data().data(), static_cast<Eigen::Index>(m));
    y.rowwise() += b;
  }
  std::vector<Tensor> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return make_result({n, m}, std::move(out), std::move(parents), [n, k, m, has_bias](detail::Node& self) {
    auto& px = parent(self, 0);
    auto& pw = parent(self, 1);
    auto dy = as_matrix(std::as_const(self.grad), n, m);
    if (px.requires_grad) as_matrix(px.ensure_grad(), n, k).noalias() += dy * as_matrix(std::as_const(pw.data), k, m).transpose();
    if (pw.requires_grad) as_matrix(pw.ensure_grad(), k, m).noalias() += as_matrix(std::as_const(px.data), n, k).transpose() * dy;
    if (has_bias) {
      auto& pb = parent(self, 2);
      if (pb.requires_grad) {
        Eigen::Map<Eigen::RowVectorXd> db(pb.ensure_grad().data(), static_cast<Eigen::Index>(m));
        db += dy.colwise().sum();
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data(), y = b.data();
  Buffer out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t j = 0; j < 2; ++j) {
      auto& p = parent(self, j);
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data(), y = b.data();
  Buffer out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t j = 0; j < 2; ++j) {
      auto& p = parent(self, j);
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      const double sign = j == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data(), y = b.data();
  Buffer out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  return unary(x, [=](double v) { return scale * v + shift; }, [=](double, double) { return scale; });
}

Tensor abs(const Tensor& x) {
  return unary(x, [](double v) { return std::abs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(x, [=](double v) { return std::clamp(v, lo, hi); },
               [=](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& x) {
  // Tanh form: 0.5 x (1 + tanh(k (x + a x^3))), with tanh(u) = 1 - 2 / (e^{2u} + 1)
  // evaluated through a vectorized exp. The tanh values are kept for backward.
  constexpr double a = 0.044715;
  const double k = std::sqrt(2.0 / std::numbers::pi);
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::Map<const Eigen::ArrayXd> in(x.data().data(), n);
  auto t = std::make_shared<Eigen::ArrayXd>(n);
  *t = 1.0 - 2.0 / ((2.0 * k * (in + a * in.cube())).exp() + 1.0);
  Buffer out(x.size());
  Eigen::Map<Eigen::ArrayXd>(out.data(), n) = 0.5 * in * (1.0 + *t);
  return make_result(x.shape(), std::move(out), {x}, [t, k, n](detail::Node& self) {
    auto& p = parent(self, 0);
    Eigen::Map<const Eigen::ArrayXd> xv(p.data.data(), n);
    Eigen::Map<const Eigen::ArrayXd> dy(self.grad.data(), n);
    Eigen::Map<Eigen::ArrayXd> g(p.ensure_grad().data(), n);
    g += dy * (0.5 * (1.0 + *t) + 0.5 * xv * (1.0 - t->square()) * k * (1.0 + 3.0 * a * xv.square()));
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({}, {total}, {x}, [](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) {
    throw ArgumentError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_string(shape));
  }
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  const std::size_t outer = x.size() / (len * inner);
  auto in = x.data();
  Buffer out(in.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, in[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        out[base + j * inner] = std::exp(in[base + j * inner] - mx);
        total += out[base + j * inner];
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  return make_result(shape, std::move(out), {x}, [outer, inner, len](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) dot += self.grad[base + j * inner] * self.data[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const auto idx = base + j * inner;
          g[idx] += self.data[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "layer_norm");
  const auto n = x.rows(), d = x.cols();
  if (gamma.size() != d || beta.size() != d) throw ArgumentError("layer_norm: gamma/beta length mismatch");
  auto in = x.data();
  auto gm = gamma.data(), bt = beta.data();
  Buffer out(n * d);
  // Normalized activations and inverse std are kept for the backward pass.
  auto xhat = std::make_shared<Buffer>(n * d);
  auto inv_std = std::make_shared<Buffer>(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += in[r * d + c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double t = in[r * d + c] - mean;
      var += t * t;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (in[r * d + c] - mean) * is;
      (*xhat)[r * d + c] = h;
      out[r * d + c] = h * gm[c] + bt[c];
    }
  }
  return make_result({n, d}, std::move(out), {x, gamma, beta}, [n, d, xhat, inv_std](detail::Node& self) {
    auto& px = parent(self, 0);
    auto& pg = parent(self, 1);
    auto& pb = parent(self, 2);
    if (pg.requires_grad || pb.requires_grad) {
      auto& gg = pg.ensure_grad();
      auto& gb = pb.ensure_grad();
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
          gg[c] += self.grad[r * d + c] * (*xhat)[r * d + c];
          gb[c] += self.grad[r * d + c];
        }
      }
    }
    if (!px.requires_grad) return;
    auto& gx = px.ensure_grad();
    const double inv_d = 1.0 / static_cast<double>(d);
    for (std::size_t r = 0; r < n; ++r) {
      double sum_dh = 0.0, sum_dh_h = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dh = self.grad[r * d + c] * pg.data[c];
        sum_dh += dh;
        sum_dh_h += dh * (*xhat)[r * d + c];
      }
      for (std::size_t c = 0; c < d; ++c) {
        const double dh = self.grad[r * d + c] * pg.data[c];
        gx[r * d + c] += (*inv_std)[r] * (dh - inv_d * sum_dh - (*xhat)[r * d + c] * inv_d * sum_dh_h);
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> indices) {
  require_matrix(table, "embedding");
  const auto rows = table.rows(), d = table.cols();
  auto src = table.data();
  Buffer out(indices.size() * d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) throw ArgumentError("embedding: index " + std::to_string(indices[i]) + " out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(indices[i] * d), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({idx.size(), d}, std::move(out), {table}, [idx, d](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < d; ++c) g[idx[i] * d + c] += self.grad[i * d + c];
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  require_matrix(v, "attention");
  const auto nq = q.rows(), nk = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != nk) throw ArgumentError("attention: q/k/v shapes disagree");
  if (heads == 0 || d % heads != 0) {
    throw ArgumentError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
  const auto dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto eq = static_cast<Eigen::Index>(nq), ek = static_cast<Eigen::Index>(nk), edh = static_cast<Eigen::Index>(dh);
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));

  Buffer out(nq * d);
  // Attention probabilities per head, [heads][nq x nk].
  auto probs = std::make_shared<Buffer>(heads * nq * nk);
  for (std::size_t h = 0; h < heads; ++h) {
    ConstBlock qh(q.data().data() + h * dh, eq, edh, stride);
    ConstBlock kh(k.data().data() + h * dh, ek, edh, stride);
    ConstBlock vh(v.data().data() + h * dh, ek, edh, stride);
    MutMap p(probs->data() + h * nq * nk, eq, ek);
    p.noalias() = (qh * kh.transpose()) * scale;
    Eigen::VectorXd row_max = p.rowwise().maxCoeff();
    p.array().colwise() -= row_max.array();
    p.array() = p.array().exp();
    Eigen::VectorXd row_sum = p.rowwise().sum();
    p.array().colwise() /= row_sum.array();
    MutBlock oh(out.data() + h * dh, eq, edh, stride);
    oh.noalias() = p * vh;
  }
  return make_result({nq, d}, std::move(out), {q, k, v}, [=](detail::Node& self) {
    auto& pq = parent(self, 0);
    auto& pk = parent(self, 1);
    auto& pv = parent(self, 2);
    double* gq = pq.requires_grad ? pq.ensure_grad().data() : nullptr;
    double* gk = pk.requires_grad ? pk.ensure_grad().data() : nullptr;
    double* gv = pv.requires_grad ? pv.ensure_grad().data() : nullptr;
    RowMat dp(eq, ek);
    for (std::size_t h = 0; h < heads; ++h) {
      ConstBlock dout(self.grad.data() + h * dh, eq, edh, stride);
      ConstBlock qh(pq.data.data() + h * dh, eq, edh, stride);
      ConstBlock kh(pk.data.data() + h * dh, ek, edh, stride);
      ConstBlock vh(pv.data.data() + h * dh, ek, edh, stride);
      ConstMap p(probs->data() + h * nq * nk, eq, ek);
      if (gv) MutBlock(gv + h * dh, ek, edh, stride).noalias() += p.transpose() * dout;
      dp.noalias() = dout * vh.transpose();
      // dS = P * (dP - rowsum(dP * P)), then fold in the 1/sqrt(dh) scale.
      Eigen::VectorXd dots = (dp.array() * p.array()).rowwise().sum();
      dp.array().colwise() -= dots.array();
      dp.array() *= p.array() * scale;
      if (gq) MutBlock(gq + h * dh, eq, edh, stride).noalias() += dp * kh;
      if (gk) MutBlock(gk + h * dh, ek, edh, stride).noalias() += dp.transpose() * qh;
    }
  });
}

}  // namespace sketchpart::nn
