#include "sketchpart/metrics/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sketchpart/errors.hpp"

namespace sketchpart::metrics {
namespace {

// Uniform grid over a point set for nearest-neighbour queries.
class PointGrid {
 public:
  explicit PointGrid(std::span<const Vec3> points) : points_(points) {
    lo_ = hi_ = points.front();
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const Vec3 extent = (hi_ - lo_).cwiseMax(1e-12);
    // About two points per cell.
    const double volume = extent.prod();
    cell_ = std::cbrt(2.0 * volume / static_cast<double>(points.size()));
    cell_ = std::max(cell_, extent.maxCoeff() / 256.0);
    for (int a = 0; a < 3; ++a) dims_[a] = std::max<long>(1, static_cast<long>(std::floor(extent[a] / cell_)) + 1);
    std::vector<std::size_t> counts(static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]) + 1, 0);
    std::vector<std::size_t> cell_of(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      cell_of[i] = flat(cell_index(points[i]));
      ++counts[cell_of[i] + 1];
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    start_ = counts;
    order_.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) order_[counts[cell_of[i]]++] = i;
  }

  // Smallest squared distance from q to the set.
  double nearest(const Vec3& q) const {
    const Vec3 p = q.cwiseMax(lo_).cwiseMin(hi_);
    const double outside = (q - p).squaredNorm();
    const auto c = cell_index(p);
    double best = std::numeric_limits<double>::infinity();
    const long max_ring = std::max({dims_[0], dims_[1], dims_[2]});
    for (long r = 0; r <= max_ring; ++r) {
      visit_ring(c, r, q, best);
      // Cells beyond ring r are at least r cells from p, and q's offset from
      // the box is orthogonal to that.
      const double bound = outside + (r * cell_) * (r * cell_);
      if (best <= bound) break;
    }
    return best;
  }

 private:
  std::array<long, 3> cell_index(const Vec3& p) const {
    std::array<long, 3> c{};
    for (int a = 0; a < 3; ++a) c[a] = std::clamp(static_cast<long>(std::floor((p[a] - lo_[a]) / cell_)), 0L, dims_[a] - 1);
    return c;
  }
  std::size_t flat(const std::array<long, 3>& c) const {
    return static_cast<std::size_t>((c[2] * dims_[1] + c[1]) * dims_[0] + c[0]);
  }

  void visit_cell(long x, long y, long z, const Vec3& q, double& best) const {
    if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) return;
    const std::size_t f = flat({x, y, z});
    for (std::size_t k = start_[f]; k < start_[f + 1]; ++k) best = std::min(best, (q - points_[order_[k]]).squaredNorm());
  }

  void visit_ring(const std::array<long, 3>& c, long r, const Vec3& q, double& best) const {
    for (long dz = -r; dz <= r; ++dz) {
      for (long dy = -r; dy <= r; ++dy) {
        const bool edge = std::abs(dz) == r || std::abs(dy) == r;
        if (edge) {
          for (long dx = -r; dx <= r; ++dx) visit_cell(c[0] + dx, c[1] + dy, c[2] + dz, q, best);
        } else {
          visit_cell(c[0] - r, c[1] + dy, c[2] + dz, q, best);
          if (r > 0) visit_cell(c[0] + r, c[1] + dy, c[2] + dz, q, best);
        }
      }
    }
  }

  std::span<const Vec3> points_;
  Vec3 lo_, hi_;
  double cell_ = 1.0;
  std::array<long, 3> dims_{};
  std::vector<std::size_t> start_;
  std::vector<std::size_t> order_;
};

void require_points(std::span<const Vec3> a, std::span<const Vec3> b, const char* what) {
  if (a.empty() || b.empty()) throw ArgumentError(std::string(what) + ": point sets must be non-empty");
}

double one_sided(std::span<const Vec3> from, const PointGrid& to) {
  double total = 0.0;
  for (const auto& p : from) total += to.nearest(p);
  return total / static_cast<double>(from.size());
}

Eigen::MatrixXd distance_matrix(std::span<const Vec3> a, std::span<const Vec3> b) {
  Eigen::MatrixXd cost(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) cost(i, j) = (a[i] - b[j]).norm();
  return cost;
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Symmetric PSD square root, eigenvalues below zero clamped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m));
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

struct ConvLayer {
  std::size_t in = 0, out = 0;
  std::vector<double> w;  // [out][in][3][3]
};

const std::vector<ConvLayer>& feature_net() {
  static const std::vector<ConvLayer> layers = [] {
    std::mt19937_64 rng(kFeatureSeed);
    const std::size_t widths[4] = {1, 16, 32, kFeatureDim};
    std::vector<ConvLayer> net;
    for (int l = 0; l < 3; ++l) {
      ConvLayer layer{widths[l], widths[l + 1], {}};
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (9.0 * static_cast<double>(layer.in))));
      layer.w.resize(layer.out * layer.in * 9);
      for (double& v : layer.w) v = dist(rng);
      net.push_back(std::move(layer));
    }
    return net;
  }();
  return layers;
}

// 3x3 convolution, stride 2, zero padding 1, ReLU. Input [c][n][n].
std::vector<double> conv_stride2(const ConvLayer& layer, const std::vector<double>& x, std::size_t n) {
  const std::size_t h = n / 2;
  std::vector<double> y(layer.out * h * h, 0.0);
  for (std::size_t o = 0; o < layer.out; ++o) {
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double* k = &layer.w[(o * layer.in + i) * 9];
      const double* src = &x[i * n * n];
      for (std::size_t v = 0; v < h; ++v) {
        for (std::size_t u = 0; u < h; ++u) {
          double s = 0.0;
          for (int dy = -1; dy <= 1; ++dy) {
            const long sy = 2 * static_cast<long>(v) + dy;
            if (sy < 0 || sy >= static_cast<long>(n)) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              const long sx = 2 * static_cast<long>(u) + dx;
              if (sx < 0 || sx >= static_cast<long>(n)) continue;
              s += k[(dy + 1) * 3 + (dx + 1)] * src[sy * static_cast<long>(n) + sx];
            }
          }
          y[(o * h + v) * h + u] += s;
        }
      }
    }
  }
  for (double& v : y) v = std::max(v, 0.0);
  return y;
}

GaussianStats stats_of_rows(const Eigen::MatrixXd& rows) {
  GaussianStats s;
  s.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
  const double denom = rows.rows() > 1 ? static_cast<double>(rows.rows() - 1) : 1.0;
  s.cov = centered.transpose() * centered / denom;
  return s;
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_points(a, b, "chamfer");
  const PointGrid grid_a(a), grid_b(b);
  return one_sided(a, grid_b) + one_sided(b, grid_a);
}

double chamfer_brute(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_points(a, b, "chamfer");
  auto side = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    double total = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
      total += best;
    }
    return total / static_cast<double>(from.size());
  };
  return side(a, b) + side(b, a);
}

std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.cols() != cost.rows()) throw ArgumentError("hungarian: cost matrix must be square");
  // Shortest augmenting paths with row/column potentials (1-based, column 0
  // is the virtual source).
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

std::vector<std::size_t> auction(const Eigen::MatrixXd& cost, double eps_final) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.cols() != cost.rows()) throw ArgumentError("auction: cost matrix must be square");
  if (!(eps_final > 0.0)) throw ArgumentError("auction: epsilon must be positive");
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<double> price(n, 0.0);
  std::vector<std::size_t> owner(n, none), assigned(n, none);
  double eps = std::max(cost.maxCoeff() / 4.0, eps_final);
  while (true) {
    std::fill(owner.begin(), owner.end(), none);
    std::fill(assigned.begin(), assigned.end(), none);
    std::vector<std::size_t> queue(n);
    std::iota(queue.begin(), queue.end(), std::size_t{0});
    while (!queue.empty()) {
      const std::size_t i = queue.back();
      queue.pop_back();
      // Best and second-best value of -cost - price for bidder i.
      double best = -std::numeric_limits<double>::infinity(), second = best;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double value = -cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - price[j];
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      const double raise = (n > 1 ? best - second : 0.0) + eps;
      price[best_j] += raise;
      if (owner[best_j] != none) {
        assigned[owner[best_j]] = none;
        queue.push_back(owner[best_j]);
      }
      owner[best_j] = i;
      assigned[i] = best_j;
    }
    if (eps <= eps_final) break;
    eps = std::max(eps / 5.0, eps_final);
  }
  return assigned;
}

double emd(std::span<const Vec3> a, std::span<const Vec3> b, const EmdOptions& options) {
  require_points(a, b, "emd");
  if (a.size() != b.size()) throw ArgumentError("emd: point sets must have equal size");
  const Eigen::MatrixXd cost = distance_matrix(a, b);
  std::vector<std::size_t> match;
  if (options.force_exact || a.size() <= options.exact_limit) {
    match = hungarian(cost);
  } else {
    Vec3 lo = a.front(), hi = a.front();
    for (const auto& p : a) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    for (const auto& p : b) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    const double scale = std::max((hi - lo).norm(), 1e-12);
    match = auction(cost, options.auction_eps * scale);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i) total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(match[i]));
  return total;
}

double frechet_gaussian(const GaussianStats& out, const GaussianStats& ref) {
  if (out.mean.size() != ref.mean.size() || out.cov.rows() != ref.cov.rows() || out.cov.cols() != out.cov.rows() ||
      ref.cov.cols() != ref.cov.rows() || out.cov.rows() != out.mean.size()) {
    throw ArgumentError("frechet: feature dimensions differ");
  }
  const Eigen::MatrixXd s_out = symmetrized(out.cov), s_ref = symmetrized(ref.cov);
  const Eigen::MatrixXd root_ref = psd_sqrt(s_ref);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(root_ref * s_out * root_ref), Eigen::EigenvaluesOnly);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::max(0.0, (out.mean - ref.mean).squaredNorm() + s_out.trace() + s_ref.trace() - 2.0 * cross);
}

double frechet_distance(const FeatureStats& out, const FeatureStats& ref) {
  if (out.size() != ref.size() || out.empty()) throw ArgumentError("frechet: view counts differ or are zero");
  double total = 0.0;
  for (std::size_t v = 0; v < out.size(); ++v) total += frechet_gaussian(out[v], ref[v]);
  return total / static_cast<double>(out.size());
}

Eigen::MatrixXd view_feature_columns(const render::Image& image) {
  if (image.width != image.height || image.width == 0) throw ArgumentError("features: image must be square");
  constexpr std::size_t n = 64;
  std::vector<double> x(n * n);
  const double scale = static_cast<double>(image.width) / static_cast<double>(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u = 0; u < n; ++u) {
      const double sx = (u + 0.5) * scale - 0.5, sy = (v + 0.5) * scale - 0.5;
      const auto x0 = static_cast<std::size_t>(std::clamp(std::floor(sx), 0.0, static_cast<double>(image.width - 1)));
      const auto y0 = static_cast<std::size_t>(std::clamp(std::floor(sy), 0.0, static_cast<double>(image.height - 1)));
      const std::size_t x1 = std::min(x0 + 1, image.width - 1), y1 = std::min(y0 + 1, image.height - 1);
      const double ax = std::clamp(sx - static_cast<double>(x0), 0.0, 1.0), ay = std::clamp(sy - static_cast<double>(y0), 0.0, 1.0);
      const double value = (1 - ay) * ((1 - ax) * image.at(x0, y0) + ax * image.at(x1, y0)) +
                           ay * ((1 - ax) * image.at(x0, y1) + ax * image.at(x1, y1));
      x[v * n + u] = value - 0.5;
    }
  }
  std::size_t side = n;
  for (const auto& layer : feature_net()) {
    x = conv_stride2(layer, x, side);
    side /= 2;
  }
  const std::size_t positions = side * side;
  Eigen::MatrixXd columns(positions, kFeatureDim);
  for (std::size_t c = 0; c < kFeatureDim; ++c)
    for (std::size_t p = 0; p < positions; ++p) columns(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) = x[c * positions + p];
  return columns;
}

Eigen::VectorXd extract_view_features(const render::Image& image) {
  return view_feature_columns(image).colwise().mean().transpose();
}

GaussianStats view_stats(const render::Image& image) { return stats_of_rows(view_feature_columns(image)); }

std::vector<render::Camera> frechet_views(std::size_t count) {
  std::vector<render::Camera> views(count);
  for (std::size_t i = 0; i < count; ++i) {
    views[i].azimuth = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
    views[i].elevation = (i % 2 == 0 ? 15.0 : 35.0) * render::kDegree;
  }
  return views;
}

FeatureStats mesh_feature_stats(const LabeledMesh& mesh, std::size_t views, std::size_t res) {
  FeatureStats stats;
  for (const auto& camera : frechet_views(views)) stats.push_back(view_stats(render::render_shaded(mesh, camera, res)));
  return stats;
}

std::vector<RetrievalHit> retrieval_topk(const LabeledMesh& query, std::span<const NamedMesh> candidates, std::size_t k,
                                         std::size_t n_points, std::uint64_t seed) {
  if (candidates.empty()) throw ArgumentError("retrieval: no candidates");
  if (k == 0 || k > candidates.size()) throw ArgumentError("retrieval: k must lie in [1, candidates]");
  const auto q = shape::sample_surface(query, n_points, seed);
  std::vector<RetrievalHit> hits;
  hits.reserve(candidates.size());
  for (const auto& c : candidates) hits.push_back({c.id, chamfer(q, shape::sample_surface(c.mesh, n_points, seed))});
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    return a.cd != b.cd ? a.cd < b.cd : a.id < b.id;
  });
  hits.resize(k);
  return hits;
}

nlohmann::json PairReport::to_json() const {
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  return {{"cd_mean", mean(cd)}, {"cd_per_item", cd}, {"emd_mean", mean(emd)},
          {"frechet", frechet},  {"n_points", n_points}, {"seed", seed}};
}

PairReport score_pairs(std::span<const LabeledMesh> pred, std::span<const LabeledMesh> ref, std::size_t n_points,
                       std::uint64_t seed, std::size_t emd_points, std::size_t frechet_views_count) {
  if (pred.size() != ref.size() || pred.empty()) throw ArgumentError("score_pairs: need equally many, non-zero meshes");
  PairReport report;
  report.n_points = n_points;
  report.seed = seed;
  const std::size_t ne = std::min(n_points, emd_points);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    report.cd.push_back(chamfer(shape::sample_surface(pred[i], n_points, seed), shape::sample_surface(ref[i], n_points, seed)));
    report.emd.push_back(emd(shape::sample_surface(pred[i], ne, seed), shape::sample_surface(ref[i], ne, seed)));
  }
  if (frechet_views_count > 0) {
    const auto views = frechet_views(frechet_views_count);
    FeatureStats out, target;
    for (const auto& camera : views) {
      std::vector<Eigen::MatrixXd> po, pr;
      Eigen::Index rows = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        po.push_back(view_feature_columns(render::render_shaded(pred[i], camera, 128)));
        pr.push_back(view_feature_columns(render::render_shaded(ref[i], camera, 128)));
        rows += po.back().rows();
      }
      auto stack = [rows](const std::vector<Eigen::MatrixXd>& parts) {
        Eigen::MatrixXd all(rows, static_cast<Eigen::Index>(kFeatureDim));
        Eigen::Index r = 0;
        for (const auto& p : parts) {
          all.middleRows(r, p.rows()) = p;
          r += p.rows();
        }
        return all;
      };
      out.push_back(stats_of_rows(stack(po)));
      target.push_back(stats_of_rows(stack(pr)));
    }
    report.frechet = frechet_distance(out, target);
  }
  return report;
}

}  // namespace sketchpart::metrics
