#include "sketchpart/render/render.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "sketchpart/errors.hpp"

namespace sketchpart::render {
namespace {

constexpr double kHitEpsilon = 1e-4;
constexpr int kMaxSteps = 256;
// Bounding radius of the [-1.25, 1.25]^3 part domain, plus slack.
constexpr double kSceneRadius = 2.2;

struct Box {
  Vec3 lo;
  Vec3 hi;
};

Box scene_bounds(std::span<const PartPrimitive> parts) {
  Box b{Vec3::Constant(std::numeric_limits<double>::infinity()), Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const auto& p : parts) {
    Vec3 lo, hi;
    shape::primitive_bounds(p, lo, hi);
    b.lo = b.lo.cwiseMin(lo);
    b.hi = b.hi.cwiseMax(hi);
  }
  b.lo.array() -= 1e-3;
  b.hi.array() += 1e-3;
  return b;
}

// Slab test; false when the ray misses the box in front of the origin.
bool ray_box(const Ray& ray, const Box& box, double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double inv = 1.0 / ray.dir[a];
    double ta = (box.lo[a] - ray.origin[a]) * inv;
    double tb = (box.hi[a] - ray.origin[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 <= t1;
}

// Distance along the ray to the first surface hit, or a negative value.
double trace(std::span<const PartPrimitive> parts, const Box& box, const Ray& ray, double far) {
  double t0, t1;
  if (!ray_box(ray, box, t0, t1)) return -1.0;
  t1 = std::min(t1, far);
  double t = t0;
  for (int step = 0; step < kMaxSteps && t <= t1; ++step) {
    const double d = shape::sdf(parts, ray.origin + t * ray.dir);
    if (std::abs(d) < kHitEpsilon) return t;
    t += d;
  }
  return -1.0;
}

double lambert(const Vec3& normal, const Vec3& to_light) {
  return 0.15 + 0.85 * std::max(0.0, normal.dot(to_light));
}

double sample_bilinear(const Image& image, double x, double y, double background) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  const double ax = x - fx, ay = y - fy;
  auto px = [&](long xi, long yi) {
    if (xi < 0 || yi < 0 || xi >= static_cast<long>(image.width) || yi >= static_cast<long>(image.height)) {
      return background;
    }
    return image.at(static_cast<std::size_t>(xi), static_cast<std::size_t>(yi));
  };
  return (1 - ay) * ((1 - ax) * px(x0, y0) + ax * px(x0 + 1, y0)) + ay * ((1 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1));
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= total;
  return k;
}

// Separable blur with clamped borders.
std::vector<double> blur(const std::vector<double>& in, std::size_t w, std::size_t h, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const long r = static_cast<long>(k.size() / 2);
  const long W = static_cast<long>(w), H = static_cast<long>(h);
  std::vector<double> tmp(in.size()), out(in.size());
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i) s += k[i + r] * in[y * W + std::clamp(x + i, 0L, W - 1)];
      tmp[y * W + x] = s;
    }
  }
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i) s += k[i + r] * tmp[std::clamp(y + i, 0L, H - 1) * W + x];
      out[y * W + x] = s;
    }
  }
  return out;
}

template <class T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ParseError("depth map: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr char kDepthMagic[8] = {'S', 'K', 'D', 'E', 'P', 'T', 'H', '1'};

}  // namespace

void Camera::validate() const {
  if (!(distance > kShapeCircumradius)) throw ArgumentError("camera distance must exceed the shape circumradius");
  if (projection == Projection::perspective && !(fov > 10.0 * kDegree && fov < 90.0 * kDegree)) {
    throw ArgumentError("perspective fov must lie in (10, 90) degrees");
  }
  if (projection == Projection::orthographic && !(ortho_half_width > 0.0)) {
    throw ArgumentError("orthographic half width must be positive");
  }
}

Vec3 Camera::position() const {
  return distance * Vec3(std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
                         std::cos(elevation) * std::cos(azimuth));
}

Vec3 Camera::forward() const { return -position().normalized(); }

Vec3 Camera::right() const { return forward().cross(Vec3::UnitY()).normalized(); }

Vec3 Camera::up() const { return right().cross(forward()); }

std::vector<Camera> default_views(std::size_t count, double elevation) {
  std::vector<Camera> views(count);
  for (std::size_t i = 0; i < count; ++i) {
    views[i].azimuth = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
    views[i].elevation = elevation;
  }
  return views;
}

Ray camera_ray(const Camera& camera, double px, double py, std::size_t res) {
  const double sx = 2.0 * px / static_cast<double>(res) - 1.0;
  const double sy = 1.0 - 2.0 * py / static_cast<double>(res);
  const Vec3 f = camera.forward(), r = camera.right(), u = camera.up();
  if (camera.projection == Projection::orthographic) {
    const double s = camera.ortho_half_width;
    return {camera.position() + s * sx * r + s * sy * u, f};
  }
  const double t = std::tan(0.5 * camera.fov);
  return {camera.position(), (f + t * sx * r + t * sy * u).normalized()};
}

Vec2 project(const Camera& camera, const Vec3& point, std::size_t res) {
  const Vec3 rel = point - camera.position();
  const Vec3 f = camera.forward(), r = camera.right(), u = camera.up();
  double sx, sy;
  if (camera.projection == Projection::orthographic) {
    sx = rel.dot(r) / camera.ortho_half_width;
    sy = rel.dot(u) / camera.ortho_half_width;
  } else {
    const double t = std::tan(0.5 * camera.fov), depth = rel.dot(f);
    sx = rel.dot(r) / (depth * t);
    sy = rel.dot(u) / (depth * t);
  }
  const double n = static_cast<double>(res);
  return {0.5 * (sx + 1.0) * n, 0.5 * (1.0 - sy) * n};
}

double far_plane(const Camera& camera) { return camera.distance + kSceneRadius; }

DepthMap render_depth(std::span<const PartPrimitive> parts, const Camera& camera, std::size_t res) {
  camera.validate();
  if (res == 0) throw ArgumentError("render_depth: resolution must be positive");
  DepthMap map;
  map.width = map.height = res;
  const double far = far_plane(camera);
  map.sentinel = 2.0 * far;
  map.depth.assign(res * res, map.sentinel);
  if (parts.empty()) return map;
  const Box box = scene_bounds(parts);
  for (std::size_t y = 0; y < res; ++y) {
    for (std::size_t x = 0; x < res; ++x) {
      const Ray ray = camera_ray(camera, x + 0.5, y + 0.5, res);
      const double t = trace(parts, box, ray, far);
      if (t >= 0.0) map.depth[y * res + x] = t;
    }
  }
  return map;
}

void OutlineOptions::validate() const {
  if (!(blur_sigma > 0.0)) throw ArgumentError("blur sigma must be positive");
  if (!(canny_low > 0.0 && canny_low < canny_high)) throw ArgumentError("canny thresholds must satisfy 0 < low < high");
}

Image extract_outline(const DepthMap& depth, const OutlineOptions& options) {
  options.validate();
  const std::size_t w = depth.width, h = depth.height;
  Image out(w, h, 1.0);
  if (w < 3 || h < 3) return out;

  double far_hit = -std::numeric_limits<double>::infinity();
  for (double d : depth.depth) {
    if (d < depth.sentinel) far_hit = std::max(far_hit, d);
  }
  if (!std::isfinite(far_hit)) return out;
  std::vector<double> field(depth.depth.size());
  for (std::size_t i = 0; i < field.size(); ++i) field[i] = depth.depth[i] < depth.sentinel ? depth.depth[i] : far_hit + 1.0;
  field = blur(field, w, h, options.blur_sigma);

  std::vector<double> mag(w * h, 0.0);
  std::vector<std::uint8_t> dir(w * h, 0);
  double peak = 0.0;
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      auto f = [&](std::size_t xi, std::size_t yi) { return field[yi * w + xi]; };
      const double gx = (f(x + 1, y - 1) + 2 * f(x + 1, y) + f(x + 1, y + 1)) - (f(x - 1, y - 1) + 2 * f(x - 1, y) + f(x - 1, y + 1));
      const double gy = (f(x - 1, y + 1) + 2 * f(x, y + 1) + f(x + 1, y + 1)) - (f(x - 1, y - 1) + 2 * f(x, y - 1) + f(x + 1, y - 1));
      const double m = std::hypot(gx, gy);
      mag[y * w + x] = m;
      peak = std::max(peak, m);
      // Quantized gradient direction: 0 horizontal, 1 diagonal (/), 2 vertical, 3 diagonal (\).
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      dir[y * w + x] = angle < 22.5 || angle >= 157.5 ? 0 : angle < 67.5 ? 1 : angle < 112.5 ? 2 : 3;
    }
  }
  // Gradients below this are numerical noise on flat regions.
  if (peak < 1e-9) return out;

  // Non-maximum suppression; the strict/non-strict pair keeps exactly one
  // pixel across symmetric plateaus.
  static constexpr int kOffsets[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  std::vector<double> thin(w * h, 0.0);
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const double m = mag[y * w + x];
      if (m <= 0.0) continue;
      const auto* o = kOffsets[dir[y * w + x]];
      const double before = mag[(y - o[1]) * w + (x - o[0])];
      const double after = mag[(y + o[1]) * w + (x + o[0])];
      if (m > before && m >= after) thin[y * w + x] = m;
    }
  }

  const double high = options.canny_high * peak, low = options.canny_low * peak;
  std::vector<std::uint8_t> state(w * h, 0);  // 1 weak, 2 edge
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < thin.size(); ++i) {
    if (thin[i] >= high) {
      state[i] = 2;
      stack.push_back(i);
    } else if (thin[i] >= low) {
      state[i] = 1;
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const long x = static_cast<long>(i % w), y = static_cast<long>(i / w);
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        const long nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
        if (state[j] == 1) {
          state[j] = 2;
          stack.push_back(j);
        }
      }
    }
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] == 2) out.pixels[i] = 0.0;
  }
  return out;
}

CropBox ink_crop(const Image& image) {
  std::size_t x0 = image.width, y0 = image.height, x1 = 0, y1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      if (image.at(x, y) >= kInkThreshold) continue;
      any = true;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!any) throw EmptySketchError("sketch contains no ink");
  CropBox box;
  box.center_x = 0.5 * static_cast<double>(x0 + x1 + 1);
  box.center_y = 0.5 * static_cast<double>(y0 + y1 + 1);
  box.side = static_cast<double>(std::max(x1 - x0, y1 - y0) + 1);
  return box;
}

Sketch apply_crop(const Image& image, const CropBox& crop) {
  if (!(crop.side > 0.0)) throw ArgumentError("apply_crop: crop side must be positive");
  const double n = static_cast<double>(kSketchSize);
  const double target = n * (1.0 - 2.0 * kSketchMargin);
  Sketch out(kSketchSize, kSketchSize, 1.0);
  if (is_sketch(image) && std::abs(crop.side - target) <= 3.0 && std::abs(crop.center_x - 0.5 * n) <= 1.5 &&
      std::abs(crop.center_y - 0.5 * n) <= 1.5) {
    for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = std::clamp(image.pixels[i], 0.0, 1.0);
    return out;
  }
  const double scale = crop.side / target;
  for (std::size_t v = 0; v < kSketchSize; ++v) {
    const double sy = crop.center_y + (v + 0.5 - 0.5 * n) * scale - 0.5;
    for (std::size_t u = 0; u < kSketchSize; ++u) {
      const double sx = crop.center_x + (u + 0.5 - 0.5 * n) * scale - 0.5;
      out.at(u, v) = std::clamp(sample_bilinear(image, sx, sy, 1.0), 0.0, 1.0);
    }
  }
  return out;
}

Sketch normalize_sketch(const Image& image) { return apply_crop(image, ink_crop(image)); }

Sketch render_outline(std::span<const PartPrimitive> parts, const Camera& camera, const RenderOptions& options) {
  const Image raw = extract_outline(render_depth(parts, camera, options.res), options.outline);
  return apply_crop(raw, ink_crop(raw));
}

Sketch render_partial(std::span<const PartPrimitive> parts, const std::vector<bool>& flags, const Camera& camera,
                      const RenderOptions& options) {
  if (flags.size() != parts.size()) throw ArgumentError("render_partial: one flag per part required");
  std::vector<PartPrimitive> chosen;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (flags[i]) chosen.push_back(parts[i]);
  }
  if (chosen.empty()) throw ArgumentError("render_partial: no part flagged");
  const Image full = extract_outline(render_depth(parts, camera, options.res), options.outline);
  const CropBox box = ink_crop(full);
  if (chosen.size() == parts.size()) return apply_crop(full, box);
  const Image partial = extract_outline(render_depth(chosen, camera, options.res), options.outline);
  return apply_crop(partial, box);
}

Vec3 sdf_normal(std::span<const PartPrimitive> parts, const Vec3& p, double h) {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    g[a] = shape::sdf(parts, p + e) - shape::sdf(parts, p - e);
  }
  const double n = g.norm();
  return n > 0.0 ? Vec3(g / n) : Vec3::UnitY();
}

Image render_shaded(std::span<const PartPrimitive> parts, const Camera& camera, std::size_t res) {
  camera.validate();
  Image out(res, res, 1.0);
  if (parts.empty()) return out;
  const Box box = scene_bounds(parts);
  const double far = far_plane(camera);
  const Vec3 to_light = -camera.forward();
  for (std::size_t y = 0; y < res; ++y) {
    for (std::size_t x = 0; x < res; ++x) {
      const Ray ray = camera_ray(camera, x + 0.5, y + 0.5, res);
      const double t = trace(parts, box, ray, far);
      if (t < 0.0) continue;
      out.at(x, y) = lambert(sdf_normal(parts, ray.origin + t * ray.dir), to_light);
    }
  }
  return out;
}

Image render_shaded(const shape::LabeledMesh& mesh, const Camera& camera, std::size_t res) {
  camera.validate();
  Image out(res, res, 1.0);
  std::vector<double> zbuf(res * res, std::numeric_limits<double>::infinity());
  const Vec3 f = camera.forward(), to_light = -f, eye = camera.position();
  std::vector<Vec2> screen(mesh.vertices.size());
  std::vector<double> depth(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    screen[i] = project(camera, mesh.vertices[i], res);
    depth[i] = (mesh.vertices[i] - eye).dot(f);
  }
  for (const auto& face : mesh.faces) {
    const Vec3 n = (mesh.vertices[face[1]] - mesh.vertices[face[0]]).cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]);
    if (n.squaredNorm() == 0.0) continue;
    const double shade = lambert(n.normalized().dot(to_light) >= 0.0 ? n.normalized() : Vec3(-n.normalized()), to_light);
    const Vec2 &a = screen[face[0]], &b = screen[face[1]], &c = screen[face[2]];
    const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (area == 0.0) continue;
    const double lo_x = std::max(0.0, std::floor(std::min({a.x(), b.x(), c.x()})));
    const double hi_x = std::min(static_cast<double>(res) - 1.0, std::ceil(std::max({a.x(), b.x(), c.x()})));
    const double lo_y = std::max(0.0, std::floor(std::min({a.y(), b.y(), c.y()})));
    const double hi_y = std::min(static_cast<double>(res) - 1.0, std::ceil(std::max({a.y(), b.y(), c.y()})));
    for (double py = lo_y; py <= hi_y; py += 1.0) {
      for (double px = lo_x; px <= hi_x; px += 1.0) {
        const Vec2 p(px + 0.5, py + 0.5);
        const double w0 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
        const double w1 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double z = w0 * depth[face[0]] + w1 * depth[face[1]] + w2 * depth[face[2]];
        const auto idx = static_cast<std::size_t>(py) * res + static_cast<std::size_t>(px);
        if (z < zbuf[idx]) {
          zbuf[idx] = z;
          out.pixels[idx] = shade;
        }
      }
    }
  }
  return out;
}

AugmentParams sample_augment_params(std::uint64_t seed, bool abstract) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-kMaxCornerJitter, kMaxCornerJitter);
  AugmentParams p;
  p.flip = unit(rng) < 0.5;
  for (auto& c : p.corners) {
    c.x() = jitter(rng);
    c.y() = jitter(rng);
  }
  const int radius = std::uniform_int_distribution<int>(0, 2)(rng);
  p.stroke_radius = unit(rng) < 0.5 ? radius : -radius;
  if (abstract) {
    p.dropout = kMaxDropout * unit(rng);
    p.dropout_seed = rng();
  }
  return p;
}

Image flip_horizontal(const Image& image) {
  Image out(image.width, image.height);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x) out.at(x, y) = image.at(image.width - 1 - x, y);
  return out;
}

Image warp_perspective(const Image& image, const std::array<Vec2, 4>& corners) {
  const double w = static_cast<double>(image.width), h = static_cast<double>(image.height);
  const std::array<Vec2, 4> src{Vec2(0, 0), Vec2(w, 0), Vec2(w, h), Vec2(0, h)};
  if (std::all_of(corners.begin(), corners.end(), [](const Vec2& c) { return c.isZero(0.0); })) return image;
  // Homography H (h33 = 1) taking src corners to displaced corners.
  Eigen::Matrix<double, 8, 8> A;
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    const Vec2 s = src[i], d = src[i] + corners[i] * w;
    A.row(2 * i) << s.x(), s.y(), 1, 0, 0, 0, -d.x() * s.x(), -d.x() * s.y();
    A.row(2 * i + 1) << 0, 0, 0, s.x(), s.y(), 1, -d.y() * s.x(), -d.y() * s.y();
    rhs(2 * i) = d.x();
    rhs(2 * i + 1) = d.y();
  }
  const Eigen::Matrix<double, 8, 1> sol = A.fullPivLu().solve(rhs);
  Eigen::Matrix3d H;
  H << sol(0), sol(1), sol(2), sol(3), sol(4), sol(5), sol(6), sol(7), 1.0;
  const Eigen::Matrix3d inv = H.inverse();
  Image out(image.width, image.height, 1.0);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const Eigen::Vector3d q = inv * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
      if (q.z() <= 0.0) continue;
      out.at(x, y) = std::clamp(sample_bilinear(image, q.x() / q.z() - 0.5, q.y() / q.z() - 0.5, 1.0), 0.0, 1.0);
    }
  }
  return out;
}

namespace {

// Min (dilate ink) or max (erode ink) over a disk.
Image morph(const Image& image, int radius, bool dilate) {
  if (radius <= 0) return image;
  Image out(image.width, image.height);
  const long W = static_cast<long>(image.width), H = static_cast<long>(image.height);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double v = image.at(x, y);
      for (long dy = -radius; dy <= radius; ++dy) {
        for (long dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const long nx = x + dx, ny = y + dy;
          const double n = (nx < 0 || ny < 0 || nx >= W || ny >= H) ? 1.0 : image.at(nx, ny);
          v = dilate ? std::min(v, n) : std::max(v, n);
        }
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

}  // namespace

Image dilate_ink(const Image& image, int radius) { return morph(image, radius, true); }

Image erode_ink(const Image& image, int radius) { return morph(image, radius, false); }

Image drop_strokes(const Image& image, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0) return image;
  Image out = image;
  std::vector<std::size_t> ink;
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    if (image.pixels[i] < kInkThreshold) ink.push_back(i);
  }
  const auto target = static_cast<std::size_t>(std::lround(std::min(fraction, 1.0) * static_cast<double>(ink.size())));
  std::mt19937_64 rng(seed);
  std::shuffle(ink.begin(), ink.end(), rng);
  std::uniform_int_distribution<std::size_t> run_length(4, 16);
  const long W = static_cast<long>(image.width), H = static_cast<long>(image.height);
  std::size_t dropped = 0;
  for (std::size_t start : ink) {
    if (dropped >= target) break;
    if (out.pixels[start] >= kInkThreshold) continue;
    // Erase a run by walking connected ink from the start pixel.
    std::size_t budget = std::min(run_length(rng), target - dropped);
    std::vector<std::size_t> frontier{start};
    while (!frontier.empty() && budget > 0) {
      const std::size_t i = frontier.back();
      frontier.pop_back();
      if (out.pixels[i] >= kInkThreshold) continue;
      out.pixels[i] = 1.0;
      ++dropped;
      --budget;
      const long x = static_cast<long>(i) % W, y = static_cast<long>(i) / W;
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dx = -1; dx <= 1; ++dx) {
          const long nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
          const auto j = static_cast<std::size_t>(ny * W + nx);
          if (out.pixels[j] < kInkThreshold) frontier.push_back(j);
        }
      }
    }
  }
  return out;
}

Sketch apply_augmentation(const Sketch& sketch, const AugmentParams& params) {
  if (std::abs(params.stroke_radius) > 2) throw ArgumentError("stroke radius must lie in [-2, 2]");
  Image img = drop_strokes(sketch, params.dropout, params.dropout_seed);
  if (params.flip) img = flip_horizontal(img);
  img = warp_perspective(img, params.corners);
  if (params.stroke_radius > 0) {
    img = dilate_ink(img, params.stroke_radius);
  } else if (params.stroke_radius < 0) {
    Image eroded = erode_ink(img, -params.stroke_radius);
    if (2 * ink_count(eroded) >= ink_count(img)) img = std::move(eroded);
  }
  if (ink_count(img) == 0) return normalize_sketch(sketch);
  return normalize_sketch(img);
}

Sketch augment(const Sketch& sketch, std::uint64_t seed) { return apply_augmentation(sketch, sample_augment_params(seed)); }

Sketch abstract_sketch(const Sketch& sketch, std::uint64_t seed) {
  return apply_augmentation(sketch, sample_augment_params(seed, true));
}

void write_depth_map(const std::filesystem::path& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out.write(kDepthMagic, sizeof kDepthMagic);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(depth.width));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(depth.height));
  for (double d : depth.depth) {
    put_le<float>(out, d < depth.sentinel ? static_cast<float>(d) : std::numeric_limits<float>::infinity());
  }
  if (!out) throw ArgumentError("failed writing " + path.string());
}

DepthMap read_depth_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kDepthMagic, sizeof magic) != 0) {
    throw ParseError("depth map: bad magic");
  }
  DepthMap map;
  map.width = get_le<std::uint32_t>(in);
  map.height = get_le<std::uint32_t>(in);
  map.sentinel = std::numeric_limits<double>::infinity();
  map.depth.resize(map.width * map.height);
  for (double& d : map.depth) d = get_le<float>(in);
  return map;
}

}  // namespace sketchpart::render
