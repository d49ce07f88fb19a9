#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include "sketchpart/render/image.hpp"
#include "sketchpart/shape/mesh.hpp"
#include "sketchpart/shape/primitive.hpp"

namespace sketchpart::render {

using shape::PartPrimitive;
using shape::Vec3;
using Vec2 = Eigen::Vector2d;

inline constexpr double kDegree = std::numbers::pi / 180.0;
/// Radius of the sphere around [-1,1]^3.
inline constexpr double kShapeCircumradius = 1.7320508075688772;

enum class Projection { orthographic, perspective };

/// Orbit camera looking at the origin, y up. Position is
/// distance * (cos el sin az, sin el, cos el cos az).
struct Camera {
  double azimuth = 0.0;
  double elevation = 20.0 * kDegree;
  double distance = 3.0;
  Projection projection = Projection::orthographic;
  double fov = 40.0 * kDegree;      // perspective only, full vertical angle
  double ortho_half_width = 1.6;    // orthographic only, world units

  /// Throws ArgumentError on distance <= circumradius, fov outside
  /// (10, 90) degrees, or a non-positive orthographic width.
  void validate() const;

  Vec3 position() const;
  Vec3 forward() const;
  Vec3 right() const;
  Vec3 up() const;

  bool operator==(const Camera&) const = default;
};

/// `count` azimuths spread evenly from 0, orthographic.
std::vector<Camera> default_views(std::size_t count = 6, double elevation = 20.0 * kDegree);

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
};

/// Ray through continuous pixel coordinates (pixel centers at i + 0.5,
/// y pointing down) of a res x res image.
Ray camera_ray(const Camera& camera, double px, double py, std::size_t res);

/// Continuous pixel coordinates of a world point; inverse of camera_ray.
Vec2 project(const Camera& camera, const Vec3& point, std::size_t res);

/// Far limit of ray marching; misses are reported as twice this value.
double far_plane(const Camera& camera);

/// Per-pixel distance along the view ray; misses hold `sentinel`.
struct DepthMap {
  std::size_t width = 0;
  std::size_t height = 0;
  double sentinel = 0.0;
  std::vector<double> depth;

  double at(std::size_t x, std::size_t y) const { return depth[y * width + x]; }
  bool hit(std::size_t x, std::size_t y) const { return at(x, y) < sentinel; }
};

/// Sphere tracing against the union sdf: steps by the distance bound from
/// the entry of the parts' bounding box, hit when |sdf| < 1e-4, at most 256
/// steps. Empty `parts` renders all background.
DepthMap render_depth(std::span<const PartPrimitive> parts, const Camera& camera, std::size_t res);

struct OutlineOptions {
  double blur_sigma = 1.5;  // pixels
  double canny_low = 0.1;   // fraction of the maximum gradient
  double canny_high = 0.25;

  void validate() const;
};

/// Canny on the depth map. Background depth is replaced by the farthest
/// hit plus one unit before a Gaussian blur, Sobel gradients, non-maximum
/// suppression and hysteresis. Edges are ink (0) on white (1).
Image extract_outline(const DepthMap& depth, const OutlineOptions& options = {});

/// Square source window mapped onto the normalized sketch: `side` source
/// pixels around (center_x, center_y) fill all but a 4% margin.
struct CropBox {
  double center_x = 0.0;
  double center_y = 0.0;
  double side = 0.0;
};

inline constexpr double kSketchMargin = 0.04;

/// Tight box of the ink (value < 0.5), padded to a square.
/// Throws EmptySketchError when there is no ink.
CropBox ink_crop(const Image& image);

/// Bilinear resample of `crop` into a 256x256 sketch, background outside the
/// source. A crop that already matches the output frame to within 3 px of
/// scale and 1.5 px of offset is taken as the identity, which makes
/// normalization idempotent.
Sketch apply_crop(const Image& image, const CropBox& crop);

/// Centers the ink, crops empty borders and resizes to 256x256.
Sketch normalize_sketch(const Image& image);

struct RenderOptions {
  std::size_t res = 320;
  OutlineOptions outline;
};

/// Depth -> outline -> normalization of the whole shape.
Sketch render_outline(std::span<const PartPrimitive> parts, const Camera& camera, const RenderOptions& options = {});

/// Outline of the flagged parts, cropped with the full shape's box so the
/// result aligns with render_outline. Throws ArgumentError when no flag is
/// set or the flag count differs from the part count.
Sketch render_partial(std::span<const PartPrimitive> parts, const std::vector<bool>& flags, const Camera& camera,
                      const RenderOptions& options = {});

/// Lambert shading with sdf-gradient normals and a light at the camera;
/// white background.
Image render_shaded(std::span<const PartPrimitive> parts, const Camera& camera, std::size_t res);

/// Same shading for a triangle mesh, by z-buffered rasterization.
Image render_shaded(const shape::LabeledMesh& mesh, const Camera& camera, std::size_t res);

/// Normalized central-difference gradient of the union sdf.
Vec3 sdf_normal(std::span<const PartPrimitive> parts, const Vec3& p, double h = 1e-5);

// Augmentation.

struct AugmentParams {
  bool flip = false;
  /// Corner displacement as a fraction of the width, clockwise from the
  /// top-left corner, (dx, dy) each.
  std::array<Vec2, 4> corners{Vec2::Zero(), Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
  /// Positive dilates the ink, negative erodes it.
  int stroke_radius = 0;
  /// Fraction of ink pixels removed in connected runs.
  double dropout = 0.0;
  std::uint64_t dropout_seed = 0;
};

inline constexpr double kMaxCornerJitter = 0.08;
inline constexpr double kMaxDropout = 0.20;

/// Flip with probability 0.5, corners uniform in +-8% of the width, stroke
/// radius in {0,1,2} with a random sign. `abstract` adds 0-20% dropout.
AugmentParams sample_augment_params(std::uint64_t seed, bool abstract = false);

/// dropout -> flip -> perspective warp -> morphology -> normalize_sketch.
/// An erosion that would remove more than half the ink is skipped.
Sketch apply_augmentation(const Sketch& sketch, const AugmentParams& params);

Sketch augment(const Sketch& sketch, std::uint64_t seed);

/// Stand-in for abstract sketches: augmentation with stroke dropout.
Sketch abstract_sketch(const Sketch& sketch, std::uint64_t seed);

Image flip_horizontal(const Image& image);
/// Warps so the image corners land at the displaced corners.
Image warp_perspective(const Image& image, const std::array<Vec2, 4>& corners);
Image dilate_ink(const Image& image, int radius);
Image erode_ink(const Image& image, int radius);
Image drop_strokes(const Image& image, double fraction, std::uint64_t seed);

// Debug dump: "SKDEPTH1", u32 width, u32 height, float32 depths, little endian.
void write_depth_map(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth_map(const std::filesystem::path& path);

}  // namespace sketchpart::render
