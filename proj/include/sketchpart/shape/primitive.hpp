#pragma once

#include <Eigen/Dense>
#include <span>
#include <string_view>
#include <vector>

namespace sketchpart::shape {

using Vec3 = Eigen::Vector3d;

enum class PartKind { box = 0, cylinder = 1, ellipsoid = 2 };

std::string_view to_string(PartKind kind);
PartKind part_kind_from_string(std::string_view name);

/// One geometric part. Coordinates are shape-normalized (shapes fit
/// [-1,1]^3), y is up and `yaw` rotates about +y.
///
/// Cylinders stand along the local y axis with half-height half_extents.y()
/// and radius (half_extents.x() + half_extents.z()) / 2.
struct PartPrimitive {
  PartKind kind = PartKind::box;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
  double yaw = 0.0;

  bool operator==(const PartPrimitive&) const = default;
};

/// Throws ArgumentError unless extents are positive and the part stays
/// inside [-1.25, 1.25]^3 along each axis (center +- half_extents).
void validate(const PartPrimitive& p);

/// Wraps an angle to [-pi, pi).
double wrap_angle(double radians);

/// Equality with yaw compared modulo 2*pi up to `yaw_tol`.
bool same_primitive(const PartPrimitive& a, const PartPrimitive& b, double yaw_tol = 1e-12);

// Latent row layout (first 16 entries, rest zero):
//   [0..2]   one-hot kind (box, cylinder, ellipsoid)
//   [3..5]   center
//   [6..8]   half extents
//   [9..10]  cos yaw, sin yaw
//   [11]     occupancy tag, 1 for a real part
//   [12..15] reserved, zero
inline constexpr std::size_t kLatentSemanticWidth = 16;
inline constexpr std::size_t kOccupancyIndex = 11;
inline constexpr double kMinHalfExtent = 0.02;
inline constexpr double kMaxHalfExtent = 1.2;
inline constexpr double kMaxCenter = 1.1;

std::vector<double> encode_part(const PartPrimitive& p, std::size_t d_model);

/// Total over finite rows: argmax kind (ties to lowest), clamped center and
/// extents, yaw = atan2(sin, cos). Throws NumericError on non-finite input.
PartPrimitive decode_part(std::span<const double> zrow);

/// Per-part latent code: m rows of width d_model plus presence flags.
struct PartSet {
  std::size_t m = 0;
  std::size_t d_model = 0;
  std::vector<double> z;  // row-major m x d_model
  std::vector<double> c;  // m entries

  PartSet() = default;
  PartSet(std::size_t m, std::size_t d_model) : m(m), d_model(d_model), z(m * d_model, 0.0), c(m, 0.0) {}

  std::span<double> row(std::size_t i) { return {z.data() + i * d_model, d_model}; }
  std::span<const double> row(std::size_t i) const { return {z.data() + i * d_model, d_model}; }
  std::size_t present_count(double threshold = 0.5) const;

  bool operator==(const PartSet&) const = default;
};

/// Ground-truth set: slot `slots[i]` holds encode_part(parts[i]), c = 1
/// there, zero rows and c = 0 elsewhere.
PartSet make_part_set(std::span<const PartPrimitive> parts, std::span<const std::size_t> slots, std::size_t m,
                      std::size_t d_model);

/// Decodes the rows whose presence is >= threshold. `slots_out`, when
/// given, receives the slot index of each returned part.
std::vector<PartPrimitive> decode_present(const PartSet& set, double threshold = 0.5,
                                          std::vector<std::size_t>* slots_out = nullptr);

/// Signed distance to one primitive. Exact for boxes and cylinders; the
/// ellipsoid uses the scaled-sphere bound (|p/r| - 1) * min(r), whose zero
/// set is exact and which never overestimates the distance.
double primitive_sdf(const PartPrimitive& p, const Vec3& q);

/// Union: min over parts. Throws ArgumentError on an empty list.
double sdf(std::span<const PartPrimitive> parts, const Vec3& q);

/// Index of the part with the smallest signed distance at q (lowest index
/// on ties).
std::size_t part_responsibility(std::span<const PartPrimitive> parts, const Vec3& q);

/// Axis-aligned bounds of a primitive (exact for yaw = 0, conservative otherwise).
void primitive_bounds(const PartPrimitive& p, Vec3& lo, Vec3& hi);

}  // namespace sketchpart::shape
