#include "sketchpart/shape/primitive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sketchpart/errors.hpp"

namespace sketchpart::shape {

std::string_view to_string(PartKind kind) {
  switch (kind) {
    case PartKind::box: return "box";
    case PartKind::cylinder: return "cylinder";
    case PartKind::ellipsoid: return "ellipsoid";
  }
  return "box";
}

PartKind part_kind_from_string(std::string_view name) {
  if (name == "box") return PartKind::box;
  if (name == "cylinder") return PartKind::cylinder;
  if (name == "ellipsoid") return PartKind::ellipsoid;
  throw ArgumentError("unknown part kind '" + std::string(name) + "'");
}

void validate(const PartPrimitive& p) {
  if (!(p.half_extents.array() > 0.0).all()) throw ArgumentError("part half extents must be positive");
  if (!((p.center + p.half_extents).array().abs() <= 1.25).all() ||
      !((p.center - p.half_extents).array().abs() <= 1.25).all()) {
    throw ArgumentError("part extends outside [-1.25, 1.25]^3");
  }
}

double wrap_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

bool same_primitive(const PartPrimitive& a, const PartPrimitive& b, double yaw_tol) {
  if (a.kind != b.kind || a.center != b.center || a.half_extents != b.half_extents) return false;
  const double d = std::abs(wrap_angle(a.yaw - b.yaw));
  return d <= yaw_tol;
}

std::vector<double> encode_part(const PartPrimitive& p, std::size_t d_model) {
  if (d_model < kLatentSemanticWidth) {
    throw ConfigError("d_model must be at least " + std::to_string(kLatentSemanticWidth));
  }
  std::vector<double> row(d_model, 0.0);
  row[static_cast<std::size_t>(p.kind)] = 1.0;
  for (int i = 0; i < 3; ++i) {
    row[3 + i] = p.center[i];
    row[6 + i] = p.half_extents[i];
  }
  row[9] = std::cos(p.yaw);
  row[10] = std::sin(p.yaw);
  row[kOccupancyIndex] = 1.0;
  return row;
}

PartPrimitive decode_part(std::span<const double> zrow) {
  if (zrow.size() < kLatentSemanticWidth) throw ArgumentError("latent row shorter than 16 entries");
  for (double v : zrow) {
    if (!std::isfinite(v)) throw NumericError("latent row has non-finite entries");
  }
  PartPrimitive p;
  std::size_t best = 0;
  for (std::size_t k = 1; k < 3; ++k) {
    if (zrow[k] > zrow[best]) best = k;
  }
  p.kind = static_cast<PartKind>(best);
  for (int i = 0; i < 3; ++i) {
    p.center[i] = std::clamp(zrow[3 + i], -kMaxCenter, kMaxCenter);
    p.half_extents[i] = std::clamp(zrow[6 + i], kMinHalfExtent, kMaxHalfExtent);
  }
  p.yaw = std::atan2(zrow[10], zrow[9]);
  return p;
}

std::size_t PartSet::present_count(double threshold) const {
  return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [&](double v) { return v >= threshold; }));
}

PartSet make_part_set(std::span<const PartPrimitive> parts, std::span<const std::size_t> slots, std::size_t m,
                      std::size_t d_model) {
  if (parts.size() != slots.size()) throw ArgumentError("parts and slots differ in length");
  if (parts.size() > m) throw ConfigError("more parts than slots (m = " + std::to_string(m) + ")");
  PartSet set(m, d_model);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (slots[i] >= m) throw ArgumentError("slot index out of range");
    if (set.c[slots[i]] != 0.0) throw ArgumentError("slot assigned twice");
    auto row = encode_part(parts[i], d_model);
    std::copy(row.begin(), row.end(), set.row(slots[i]).begin());
    set.c[slots[i]] = 1.0;
  }
  return set;
}

std::vector<PartPrimitive> decode_present(const PartSet& set, double threshold, std::vector<std::size_t>* slots_out) {
  std::vector<PartPrimitive> parts;
  if (slots_out) slots_out->clear();
  for (std::size_t i = 0; i < set.m; ++i) {
    if (set.c[i] >= threshold) {
      parts.push_back(decode_part(set.row(i)));
      if (slots_out) slots_out->push_back(i);
    }
  }
  return parts;
}

namespace {

Vec3 to_local(const PartPrimitive& p, const Vec3& q) {
  const Vec3 d = q - p.center;
  // Inverse of a rotation by yaw about +y.
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  return {c * d.x() - s * d.z(), d.y(), s * d.x() + c * d.z()};
}

double box_sdf(const Vec3& q, const Vec3& h) {
  const Vec3 d = q.cwiseAbs() - h;
  const double outside = d.cwiseMax(0.0).norm();
  const double inside = std::min(d.maxCoeff(), 0.0);
  return outside + inside;
}

double cylinder_sdf(const Vec3& q, double radius, double half_height) {
  const double dr = std::hypot(q.x(), q.z()) - radius;
  const double dy = std::abs(q.y()) - half_height;
  const double outside = std::hypot(std::max(dr, 0.0), std::max(dy, 0.0));
  return std::min(std::max(dr, dy), 0.0) + outside;
}

double ellipsoid_sdf(const Vec3& q, const Vec3& r) { return (q.cwiseQuotient(r).norm() - 1.0) * r.minCoeff(); }

}  // namespace

double primitive_sdf(const PartPrimitive& p, const Vec3& q) {
  const Vec3 local = to_local(p, q);
  switch (p.kind) {
    case PartKind::box: return box_sdf(local, p.half_extents);
    case PartKind::cylinder:
      return cylinder_sdf(local, 0.5 * (p.half_extents.x() + p.half_extents.z()), p.half_extents.y());
    case PartKind::ellipsoid: return ellipsoid_sdf(local, p.half_extents);
  }
  return std::numeric_limits<double>::infinity();
}

double sdf(std::span<const PartPrimitive> parts, const Vec3& q) {
  if (parts.empty()) throw ArgumentError("sdf of an empty part list");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : parts) best = std::min(best, primitive_sdf(p, q));
  return best;
}

std::size_t part_responsibility(std::span<const PartPrimitive> parts, const Vec3& q) {
  if (parts.empty()) throw ArgumentError("part_responsibility of an empty part list");
  std::size_t best = 0;
  double best_d = primitive_sdf(parts[0], q);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const double d = primitive_sdf(parts[i], q);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

void primitive_bounds(const PartPrimitive& p, Vec3& lo, Vec3& hi) {
  Vec3 h = p.half_extents;
  if (p.kind == PartKind::cylinder) {
    const double r = 0.5 * (h.x() + h.z());
    h.x() = h.z() = r;
  }
  const double c = std::abs(std::cos(p.yaw)), s = std::abs(std::sin(p.yaw));
  const Vec3 ext{c * h.x() + s * h.z(), h.y(), s * h.x() + c * h.z()};
  lo = p.center - ext;
  hi = p.center + ext;
}

}  // namespace sketchpart::shape
