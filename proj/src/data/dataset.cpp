#include "sketchpart/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "sketchpart/errors.hpp"
#include "sketchpart/util/seed.hpp"

namespace sketchpart::data {
namespace {

using shape::PartKind;
using shape::Vec3;
using json = nlohmann::json;

constexpr double kFitExtent = 0.95;

class Builder {
 public:
  explicit Builder(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }

  void add(std::size_t slot, PartKind kind, Vec3 center, Vec3 half, double yaw = 0.0) {
    record_.parts.push_back({kind, center, half, yaw});
    record_.slots.push_back(slot);
  }

  // Recenters the bounding box on the origin and scales uniformly so the
  // largest half-range is kFitExtent.
  ShapeRecord finish(std::string id, ShapeClass cls) {
    Vec3 lo = Vec3::Constant(1e9), hi = Vec3::Constant(-1e9);
    for (const auto& p : record_.parts) {
      Vec3 a, b;
      shape::primitive_bounds(p, a, b);
      lo = lo.cwiseMin(a);
      hi = hi.cwiseMax(b);
    }
    const Vec3 mid = 0.5 * (lo + hi);
    const double s = kFitExtent / (0.5 * (hi - lo).maxCoeff());
    for (auto& p : record_.parts) {
      p.center = (p.center - mid) * s;
      p.half_extents *= s;
    }
    record_.id = std::move(id);
    record_.cls = cls;
    return std::move(record_);
  }

 private:
  std::mt19937_64 rng_;
  ShapeRecord record_;
};

PartKind leg_kind(Builder& b) { return b.chance(0.6) ? PartKind::cylinder : PartKind::box; }

ShapeRecord make_chair(std::uint64_t seed) {
  Builder b(seed);
  const double leg_h = b.uniform(0.30, 0.50), leg_w = b.uniform(0.035, 0.06);
  const double sx = b.uniform(0.40, 0.60), sy = b.uniform(0.04, 0.08), sz = b.uniform(0.40, 0.60);
  const double back_h = b.uniform(0.30, 0.55), back_t = b.uniform(0.035, 0.06);
  const PartKind legs = leg_kind(b);
  const bool three_legs = b.chance(0.25);
  const bool arms = b.chance(0.5);
  const double seat_y = 2.0 * leg_h + sy;
  b.add(0, PartKind::box, {0, seat_y, 0}, {sx, sy, sz});
  b.add(1, PartKind::box, {0, seat_y + sy + back_h, -(sz - back_t)}, {sx, back_h, back_t});
  const double lx = sx - leg_w, lz = sz - leg_w;
  b.add(2, legs, {lx, leg_h, lz}, {leg_w, leg_h, leg_w});
  b.add(3, legs, {-lx, leg_h, lz}, {leg_w, leg_h, leg_w});
  if (three_legs) {
    b.add(4, legs, {0, leg_h, -lz}, {leg_w, leg_h, leg_w});
  } else {
    b.add(4, legs, {lx, leg_h, -lz}, {leg_w, leg_h, leg_w});
    b.add(5, legs, {-lx, leg_h, -lz}, {leg_w, leg_h, leg_w});
  }
  if (arms) {
    const double aw = b.uniform(0.035, 0.05), ah = b.uniform(0.10, 0.18), az = sz * b.uniform(0.7, 0.9);
    const double ay = seat_y + sy + ah;
    b.add(6, PartKind::box, {sx - aw, ay, sz - az}, {aw, ah, az});
    b.add(7, PartKind::box, {-(sx - aw), ay, sz - az}, {aw, ah, az});
  }
  return b.finish("chair_" + std::to_string(seed), ShapeClass::chair);
}

ShapeRecord make_table(std::uint64_t seed) {
  Builder b(seed);
  const double leg_h = b.uniform(0.35, 0.50), leg_w = b.uniform(0.04, 0.07);
  const double tx = b.uniform(0.60, 0.90), ty = b.uniform(0.03, 0.06), tz = b.uniform(0.40, 0.70);
  const double inset = b.uniform(0.0, 0.10);
  const PartKind legs = leg_kind(b);
  b.add(0, PartKind::box, {0, 2.0 * leg_h + ty, 0}, {tx, ty, tz});
  const double lx = tx - leg_w - inset, lz = tz - leg_w - inset;
  b.add(1, legs, {lx, leg_h, lz}, {leg_w, leg_h, leg_w});
  b.add(2, legs, {-lx, leg_h, lz}, {leg_w, leg_h, leg_w});
  b.add(3, legs, {lx, leg_h, -lz}, {leg_w, leg_h, leg_w});
  b.add(4, legs, {-lx, leg_h, -lz}, {leg_w, leg_h, leg_w});
  return b.finish("table_" + std::to_string(seed), ShapeClass::table);
}

ShapeRecord make_lamp(std::uint64_t seed) {
  Builder b(seed);
  const double base_r = b.uniform(0.20, 0.35), base_h = b.uniform(0.03, 0.06);
  const double pole_r = b.uniform(0.025, 0.04), pole_h = b.uniform(0.40, 0.70);
  const double shade_x = b.uniform(0.25, 0.40), shade_y = b.uniform(0.15, 0.30), shade_z = b.uniform(0.20, 0.40);
  const double shade_yaw = b.uniform(-std::numbers::pi, std::numbers::pi);
  b.add(0, PartKind::cylinder, {0, base_h, 0}, {base_r, base_h, base_r});
  b.add(1, PartKind::cylinder, {0, 2.0 * base_h + pole_h, 0}, {pole_r, pole_h, pole_r});
  b.add(2, PartKind::ellipsoid, {0, 2.0 * base_h + 2.0 * pole_h + 0.6 * shade_y, 0}, {shade_x, shade_y, shade_z}, shade_yaw);
  return b.finish("lamp_" + std::to_string(seed), ShapeClass::lamp);
}

double number(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_number()) throw ParseError(std::string("missing numeric field '") + key + "'", line);
  return j[key].get<double>();
}

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ArgumentError("expected a 3-vector");
  for (const auto& v : j) {
    if (!v.is_number()) throw ArgumentError("expected a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string sketch_name(const TrainSample& s) {
  return s.id + "_" + std::to_string(s.view) + "_" + std::string(to_string(s.style)) + ".png";
}

}  // namespace

std::string_view to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::chair: return "chair";
    case ShapeClass::table: return "table";
    case ShapeClass::lamp: return "lamp";
  }
  return "chair";
}

ShapeClass shape_class_from_string(std::string_view name) {
  if (name == "chair") return ShapeClass::chair;
  if (name == "table") return ShapeClass::table;
  if (name == "lamp") return ShapeClass::lamp;
  throw ConfigError("unsupported shape class '" + std::string(name) + "'");
}

std::string_view to_string(SketchStyle s) {
  switch (s) {
    case SketchStyle::outline: return "outline";
    case SketchStyle::partial: return "partial";
    case SketchStyle::abstract_substitute: return "abstract";
    case SketchStyle::expert: return "expert";
    case SketchStyle::shaded: return "shaded";
  }
  return "outline";
}

SketchStyle sketch_style_from_string(std::string_view name) {
  if (name == "outline") return SketchStyle::outline;
  if (name == "partial") return SketchStyle::partial;
  if (name == "abstract") return SketchStyle::abstract_substitute;
  if (name == "expert") return SketchStyle::expert;
  if (name == "shaded") return SketchStyle::shaded;
  throw ArgumentError("unknown sketch style '" + std::string(name) + "'");
}

PartSet ShapeRecord::part_set(std::size_t m, std::size_t d_model) const {
  return shape::make_part_set(parts, slots, m, d_model);
}

std::size_t slot_count(ShapeClass c) {
  switch (c) {
    case ShapeClass::chair: return 8;
    case ShapeClass::table: return 5;
    case ShapeClass::lamp: return 3;
  }
  return 8;
}

ShapeRecord generate_shape(std::uint64_t seed, ShapeClass cls) {
  switch (cls) {
    case ShapeClass::chair: return make_chair(seed);
    case ShapeClass::table: return make_table(seed);
    case ShapeClass::lamp: return make_lamp(seed);
  }
  throw ConfigError("unsupported shape class");
}

std::vector<TrainSample> build_samples(const ShapeRecord& record, std::span<const render::Camera> views,
                                       const SampleOptions& options, std::uint64_t seed) {
  if (views.empty()) throw ArgumentError("build_samples: no views");
  if (!(options.partial_fraction >= 0.0 && options.partial_fraction <= 1.0)) {
    throw ConfigError("partial_fraction must lie in [0, 1]");
  }
  const PartSet full_target = record.part_set(options.m, options.d_model);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TrainSample> out;
  for (std::size_t v = 0; v < views.size(); ++v) {
    TrainSample full{record.id, record.cls, SketchStyle::outline, v, {}, record.parts, record.slots, full_target};
    full.sketch = render::quantize8(render::render_outline(record.parts, views[v], options.render));

    const bool want_partial = record.parts.size() >= 2 && unit(rng) < options.partial_fraction;
    const std::uint64_t partial_seed = rng();
    const std::uint64_t abstract_seed = rng();

    TrainSample abstract = full;
    abstract.style = SketchStyle::abstract_substitute;
    abstract.sketch = render::quantize8(render::abstract_sketch(full.sketch, abstract_seed));
    out.push_back(std::move(full));

    if (want_partial) {
      // A hidden subset renders no ink; retry a few subsets before giving up.
      std::mt19937_64 prng(partial_seed);
      const std::size_t n = record.parts.size();
      for (int attempt = 0; attempt < 8; ++attempt) {
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n - 1)(prng);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), prng);
        std::vector<bool> flags(n, false);
        for (std::size_t i = 0; i < k; ++i) flags[order[i]] = true;
        render::Sketch sketch = render::quantize8(render::render_partial(record.parts, flags, views[v], options.render));
        if (render::ink_count(sketch) == 0) continue;
        TrainSample partial{record.id, record.cls, SketchStyle::partial, v, std::move(sketch), {}, {}, {}};
        for (std::size_t i = 0; i < n; ++i) {
          if (!flags[i]) continue;
          partial.parts.push_back(record.parts[i]);
          partial.slots.push_back(record.slots[i]);
        }
        partial.target = shape::make_part_set(partial.parts, partial.slots, options.m, options.d_model);
        out.push_back(std::move(partial));
        break;
      }
    }
    out.push_back(std::move(abstract));

    if (options.shaded_renders) {
      const auto& cam = views[v];
      const auto crop = render::ink_crop(render::extract_outline(render::render_depth(record.parts, cam, options.render.res),
                                                                 options.render.outline));
      TrainSample shaded{record.id, record.cls, SketchStyle::shaded, v, {}, record.parts, record.slots, full_target};
      shaded.sketch = render::quantize8(render::apply_crop(render::render_shaded(record.parts, cam, options.render.res), crop));
      out.push_back(std::move(shaded));
    }
  }
  return out;
}

json to_json(const DatasetConfig& cfg) {
  json classes = json::array();
  for (auto c : cfg.classes) classes.push_back(std::string(to_string(c)));
  return {{"classes", classes},
          {"count", cfg.count},
          {"seed", cfg.seed},
          {"views", cfg.views},
          {"partial_fraction", cfg.samples.partial_fraction},
          {"shaded_renders", cfg.samples.shaded_renders},
          {"m", cfg.samples.m},
          {"d_model", cfg.samples.d_model},
          {"render_res", cfg.samples.render.res},
          {"blur_sigma", cfg.samples.render.outline.blur_sigma},
          {"canny_low", cfg.samples.render.outline.canny_low},
          {"canny_high", cfg.samples.render.outline.canny_high}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("dataset config must be a JSON object");
  DatasetConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "classes") {
        cfg.classes.clear();
        for (const auto& c : value) cfg.classes.push_back(shape_class_from_string(c.get<std::string>()));
      } else if (key == "count") {
        cfg.count = value.get<std::size_t>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "views") {
        cfg.views = value.get<std::size_t>();
      } else if (key == "partial_fraction") {
        cfg.samples.partial_fraction = value.get<double>();
      } else if (key == "shaded_renders") {
        cfg.samples.shaded_renders = value.get<bool>();
      } else if (key == "m") {
        cfg.samples.m = value.get<std::size_t>();
      } else if (key == "d_model") {
        cfg.samples.d_model = value.get<std::size_t>();
      } else if (key == "render_res") {
        cfg.samples.render.res = value.get<std::size_t>();
      } else if (key == "blur_sigma") {
        cfg.samples.render.outline.blur_sigma = value.get<double>();
      } else if (key == "canny_low") {
        cfg.samples.render.outline.canny_low = value.get<double>();
      } else if (key == "canny_high") {
        cfg.samples.render.outline.canny_high = value.get<double>();
      } else {
        throw ConfigError("unknown dataset config key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError("dataset config key '" + key + "': " + e.what());
    }
  }
  if (cfg.classes.empty()) throw ConfigError("dataset config: no classes");
  if (cfg.views == 0) throw ConfigError("dataset config: views must be positive");
  return cfg;
}

std::vector<ShapeRecord> generate_shapes(const DatasetConfig& cfg) {
  std::vector<ShapeRecord> shapes;
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    if (slot_count(cfg.classes[c]) > cfg.samples.m) {
      throw ConfigError(std::string(to_string(cfg.classes[c])) + " needs m >= " + std::to_string(slot_count(cfg.classes[c])));
    }
    for (std::size_t i = 0; i < cfg.count; ++i) {
      const std::uint64_t seed = mix_seed(cfg.seed, c * 1000003ULL + i) % 1000000000ULL;
      shapes.push_back(generate_shape(seed, cfg.classes[c]));
    }
  }
  return shapes;
}

std::vector<TrainSample> generate_dataset(const DatasetConfig& cfg) {
  const auto views = render::default_views(cfg.views);
  std::vector<TrainSample> samples;
  const auto shapes = generate_shapes(cfg);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto batch = build_samples(shapes[i], views, cfg.samples, mix_seed(cfg.seed ^ 0x5A5A5A5AULL, i));
    std::move(batch.begin(), batch.end(), std::back_inserter(samples));
  }
  return samples;
}

json part_to_json(const PartPrimitive& p) {
  return {{"kind", std::string(shape::to_string(p.kind))},
          {"center", {p.center.x(), p.center.y(), p.center.z()}},
          {"half_extents", {p.half_extents.x(), p.half_extents.y(), p.half_extents.z()}},
          {"yaw", p.yaw}};
}

PartPrimitive part_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("part must be an object");
  PartPrimitive p;
  p.kind = shape::part_kind_from_string(j.at("kind").get<std::string>());
  p.center = vec3(j.at("center"));
  p.half_extents = vec3(j.at("half_extents"));
  p.yaw = j.at("yaw").get<double>();
  return p;
}

void write_dataset(const std::filesystem::path& dir, std::span<const TrainSample> samples, const json& config) {
  std::filesystem::create_directories(dir / "sketches");
  std::size_t m = 0, d_model = 0;
  if (!samples.empty()) {
    m = samples.front().target.m;
    d_model = samples.front().target.d_model;
  }
  std::ofstream targets(dir / "targets.jsonl");
  if (!targets) throw ArgumentError("cannot write " + (dir / "targets.jsonl").string());
  json shapes = json::array();
  for (const auto& s : samples) {
    if (s.target.m != m || s.target.d_model != d_model) throw ArgumentError("write_dataset: samples disagree on m/d_model");
    render::write_png(dir / "sketches" / sketch_name(s), s.sketch);
    json parts = json::array();
    for (const auto& p : s.parts) parts.push_back(part_to_json(p));
    json record = {{"id", s.id},          {"class", std::string(to_string(s.cls))},
                   {"style", std::string(to_string(s.style))},
                   {"view", s.view},      {"c", s.target.c},
                   {"parts", parts}};
    targets << record.dump() << '\n';
    if (shapes.empty() || shapes.back() != s.id) shapes.push_back(s.id);
  }
  json manifest = {{"format_version", kDatasetFormatVersion},
                   {"samples", samples.size()},
                   {"shapes", shapes.size()},
                   {"m", m},
                   {"d_model", d_model},
                   {"config", config}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ArgumentError("missing " + (dir / "manifest.json").string());
    try {
      ds.manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(std::string("manifest.json: ") + e.what());
    }
  }
  if (ds.manifest.value("format_version", 0) != kDatasetFormatVersion) throw ParseError("manifest.json: unsupported format_version");
  const auto d_model = ds.manifest.at("d_model").get<std::size_t>();
  const auto m_expected = ds.manifest.at("m").get<std::size_t>();

  std::ifstream in(dir / "targets.jsonl");
  if (!in) throw ArgumentError("missing " + (dir / "targets.jsonl").string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TrainSample s;
    try {
      const json j = json::parse(line);
      s.id = j.at("id").get<std::string>();
      s.cls = shape_class_from_string(j.at("class").get<std::string>());
      s.style = sketch_style_from_string(j.at("style").get<std::string>());
      s.view = static_cast<std::size_t>(number(j, "view", line_no));
      const auto c = j.at("c").get<std::vector<double>>();
      if (c.size() != m_expected) throw ParseError("c has " + std::to_string(c.size()) + " entries, manifest m is " + std::to_string(m_expected), line_no);
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i] == 1.0) s.slots.push_back(i);
        else if (c[i] != 0.0) throw ParseError("c entries must be 0 or 1", line_no);
      }
      const auto& parts = j.at("parts");
      if (!parts.is_array() || parts.size() != s.slots.size()) throw ParseError("parts do not match c", line_no);
      for (const auto& p : parts) s.parts.push_back(part_from_json(p));
      s.target = shape::make_part_set(s.parts, s.slots, m_expected, d_model);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(std::string("targets.jsonl: ") + e.what(), line_no);
    }
    const auto png = dir / "sketches" / sketch_name(s);
    s.sketch = render::read_png(png);
    ds.samples.push_back(std::move(s));
  }
  if (ds.manifest.contains("samples") && ds.manifest["samples"].get<std::size_t>() != ds.samples.size()) {
    throw ParseError("targets.jsonl: expected " + std::to_string(ds.manifest["samples"].get<std::size_t>()) +
                         " records, found " + std::to_string(ds.samples.size()),
                     line_no + 1);
  }
  return ds;
}

}  // namespace sketchpart::data
