#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sketchpart/render/render.hpp"
#include "sketchpart/shape/primitive.hpp"

namespace sketchpart::data {

using shape::PartPrimitive;
using shape::PartSet;

enum class ShapeClass { chair, table, lamp };

std::string_view to_string(ShapeClass c);
/// Throws ConfigError for names outside {chair, table, lamp}.
ShapeClass shape_class_from_string(std::string_view name);

/// A procedural shape. parts[i] occupies latent slot slots[i].
struct ShapeRecord {
  std::string id;
  ShapeClass cls = ShapeClass::chair;
  std::vector<PartPrimitive> parts;
  std::vector<std::size_t> slots;

  PartSet part_set(std::size_t m, std::size_t d_model) const;
};

/// Slots used by each class. Chairs: seat 0, back 1, legs 2-5, arms 6-7.
/// Tables: top 0, legs 1-4. Lamps: base 0, pole 1, shade 2.
std::size_t slot_count(ShapeClass c);

/// Deterministic in (seed, class). Shapes are scaled to fit [-0.95, 0.95]^3.
/// Chairs have 3 or 4 legs and optional armrests (5-8 parts), tables a top
/// and four legs, lamps a base, a pole and a shade.
ShapeRecord generate_shape(std::uint64_t seed, ShapeClass cls);

enum class SketchStyle { outline, partial, abstract_substitute, expert, shaded };

std::string_view to_string(SketchStyle s);
SketchStyle sketch_style_from_string(std::string_view name);

/// One supervised example. `parts`/`slots` are the depicted parts, which
/// define `target`.
struct TrainSample {
  std::string id;
  ShapeClass cls = ShapeClass::chair;
  SketchStyle style = SketchStyle::outline;
  std::size_t view = 0;
  render::Sketch sketch;
  std::vector<PartPrimitive> parts;
  std::vector<std::size_t> slots;
  PartSet target;
};

struct SampleOptions {
  double partial_fraction = 0.5;
  /// Adds a Lambert-shaded render per view, cropped like its outline.
  bool shaded_renders = false;
  std::size_t m = 8;
  std::size_t d_model = 32;
  render::RenderOptions render;
};

/// Per view: a full outline, a partial outline with probability
/// partial_fraction (random non-empty strict subset of the parts), and an
/// abstract stand-in made by stroke dropout. Throws ArgumentError when
/// `views` is empty.
std::vector<TrainSample> build_samples(const ShapeRecord& record, std::span<const render::Camera> views,
                                       const SampleOptions& options, std::uint64_t seed);

struct DatasetConfig {
  std::vector<ShapeClass> classes{ShapeClass::chair};
  std::size_t count = 32;  // shapes per class
  std::uint64_t seed = 0;
  std::size_t views = 6;
  SampleOptions samples;
};

nlohmann::json to_json(const DatasetConfig& cfg);
/// Unknown keys are rejected.
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

/// Shape seeds derived from cfg.seed, one per (class, index).
std::vector<ShapeRecord> generate_shapes(const DatasetConfig& cfg);
std::vector<TrainSample> generate_dataset(const DatasetConfig& cfg);

struct Dataset {
  nlohmann::json manifest;
  std::vector<TrainSample> samples;
};

inline constexpr int kDatasetFormatVersion = 1;

/// dir/manifest.json, dir/sketches/<id>_<view>_<style>.png and
/// dir/targets.jsonl with one {"id","class","style","view","c","parts"}
/// object per line. `config` is echoed into the manifest.
void write_dataset(const std::filesystem::path& dir, std::span<const TrainSample> samples,
                   const nlohmann::json& config = nlohmann::json::object());

/// Throws ParseError naming the line of a corrupt target record.
Dataset read_dataset(const std::filesystem::path& dir);

nlohmann::json part_to_json(const PartPrimitive& p);
PartPrimitive part_from_json(const nlohmann::json& j);

}  // namespace sketchpart::data
