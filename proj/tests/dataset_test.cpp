#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "sketchpart/data/dataset.hpp"
#include "sketchpart/errors.hpp"
#include "test_support.hpp"

using namespace sketchpart;
using namespace sketchpart::data;

namespace {

double max_abs_coordinate(const std::vector<shape::PartPrimitive>& parts) {
  double worst = 0.0;
  for (const auto& p : parts) {
    shape::Vec3 lo, hi;
    shape::primitive_bounds(p, lo, hi);
    worst = std::max({worst, lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff()});
  }
  return worst;
}

std::vector<render::Camera> two_views() {
  auto all = render::default_views();
  return {all[0], all[2]};
}

}  // namespace

TEST(ShapeClassTest, NamesRoundTrip) {
  for (auto c : {ShapeClass::chair, ShapeClass::table, ShapeClass::lamp}) {
    EXPECT_EQ(shape_class_from_string(to_string(c)), c);
  }
  EXPECT_THROW(shape_class_from_string("airplane"), ConfigError);
  EXPECT_EQ(sketch_style_from_string("abstract"), SketchStyle::abstract_substitute);
}

TEST(Generate, Deterministic) {
  const auto a = generate_shape(17, ShapeClass::chair);
  const auto b = generate_shape(17, ShapeClass::chair);
  EXPECT_EQ(a.id, b.id);
  ASSERT_EQ(a.parts.size(), b.parts.size());
  for (std::size_t i = 0; i < a.parts.size(); ++i) EXPECT_TRUE(shape::same_primitive(a.parts[i], b.parts[i], 0.0));
  EXPECT_EQ(a.slots, b.slots);
}

TEST(Generate, ClassPartCounts) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto chair = generate_shape(seed, ShapeClass::chair);
    EXPECT_GE(chair.parts.size(), 5u);
    EXPECT_LE(chair.parts.size(), 8u);
    EXPECT_EQ(generate_shape(seed, ShapeClass::table).parts.size(), 5u);
    EXPECT_EQ(generate_shape(seed, ShapeClass::lamp).parts.size(), 3u);
  }
}

TEST(Generate, ThousandSeedsFitUnitCube) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (auto cls : {ShapeClass::chair, ShapeClass::table, ShapeClass::lamp}) {
      ASSERT_LE(max_abs_coordinate(generate_shape(seed, cls).parts), 1.0) << "seed " << seed;
    }
  }
}

TEST(Generate, SlotsDistinctAndInRange) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (auto cls : {ShapeClass::chair, ShapeClass::table, ShapeClass::lamp}) {
      const auto r = generate_shape(seed, cls);
      std::set<std::size_t> seen(r.slots.begin(), r.slots.end());
      EXPECT_EQ(seen.size(), r.slots.size());
      for (auto s : r.slots) EXPECT_LT(s, slot_count(cls));
    }
  }
}

TEST(Generate, PartSetMatchesEncoding) {
  const auto r = generate_shape(4, ShapeClass::chair);
  const auto set = r.part_set(8, 32);
  EXPECT_EQ(set.present_count(), r.parts.size());
  std::vector<bool> used(8, false);
  for (std::size_t i = 0; i < r.parts.size(); ++i) {
    used[r.slots[i]] = true;
    const auto row = set.row(r.slots[i]);
    const auto enc = shape::encode_part(r.parts[i], 32);
    for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(row[j], enc[j]);
    EXPECT_TRUE(shape::same_primitive(shape::decode_part(row), r.parts[i], 1e-12));
  }
  for (std::size_t s = 0; s < 8; ++s) {
    if (used[s]) continue;
    EXPECT_EQ(set.c[s], 0.0);
    for (double v : set.row(s)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Generate, PureFunctionOfConfig) {
  DatasetConfig cfg;
  cfg.count = 6;
  cfg.seed = 3;
  const auto a = generate_shapes(cfg);
  const auto b = generate_shapes(cfg);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].part_set(8, 32).z, b[i].part_set(8, 32).z);
  cfg.seed = 4;
  EXPECT_NE(generate_shapes(cfg)[0].part_set(8, 32).z, a[0].part_set(8, 32).z);
}

TEST(Samples, NoPartialGivesTwoPerView) {
  const auto r = generate_shape(1, ShapeClass::chair);
  SampleOptions opts;
  opts.partial_fraction = 0.0;
  const auto views = two_views();
  const auto samples = build_samples(r, views, opts, 9);
  ASSERT_EQ(samples.size(), 4u);
  for (const auto& s : samples) {
    EXPECT_NE(s.style, SketchStyle::partial);
    EXPECT_TRUE(render::is_sketch(s.sketch));
  }
  EXPECT_THROW(build_samples(r, std::span<const render::Camera>{}, opts, 9), ArgumentError);
}

TEST(Samples, PartialTargetIsStrictSubset) {
  SampleOptions opts;
  opts.partial_fraction = 1.0;
  const auto views = two_views();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto r = generate_shape(seed, ShapeClass::chair);
    const auto full = r.part_set(8, 32);
    const auto samples = build_samples(r, views, opts, seed);
    std::size_t partials = 0;
    for (const auto& s : samples) {
      if (s.style != SketchStyle::partial) continue;
      ++partials;
      const auto k = s.target.present_count();
      EXPECT_GE(k, 1u);
      EXPECT_LT(k, full.present_count());
      for (std::size_t i = 0; i < 8; ++i) {
        if (s.target.c[i] > 0.5) {
          EXPECT_EQ(full.c[i], 1.0);
          for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(s.target.row(i)[j], full.row(i)[j]);
        } else {
          for (double v : s.target.row(i)) EXPECT_EQ(v, 0.0);
        }
      }
    }
    EXPECT_EQ(partials, views.size());
  }
}

TEST(Samples, PartialMatchesItsPartsAndStaysInsideFullBox) {
  SampleOptions opts;
  opts.partial_fraction = 1.0;
  const auto views = two_views();
  const auto r = generate_shape(11, ShapeClass::chair);
  const auto samples = build_samples(r, views, opts, 2);
  for (std::size_t v = 0; v < views.size(); ++v) {
    const TrainSample* full = nullptr;
    const TrainSample* partial = nullptr;
    for (const auto& s : samples) {
      if (s.view != v) continue;
      if (s.style == SketchStyle::outline) full = &s;
      if (s.style == SketchStyle::partial) partial = &s;
    }
    ASSERT_TRUE(full && partial);
    std::vector<bool> flags(r.slots.size(), false);
    for (auto slot : partial->slots) {
      const auto it = std::find(r.slots.begin(), r.slots.end(), slot);
      ASSERT_NE(it, r.slots.end());
      flags[static_cast<std::size_t>(it - r.slots.begin())] = true;
    }
    EXPECT_EQ(partial->sketch, render::quantize8(render::render_partial(r.parts, flags, views[v], opts.render)));

    // Removing parts can expose hidden edges, but never ink beyond the full silhouette's box.
    const auto& f = full->sketch;
    std::size_t x0 = f.width, y0 = f.height, x1 = 0, y1 = 0;
    for (std::size_t y = 0; y < f.height; ++y)
      for (std::size_t x = 0; x < f.width; ++x)
        if (f.at(x, y) < render::kInkThreshold) {
          x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    const auto& p = partial->sketch;
    std::size_t outside = 0;
    for (std::size_t y = 0; y < p.height; ++y)
      for (std::size_t x = 0; x < p.width; ++x)
        outside += p.at(x, y) < render::kInkThreshold && (x + 3 < x0 || x > x1 + 3 || y + 3 < y0 || y > y1 + 3);
    EXPECT_EQ(outside, 0u);
  }
}

TEST(Samples, ShadedRendersAreOptIn) {
  const auto views = two_views();
  const auto r = generate_shape(4, ShapeClass::chair);
  SampleOptions opts;
  opts.partial_fraction = 0.0;
  for (const auto& s : build_samples(r, views, opts, 1)) EXPECT_NE(s.style, SketchStyle::shaded);
  opts.shaded_renders = true;
  const auto samples = build_samples(r, views, opts, 1);
  ASSERT_EQ(samples.size(), 3 * views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    const TrainSample* outline = nullptr;
    const TrainSample* shaded = nullptr;
    for (const auto& s : samples) {
      if (s.view != v) continue;
      if (s.style == SketchStyle::outline) outline = &s;
      if (s.style == SketchStyle::shaded) shaded = &s;
    }
    ASSERT_TRUE(outline && shaded);
    EXPECT_EQ(shaded->target.z, outline->target.z);
    EXPECT_EQ(shaded->sketch.width, 256u);
    EXPECT_NE(shaded->sketch, outline->sketch);
    // Same crop: the shaded silhouette sits where the outline ink is.
    std::size_t covered = 0, ink = 0;
    for (std::size_t i = 0; i < outline->sketch.pixels.size(); ++i) {
      if (outline->sketch.pixels[i] >= render::kInkThreshold) continue;
      ++ink;
      const std::size_t x = i % 256, y = i / 256;
      bool near = false;
      for (std::size_t yy = y > 2 ? y - 2 : 0; yy <= std::min<std::size_t>(255, y + 2) && !near; ++yy)
        for (std::size_t xx = x > 2 ? x - 2 : 0; xx <= std::min<std::size_t>(255, x + 2) && !near; ++xx)
          near = shaded->sketch.at(xx, yy) < 0.999;
      covered += near;
    }
    EXPECT_GT(covered, ink * 95 / 100);
  }
  EXPECT_EQ(sketch_style_from_string("shaded"), SketchStyle::shaded);
}

TEST(ConfigJson, RoundTripAndUnknownKeys) {
  DatasetConfig cfg;
  cfg.classes = {ShapeClass::table, ShapeClass::lamp};
  cfg.count = 5;
  cfg.views = 3;
  cfg.samples.partial_fraction = 0.25;
  const auto back = dataset_config_from_json(to_json(cfg));
  EXPECT_EQ(back.classes, cfg.classes);
  EXPECT_EQ(back.count, 5u);
  EXPECT_EQ(back.views, 3u);
  EXPECT_EQ(back.samples.partial_fraction, 0.25);
  EXPECT_FALSE(back.samples.shaded_renders);
  cfg.samples.shaded_renders = true;
  EXPECT_TRUE(dataset_config_from_json(to_json(cfg)).samples.shaded_renders);
  auto j = to_json(cfg);
  j["colour"] = "red";
  EXPECT_THROW(dataset_config_from_json(j), ConfigError);
}

TEST(DatasetIo, RoundTripIsLossless) {
  DatasetConfig cfg;
  cfg.count = 9;
  cfg.views = 2;
  cfg.seed = 5;
  auto samples = generate_dataset(cfg);
  ASSERT_GE(samples.size(), 36u);
  const auto dir = testing_support::scratch_dir("dataset_io");
  write_dataset(dir, samples, to_json(cfg));
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "targets.jsonl"));
  const auto ds = read_dataset(dir);
  EXPECT_EQ(ds.manifest.at("format_version"), kDatasetFormatVersion);
  ASSERT_EQ(ds.samples.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(ds.samples[i].id, samples[i].id);
    EXPECT_EQ(ds.samples[i].style, samples[i].style);
    EXPECT_EQ(ds.samples[i].view, samples[i].view);
    EXPECT_EQ(ds.samples[i].target.z, samples[i].target.z);
    EXPECT_EQ(ds.samples[i].target.c, samples[i].target.c);
    EXPECT_EQ(render::max_abs_diff(ds.samples[i].sketch, samples[i].sketch), 0.0);
  }
}

TEST(DatasetIo, RecordFieldNames) {
  DatasetConfig cfg;
  cfg.count = 1;
  cfg.views = 1;
  const auto dir = testing_support::scratch_dir("dataset_fields");
  write_dataset(dir, generate_dataset(cfg));
  std::ifstream in(dir / "targets.jsonl");
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  for (const char* key : {"id", "class", "style", "view", "c", "parts"}) EXPECT_TRUE(j.contains(key)) << key;
  ASSERT_FALSE(j["parts"].empty());
  for (const char* key : {"kind", "center", "half_extents", "yaw"}) EXPECT_TRUE(j["parts"][0].contains(key)) << key;
}

TEST(DatasetIo, CorruptLineNamed) {
  DatasetConfig cfg;
  cfg.count = 2;
  cfg.views = 1;
  const auto dir = testing_support::scratch_dir("dataset_corrupt");
  write_dataset(dir, generate_dataset(cfg));
  std::ifstream in(dir / "targets.jsonl");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  in.close();
  ASSERT_GE(lines.size(), 3u);
  lines[2] = lines[2].substr(0, lines[2].size() / 2);
  std::ofstream out(dir / "targets.jsonl", std::ios::trunc);
  for (const auto& l : lines) out << l << "\n";
  out.close();
  try {
    read_dataset(dir);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(PartJson, RoundTrip) {
  std::mt19937_64 rng(3);
  for (const auto& p : testing_support::random_parts(rng, 20, true)) {
    EXPECT_TRUE(shape::same_primitive(part_from_json(part_to_json(p)), p, 0.0));
  }
  EXPECT_ANY_THROW(part_from_json(nlohmann::json{{"kind", "cone"}}));
}
