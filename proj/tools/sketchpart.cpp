// Command-line entry points: dataset generation, training, evaluation,
// inference, outline rendering, retrieval and serving.

#include <CLI11.hpp>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sketchpart/data/dataset.hpp"
#include "sketchpart/editing/session.hpp"
#include "sketchpart/errors.hpp"
#include "sketchpart/metrics/metrics.hpp"
#include "sketchpart/nn/checkpoint.hpp"
#include "sketchpart/service/server.hpp"
#include "sketchpart/train/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sketchpart;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << text;
}

void emit_json(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(out, j.dump(2) + "\n");
  }
}

model::SketchToParts load_sketch_model(const fs::path& path) {
  const auto ckpt = nn::load_checkpoint(path);
  return {model::model_config_from_json(ckpt.header.at("model_config")), ckpt.parameters};
}

// Meshes keyed by file stem, so an .obj prediction pairs with a .json reference.
std::vector<std::pair<std::string, shape::LabeledMesh>> load_mesh_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ArgumentError(dir.string() + " is not a directory");
  std::vector<std::pair<std::string, shape::LabeledMesh>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (ext == ".obj" || ext == ".json") out.emplace_back(entry.path().stem().string(), shape::load_mesh(entry.path()));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto dup = std::adjacent_find(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first == b.first; });
  if (dup != out.end()) throw ArgumentError("two meshes named " + dup->first + " in " + dir.string());
  return out;
}

struct TrainFlags {
  std::string config, dataset, out, sketch_checkpoint;
  std::int64_t epochs = 0, warmup = 0, max_steps = 0, cooldown_end = 0;
  std::size_t batch = 0;
  double lr_start = 0, lr_end = 0, cooldown_lr = 0;
  std::uint64_t seed = 0;
  bool augment = false, on_predictions = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool refiner) {
  cmd->add_option("--config", f.config, "JSON train config; flags override its values")->check(CLI::ExistingFile);
  cmd->add_option("--dataset", f.dataset, "Dataset directory (config key dataset_dir)");
  cmd->add_option("--out", f.out, "Output directory (config key out_dir)");
  cmd->add_option("--epochs", f.epochs, "Epochs (default 100)");
  cmd->add_option("--batch-size", f.batch, "Samples per step (default 16)");
  cmd->add_option("--lr-start", f.lr_start, "Warmup start rate (default 1e-7)");
  cmd->add_option("--lr-end", f.lr_end, "Warmup end rate (default 1e-6)");
  cmd->add_option("--warmup-epochs", f.warmup, "Warmup length (default: all epochs)");
  cmd->add_option("--cooldown-lr", f.cooldown_lr, "Rate reached at --cooldown-end (default: no cooldown)");
  cmd->add_option("--cooldown-end", f.cooldown_end, "Epoch where the cooldown ends");
  cmd->add_option("--max-steps", f.max_steps, "Optimizer step cap (default 0: none)");
  cmd->add_option("--seed", f.seed, "Seed (default 0)");
  if (refiner) {
    cmd->add_flag("--on-predictions", f.on_predictions, "Train on the sketch network's predicted latents");
    cmd->add_option("--sketch-checkpoint", f.sketch_checkpoint, "Sketch network for --on-predictions");
  } else {
    cmd->add_flag("--augment", f.augment, "Random sketch augmentation (default off)");
  }
}

train::TrainConfig resolve_train_config(CLI::App* cmd, const TrainFlags& f) {
  json j = f.config.empty() ? json::object() : read_json_file(f.config);
  auto given = [&](const char* flag) {
    const auto* opt = cmd->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  auto set = [&](const char* flag, const char* key, const json& value) {
    if (given(flag)) j[key] = value;
  };
  set("--dataset", "dataset_dir", f.dataset);
  set("--out", "out_dir", f.out);
  set("--epochs", "epochs", f.epochs);
  set("--batch-size", "batch_size", f.batch);
  set("--lr-start", "lr_start", f.lr_start);
  set("--lr-end", "lr_end", f.lr_end);
  set("--warmup-epochs", "warmup_epochs", f.warmup);
  set("--cooldown-lr", "cooldown_lr", f.cooldown_lr);
  set("--cooldown-end", "cooldown_end_epoch", f.cooldown_end);
  set("--max-steps", "max_steps", f.max_steps);
  set("--seed", "seed", f.seed);
  if (given("--augment")) j["augment"] = true;
  if (given("--on-predictions")) j["refiner_on_predictions"] = true;
  set("--sketch-checkpoint", "sketch_checkpoint", f.sketch_checkpoint);
  auto cfg = train::train_config_from_json(j);
  if (cfg.dataset_dir.empty() || cfg.out_dir.empty()) throw ConfigError("--dataset and --out are required");
  return cfg;
}

void print_epoch(const train::EpochLog& e) {
  std::cerr << "epoch " << e.epoch << " lr " << e.lr << " L_full " << e.loss_full << " L_cls " << e.loss_cls
            << " L_part " << e.loss_part << '\n';
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keep large autodiff buffers in the heap instead of fresh mappings.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"Part-aware sketch-to-shape modeling"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a procedural sketch/shape dataset");
  std::vector<std::string> classes{"chair"};
  data::DatasetConfig dcfg;
  std::string gen_out, gen_config;
  gen->add_option("--config", gen_config, "JSON dataset config; flags override")->check(CLI::ExistingFile);
  gen->add_option("--class", classes, "Shape classes: chair, table, lamp (default chair)");
  gen->add_option("--count", dcfg.count, "Shapes per class (default 32)");
  gen->add_option("--views", dcfg.views, "Views per shape (default 6)");
  gen->add_option("--partial-fraction", dcfg.samples.partial_fraction, "Partial outline probability (default 0.5)");
  gen->add_option("--seed", dcfg.seed, "Seed (default 0)");
  gen->add_flag("--shaded", dcfg.samples.shaded_renders, "Also emit shaded renders (default off)");
  gen->add_option("--out", gen_out, "Output directory")->required();

  TrainFlags tflags, rflags;
  auto* trn = app.add_subcommand("train", "Train the sketch-to-parts network");
  add_train_flags(trn, tflags, false);
  auto* rtrn = app.add_subcommand("train-refiner", "Train the refinement network");
  add_train_flags(rtrn, rflags, true);

  // eval
  auto* ev = app.add_subcommand("eval", "Score meshes or a checkpoint");
  std::string ev_pred, ev_ref, ev_model, ev_dataset, ev_out;
  std::size_t ev_points = 2000, ev_emd = 1000, ev_views = 20, ev_grid = 48;
  std::uint64_t ev_seed = 0;
  ev->add_option("--pred", ev_pred, "Directory of predicted meshes (.obj/.json)");
  ev->add_option("--ref", ev_ref, "Directory of reference meshes, matched by file name");
  ev->add_option("--model", ev_model, "Checkpoint to evaluate on --dataset instead");
  ev->add_option("--dataset", ev_dataset, "Dataset directory for --model");
  ev->add_option("--points", ev_points, "Surface samples per mesh (default 2000)");
  ev->add_option("--emd-points", ev_emd, "Samples used for EMD (default 1000)");
  ev->add_option("--views", ev_views, "Views for the Fréchet distance (default 20)");
  ev->add_option("--grid-res", ev_grid, "Mesh grid for --model (default 48)");
  ev->add_option("--seed", ev_seed, "Sampling seed (default 0)");
  ev->add_option("--out", ev_out, "Report path (default stdout)");

  // infer
  auto* inf = app.add_subcommand("infer", "Sketch to mesh");
  std::string inf_model, inf_sketch, inf_out, inf_report;
  std::size_t inf_grid = 48;
  inf->add_option("--model", inf_model, "Sketch network checkpoint")->required();
  inf->add_option("--sketch", inf_sketch, "Sketch PNG")->required();
  inf->add_option("--out", inf_out, "Mesh path (.obj or .json)")->required();
  inf->add_option("--report", inf_report, "Presence/completion JSON path");
  inf->add_option("--grid-res", inf_grid, "Marching-cubes cells per axis (default 48)");

  // outline
  auto* ol = app.add_subcommand("outline", "Render the outline sketch of a shape");
  std::string ol_parts, ol_class = "chair", ol_out;
  std::uint64_t ol_seed = 0;
  double ol_az = 0.0, ol_el = 20.0;
  ol->add_option("--parts", ol_parts, "JSON array of parts (default: a procedural shape)");
  ol->add_option("--class", ol_class, "Procedural class (default chair)");
  ol->add_option("--seed", ol_seed, "Procedural shape seed (default 0)");
  ol->add_option("--azimuth", ol_az, "Degrees (default 0)");
  ol->add_option("--elevation", ol_el, "Degrees (default 20)");
  ol->add_option("--out", ol_out, "Sketch PNG")->required();

  // retrieve
  auto* rt = app.add_subcommand("retrieve", "Nearest training shapes to a generated shape");
  std::string rt_model, rt_sketch, rt_dataset, rt_out;
  std::size_t rt_k = 5, rt_points = 2000, rt_grid = 48;
  std::uint64_t rt_seed = 0;
  rt->add_option("--model", rt_model, "Sketch network checkpoint")->required();
  rt->add_option("--sketch", rt_sketch, "Query sketch PNG")->required();
  rt->add_option("--dataset", rt_dataset, "Training dataset directory")->required();
  rt->add_option("--k", rt_k, "Neighbors (default 5)");
  rt->add_option("--points", rt_points, "Surface samples (default 2000)");
  rt->add_option("--grid-res", rt_grid, "Mesh grid (default 48)");
  rt->add_option("--seed", rt_seed, "Sampling seed (default 0)");
  rt->add_option("--out", rt_out, "JSON path (default: table only)");

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP editing service; SENS_* variables apply below flags");
  service::ServiceConfig scfg;
  std::string sv_bind, sv_model, sv_refiner;
  std::size_t sv_grid = 0;
  std::uint64_t sv_seed = 0;
  sv->add_option("--bind", sv_bind, "host:port (default 127.0.0.1:8080, env SENS_BIND)");
  sv->add_option("--model", sv_model, "Sketch network checkpoint (env SENS_MODEL)");
  sv->add_option("--refiner", sv_refiner, "Refiner checkpoint (env SENS_REFINER)");
  sv->add_option("--grid-res", sv_grid, "Mesh grid (default 48, env SENS_GRID_RES)");
  sv->add_option("--seed", sv_seed, "Session id seed (default 0, env SENS_SEED)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      if (!gen_config.empty()) {
        const auto flagged = dcfg;
        dcfg = data::dataset_config_from_json(read_json_file(gen_config));
        if (gen->count("--count")) dcfg.count = flagged.count;
        if (gen->count("--views")) dcfg.views = flagged.views;
        if (gen->count("--seed")) dcfg.seed = flagged.seed;
        if (gen->count("--partial-fraction")) dcfg.samples.partial_fraction = flagged.samples.partial_fraction;
        if (gen->count("--shaded")) dcfg.samples.shaded_renders = true;
        if (!gen->count("--class")) {
          classes.clear();
          for (auto c : dcfg.classes) classes.emplace_back(data::to_string(c));
        }
      }
      dcfg.classes.clear();
      for (const auto& c : classes) dcfg.classes.push_back(data::shape_class_from_string(c));
      if (dcfg.classes.size() > 1 && dcfg.samples.m < 12) dcfg.samples.m = 12;
      const auto samples = data::generate_dataset(dcfg);
      data::write_dataset(gen_out, samples, data::to_json(dcfg));
      std::cerr << "wrote " << samples.size() << " samples to " << gen_out << '\n';
    } else if (*trn) {
      const auto cfg = resolve_train_config(trn, tflags);
      const auto result = train::run_training(cfg, print_epoch);
      std::cerr << "steps " << result.steps << ", best score " << result.best_score << '\n';
    } else if (*rtrn) {
      const auto cfg = resolve_train_config(rtrn, rflags);
      const auto result = train::run_refiner_training(cfg, [](const train::EpochLog& e) {
        std::cerr << "epoch " << e.epoch << " lr " << e.lr << " L_refine " << e.loss_full << '\n';
      });
      std::cerr << "steps " << result.steps << '\n';
    } else if (*ev) {
      if (!ev_model.empty()) {
        if (ev_dataset.empty()) throw ConfigError("--model needs --dataset");
        const auto net = load_sketch_model(ev_model);
        const auto ds = data::read_dataset(ev_dataset);
        train::EvalOptions opts;
        opts.grid_res = ev_grid;
        opts.n_points = ev_points;
        opts.seed = ev_seed;
        emit_json(train::evaluate_epoch(net, ds.samples, opts).to_json(), ev_out);
      } else {
        if (ev_pred.empty() || ev_ref.empty()) throw ConfigError("eval needs --pred and --ref, or --model and --dataset");
        const auto pred = load_mesh_dir(ev_pred);
        const auto ref = load_mesh_dir(ev_ref);
        std::vector<shape::LabeledMesh> p, r;
        for (const auto& [name, mesh] : pred) {
          auto it = std::find_if(ref.begin(), ref.end(), [&](const auto& x) { return x.first == name; });
          if (it == ref.end()) throw ArgumentError("no reference mesh named " + name);
          p.push_back(mesh);
          r.push_back(it->second);
        }
        if (p.empty()) throw ArgumentError("no meshes in " + ev_pred);
        emit_json(metrics::score_pairs(p, r, ev_points, ev_seed, ev_emd, ev_views).to_json(), ev_out);
      }
    } else if (*inf) {
      const auto net = load_sketch_model(inf_model);
      const auto sketch = render::normalize_sketch(render::read_png(inf_sketch));
      const auto set = net.predict(sketch);
      std::vector<std::size_t> slots;
      const auto parts = shape::decode_present(set, 0.5, &slots);
      if (parts.empty()) throw EmptyShapeError("empty_shape: no part reached presence 0.5");
      auto mesh = shape::extract_mesh(parts, {inf_grid});
      for (auto& f : mesh.face_part) f = static_cast<std::uint32_t>(slots[f]);
      shape::save_mesh(inf_out, mesh);
      if (!inf_report.empty()) {
        const auto completed = model::flag_completed(set.c, 0.01);
        json parts_json = json::array();
        for (std::size_t i = 0; i < set.m; ++i) {
          parts_json.push_back({{"part", i}, {"presence", set.c[i]}, {"completed", static_cast<bool>(completed[i])}});
        }
        write_text(inf_report, json{{"completion", parts_json}}.dump(2) + "\n");
      }
    } else if (*ol) {
      std::vector<shape::PartPrimitive> parts;
      if (!ol_parts.empty()) {
        for (const auto& p : read_json_file(ol_parts)) parts.push_back(data::part_from_json(p));
      } else {
        parts = data::generate_shape(ol_seed, data::shape_class_from_string(ol_class)).parts;
      }
      render::Camera cam;
      cam.azimuth = ol_az * render::kDegree;
      cam.elevation = ol_el * render::kDegree;
      cam.validate();
      render::write_png(ol_out, render::render_outline(parts, cam));
    } else if (*rt) {
      const auto net = load_sketch_model(rt_model);
      const auto set = net.predict(render::normalize_sketch(render::read_png(rt_sketch)));
      const auto parts = shape::decode_present(set, 0.5);
      if (parts.empty()) throw EmptyShapeError("empty_shape: no part reached presence 0.5");
      const auto query = shape::extract_mesh(parts, {rt_grid});
      const auto ds = data::read_dataset(rt_dataset);
      std::vector<metrics::NamedMesh> candidates;
      for (const auto& s : ds.samples) {
        if (s.style == data::SketchStyle::partial) continue;
        if (std::any_of(candidates.begin(), candidates.end(), [&](const auto& c) { return c.id == s.id; })) continue;
        candidates.push_back({s.id, shape::extract_mesh(s.parts, {rt_grid})});
      }
      const auto hits = metrics::retrieval_topk(query, candidates, rt_k, rt_points, rt_seed);
      json table = json::array();
      std::cout << std::left << std::setw(6) << "rank" << std::setw(24) << "id" << "chamfer\n";
      for (std::size_t i = 0; i < hits.size(); ++i) {
        table.push_back({{"rank", i + 1}, {"id", hits[i].id}, {"cd", hits[i].cd}});
        std::cout << std::left << std::setw(6) << i + 1 << std::setw(24) << hits[i].id << std::setprecision(6)
                  << hits[i].cd << '\n';
      }
      if (!rt_out.empty()) emit_json({{"query", rt_sketch}, {"k", rt_k}, {"hits", table}}, rt_out);
    } else if (*sv) {
      scfg.apply_environment();
      if (sv->count("--bind")) scfg.bind = sv_bind;
      if (sv->count("--model")) scfg.model = sv_model;
      if (sv->count("--refiner")) scfg.refiner = sv_refiner;
      if (sv->count("--grid-res")) scfg.grid_res = sv_grid;
      if (sv->count("--seed")) scfg.seed = sv_seed;
      service::serve(scfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EmptySketchError& e) {
    std::cerr << "empty_sketch: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
