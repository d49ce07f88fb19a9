#include "sketchpart/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "sketchpart/errors.hpp"
#include "sketchpart/metrics/metrics.hpp"
#include "sketchpart/model/losses.hpp"
#include "sketchpart/nn/checkpoint.hpp"
#include "sketchpart/shape/mesh.hpp"
#include "sketchpart/util/seed.hpp"

namespace sketchpart::train {
namespace {

using data::SketchStyle;
using data::TrainSample;
using json = nlohmann::json;

nn::Tensor latent_tensor(const shape::PartSet& set) { return nn::Tensor({set.m, set.d_model}, set.z); }

void check_samples(const model::ModelConfig& cfg, std::span<const TrainSample> samples, const char* what) {
  for (const auto& s : samples) {
    if (s.target.m != cfg.m || s.target.d_model != cfg.d_model) {
      throw ConfigError(std::string(what) + ": sample " + s.id + " has m=" + std::to_string(s.target.m) +
                        ", d_model=" + std::to_string(s.target.d_model) + " but the model expects m=" +
                        std::to_string(cfg.m) + ", d_model=" + std::to_string(cfg.d_model));
    }
  }
}

struct SampleLosses {
  double full = 0.0, cls = 0.0, part = 0.0, objective = 0.0;
};

// Forward and backward of one sample; gradients are added to `acc` with
// weight `scale`.
SampleLosses sample_step(const model::SketchToParts& net, const TrainSample& s, const render::Sketch& sketch,
                         nn::Gradients& acc, double scale) {
  nn::Binding params(net.parameters(), true);
  auto out = net.forward(params, sketch);
  const nn::Tensor target = latent_tensor(s.target);
  SampleLosses l;
  auto cls = model::loss_cls(out.c, s.target.c);
  l.cls = cls.item();
  nn::Tensor objective;
  if (s.style == SketchStyle::partial) {
    auto part = model::loss_part(out.z, target, s.target.c);
    l.part = part.item();
    objective = nn::add(part, cls);
  } else {
    auto full = model::loss_full(out.z, target);
    l.full = full.item();
    objective = nn::add(full, cls);
  }
  l.objective = objective.item();
  objective.backward();
  nn::accumulate(acc, params.gradients(), scale);
  return l;
}

double mean_loss_full(const model::SketchToParts& net, std::span<const TrainSample> samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) {
    nn::Binding params(net.parameters(), false);
    auto out = net.forward(params, s.sketch);
    total += model::loss_full(out.z, latent_tensor(s.target)).item();
  }
  return total / static_cast<double>(samples.size());
}

template <class T>
T get(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(0.0 < mask_lo && mask_lo < mask_hi && mask_hi < 1.0)) throw ConfigError("mask range must satisfy 0 < lo < hi < 1");
  if (!(partial_fraction >= 0.0 && partial_fraction <= 1.0)) throw ConfigError("partial_fraction must lie in [0, 1]");
  if (max_steps < 0 || eval_every < 0) throw ConfigError("max_steps and eval_every must be non-negative");
  resolved_schedule().validate();
  model.validate();
}

nn::LrSchedule TrainConfig::resolved_schedule() const {
  nn::LrSchedule s = schedule;
  if (s.warmup_epochs == 0) s.warmup_epochs = std::max<std::int64_t>(1, epochs);
  return s;
}

json to_json(const TrainConfig& cfg) {
  json j = {{"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"lr_start", cfg.schedule.lr_start},
            {"lr_end", cfg.schedule.lr_end},
            {"warmup_epochs", cfg.schedule.warmup_epochs},
            {"seed", cfg.seed},
            {"dataset_dir", cfg.dataset_dir.string()},
            {"out_dir", cfg.out_dir.string()},
            {"partial_fraction", cfg.partial_fraction},
            {"model", model::to_json(cfg.model)},
            {"mask_range", {cfg.mask_lo, cfg.mask_hi}},
            {"max_steps", cfg.max_steps},
            {"augment", cfg.augment},
            {"eval_every", cfg.eval_every},
            {"refiner_on_predictions", cfg.refiner_on_predictions},
            {"sketch_checkpoint", cfg.sketch_checkpoint.string()}};
  if (cfg.schedule.cooldown) {
    j["cooldown_lr"] = cfg.schedule.cooldown->lr_final;
    j["cooldown_end_epoch"] = cfg.schedule.cooldown->end_epoch;
  }
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig cfg;
  std::optional<double> cooldown_lr;
  std::optional<std::int64_t> cooldown_end;
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") cfg.epochs = get<std::int64_t>(value, key);
    else if (key == "batch_size") cfg.batch_size = get<std::size_t>(value, key);
    else if (key == "lr_start") cfg.schedule.lr_start = get<double>(value, key);
    else if (key == "lr_end") cfg.schedule.lr_end = get<double>(value, key);
    else if (key == "warmup_epochs") cfg.schedule.warmup_epochs = get<std::int64_t>(value, key);
    else if (key == "cooldown_lr") cooldown_lr = get<double>(value, key);
    else if (key == "cooldown_end_epoch") cooldown_end = get<std::int64_t>(value, key);
    else if (key == "seed") cfg.seed = get<std::uint64_t>(value, key);
    else if (key == "dataset_dir") cfg.dataset_dir = get<std::string>(value, key);
    else if (key == "out_dir") cfg.out_dir = get<std::string>(value, key);
    else if (key == "partial_fraction") cfg.partial_fraction = get<double>(value, key);
    else if (key == "model") cfg.model = model::model_config_from_json(value);
    else if (key == "mask_range") {
      const auto r = get<std::vector<double>>(value, key);
      if (r.size() != 2) throw ConfigError("mask_range must have two entries");
      cfg.mask_lo = r[0];
      cfg.mask_hi = r[1];
    } else if (key == "max_steps") cfg.max_steps = get<std::int64_t>(value, key);
    else if (key == "augment") cfg.augment = get<bool>(value, key);
    else if (key == "eval_every") cfg.eval_every = get<std::int64_t>(value, key);
    else if (key == "refiner_on_predictions") cfg.refiner_on_predictions = get<bool>(value, key);
    else if (key == "sketch_checkpoint") cfg.sketch_checkpoint = get<std::string>(value, key);
    else throw ConfigError("unknown train config key '" + key + "'");
  }
  if (cooldown_lr || cooldown_end) {
    if (!(cooldown_lr && cooldown_end)) throw ConfigError("cooldown_lr and cooldown_end_epoch must be given together");
    cfg.schedule.cooldown = nn::Cooldown{*cooldown_lr, *cooldown_end};
  }
  cfg.validate();
  return cfg;
}

json EvalReport::to_json() const {
  return {{"cd_mean", cd_mean},
          {"presence_accuracy", presence_accuracy},
          {"loss_full_mean", loss_full_mean},
          {"samples", samples},
          {"empty_predictions", empty_predictions},
          {"cd_per_item", cd_per_item}};
}

EvalReport evaluate_predictions(std::span<const shape::PartSet> predictions, std::span<const TrainSample> samples,
                                const EvalOptions& options) {
  if (samples.empty()) throw ArgumentError("evaluate: held-out set is empty");
  if (predictions.size() != samples.size()) throw ArgumentError("evaluate: one prediction per sample required");
  EvalReport report;
  report.samples = samples.size();
  double acc = 0.0, lfull = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& pred = predictions[i];
    const auto& s = samples[i];
    acc += model::presence_accuracy(pred.c, s.target.c);
    lfull += model::loss_full(latent_tensor(pred), latent_tensor(s.target)).item();
    const auto parts = shape::decode_present(pred, options.inclusion_threshold);
    if (parts.empty()) {
      ++report.empty_predictions;
      continue;
    }
    const auto mesh = shape::extract_mesh(parts, {options.grid_res});
    const auto ref = shape::extract_mesh(s.parts, {options.reference_grid});
    if (mesh.empty() || ref.empty()) {
      ++report.empty_predictions;
      continue;
    }
    report.cd_per_item.push_back(metrics::chamfer(shape::sample_surface(mesh, options.n_points, options.seed),
                                                  shape::sample_surface(ref, options.n_points, options.seed)));
  }
  const double n = static_cast<double>(samples.size());
  report.presence_accuracy = acc / n;
  report.loss_full_mean = lfull / n;
  if (!report.cd_per_item.empty()) {
    report.cd_mean = std::accumulate(report.cd_per_item.begin(), report.cd_per_item.end(), 0.0) /
                     static_cast<double>(report.cd_per_item.size());
  }
  return report;
}

EvalReport evaluate_epoch(const model::SketchToParts& net, std::span<const TrainSample> heldout, const EvalOptions& options) {
  std::vector<shape::PartSet> predictions;
  predictions.reserve(heldout.size());
  for (const auto& s : heldout) predictions.push_back(net.predict(s.sketch));
  return evaluate_predictions(predictions, heldout, options);
}

TrainResult train_sketch2shape(const TrainConfig& cfg, std::span<const TrainSample> samples,
                               std::span<const TrainSample> heldout, const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw ArgumentError("train: no samples");
  check_samples(cfg.model, samples, "train");
  check_samples(cfg.model, heldout, "heldout");
  const auto schedule = cfg.resolved_schedule();
  model::SketchToParts net(cfg.model, mix_seed(cfg.seed, 1));
  nn::Adam adam(net.parameters());
  TrainResult result;
  result.best_parameters = net.parameters();
  result.best_score = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool done = false;
  for (std::int64_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    const double lr = nn::scheduled_lr(epoch, schedule);
    std::mt19937_64 rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log{epoch, lr, 0.0, 0.0, 0.0};
    std::size_t n_full = 0, n_part = 0, n_seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      nn::Gradients grads = nn::zero_gradients(net.parameters());
      double objective = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& s = samples[order[k]];
        const render::Sketch sketch = cfg.augment ? render::augment(s.sketch, rng()) : s.sketch;
        const auto l = sample_step(net, s, sketch, grads, scale);
        objective += scale * l.objective;
        log.loss_cls += l.cls;
        ++n_seen;
        if (s.style == SketchStyle::partial) {
          log.loss_part += l.part;
          ++n_part;
        } else {
          log.loss_full += l.full;
          ++n_full;
        }
      }
      adam.step(net.parameters(), grads, lr);
      result.step_losses.push_back(objective);
      ++result.steps;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        done = true;
        break;
      }
    }
    log.loss_full = n_full ? log.loss_full / static_cast<double>(n_full) : 0.0;
    log.loss_part = n_part ? log.loss_part / static_cast<double>(n_part) : 0.0;
    log.loss_cls = n_seen ? log.loss_cls / static_cast<double>(n_seen) : 0.0;
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);

    const bool last = done || epoch + 1 == cfg.epochs;
    const bool eval_now = last || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0);
    if (eval_now) {
      const double score = heldout.empty() ? log.loss_full : mean_loss_full(net, heldout);
      if (score < result.best_score) {
        result.best_score = score;
        result.best_parameters = net.parameters();
      }
    }
  }
  result.final_parameters = net.parameters();
  return result;
}

std::vector<double> mask_rows(std::span<const double> z, std::size_t d_model, const model::RefineMask& mask) {
  if (z.size() != mask.bits.size() * d_model) throw ArgumentError("mask_rows: latent size differs from m * d_model");
  std::vector<double> out(z.begin(), z.end());
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.bits[i]) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(i * d_model), d_model, 0.0);
  }
  return out;
}

RefinerResult train_refiner(const TrainConfig& cfg, std::span<const shape::PartSet> targets,
                            std::span<const shape::PartSet> inputs, const EpochCallback& on_epoch) {
  cfg.validate();
  if (targets.empty()) throw ArgumentError("train_refiner: no targets");
  if (inputs.empty()) inputs = targets;
  if (inputs.size() != targets.size()) throw ArgumentError("train_refiner: inputs and targets differ in count");
  const auto m = cfg.model.m, d = cfg.model.d_model;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].m != m || inputs[i].m != m || targets[i].d_model != d || inputs[i].d_model != d) {
      throw ConfigError("train_refiner: latent sets must be m=" + std::to_string(m) + ", d_model=" + std::to_string(d));
    }
  }
  const auto schedule = cfg.resolved_schedule();
  model::Refiner refiner(cfg.model, mix_seed(cfg.seed, 2));
  nn::Adam adam(refiner.parameters());
  RefinerResult result;
  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool done = false;
  std::uint64_t draw = 0;
  for (std::int64_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    const double lr = nn::scheduled_lr(epoch, schedule);
    std::mt19937_64 rng(mix_seed(cfg.seed, 5000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      nn::Gradients grads = nn::zero_gradients(refiner.parameters());
      double objective = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& target = targets[order[k]];
        const auto mask = model::sample_mask(mix_seed(cfg.seed ^ 0xA5A5ULL, draw++), m, cfg.mask_lo, cfg.mask_hi);
        const auto masked = mask_rows(inputs[order[k]].z, d, mask);
        for (std::size_t i = 0; i < m; ++i) {
          if (!mask.bits[i]) continue;
          for (std::size_t j = 0; j < d; ++j) {
            if (masked[i * d + j] != 0.0) throw StateError("train_refiner: masked row was not zeroed");
          }
        }
        nn::Binding params(refiner.parameters(), true);
        auto z_hat = refiner.forward(params, nn::Tensor({m, d}, masked), mask);
        auto loss = model::loss_refine(z_hat, latent_tensor(target), mask);
        loss.backward();
        nn::accumulate(grads, params.gradients(), scale);
        objective += scale * loss.item();
        epoch_loss += loss.item();
        ++seen;
      }
      adam.step(refiner.parameters(), grads, lr);
      result.step_losses.push_back(objective);
      ++result.steps;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        done = true;
        break;
      }
    }
    result.curve.push_back(epoch_loss / static_cast<double>(seen));
    if (on_epoch) on_epoch({epoch, lr, result.curve.back(), 0.0, 0.0});
  }
  result.parameters = refiner.parameters();
  return result;
}

std::vector<shape::PartSet> unique_targets(std::span<const TrainSample> samples) {
  std::vector<shape::PartSet> out;
  std::vector<std::string> seen;
  for (const auto& s : samples) {
    if (s.style == SketchStyle::partial) continue;
    if (std::find(seen.begin(), seen.end(), s.id) != seen.end()) continue;
    seen.push_back(s.id);
    out.push_back(s.target);
  }
  return out;
}

void write_loss_curve(const std::filesystem::path& path, std::span<const EpochLog> curve) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << "epoch,lr,loss_full,loss_cls,loss_part\n" << std::setprecision(17);
  for (const auto& e : curve) out << e.epoch << ',' << e.lr << ',' << e.loss_full << ',' << e.loss_cls << ',' << e.loss_part << '\n';
}

TrainResult run_training(const TrainConfig& cfg, const EpochCallback& on_epoch) {
  const auto ds = data::read_dataset(cfg.dataset_dir);
  auto result = train_sketch2shape(cfg, ds.samples, {}, on_epoch);
  std::filesystem::create_directories(cfg.out_dir);
  write_loss_curve(cfg.out_dir / "loss_curve.csv", result.curve);
  const json extra = {{"kind", "sketch2shape"}, {"steps", result.steps}, {"train_config", to_json(cfg)}};
  nn::save_checkpoint(cfg.out_dir / "final.ckpt", model::to_json(cfg.model), result.final_parameters, extra);
  json best_extra = extra;
  best_extra["score"] = result.best_score;
  nn::save_checkpoint(cfg.out_dir / "best.ckpt", model::to_json(cfg.model), result.best_parameters, best_extra);
  return result;
}

RefinerResult run_refiner_training(const TrainConfig& cfg, const EpochCallback& on_epoch) {
  const auto ds = data::read_dataset(cfg.dataset_dir);
  const auto targets = unique_targets(ds.samples);
  std::vector<shape::PartSet> inputs;
  if (cfg.refiner_on_predictions) {
    if (cfg.sketch_checkpoint.empty()) throw ConfigError("refiner_on_predictions requires sketch_checkpoint");
    const auto ckpt = nn::load_checkpoint(cfg.sketch_checkpoint);
    const model::SketchToParts net(model::model_config_from_json(ckpt.header.at("model_config")), ckpt.parameters);
    std::vector<std::string> seen;
    for (const auto& s : ds.samples) {
      if (s.style == SketchStyle::partial || std::find(seen.begin(), seen.end(), s.id) != seen.end()) continue;
      seen.push_back(s.id);
      inputs.push_back(net.predict(s.sketch));
    }
  }
  auto result = train_refiner(cfg, targets, inputs, on_epoch);
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream curve(cfg.out_dir / "refiner_curve.csv");
  curve << "epoch,loss_refine\n" << std::setprecision(17);
  for (std::size_t i = 0; i < result.curve.size(); ++i) curve << i << ',' << result.curve[i] << '\n';
  nn::save_checkpoint(cfg.out_dir / "refiner.ckpt", model::to_json(cfg.model), result.parameters,
                      {{"kind", "refiner"}, {"steps", result.steps}, {"train_config", to_json(cfg)}});
  return result;
}

}  // namespace sketchpart::train
