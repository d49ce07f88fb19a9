#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sketchpart/data/dataset.hpp"
#include "sketchpart/model/config.hpp"
#include "sketchpart/model/networks.hpp"
#include "sketchpart/nn/optim.hpp"

namespace sketchpart::train {

struct TrainConfig {
  std::int64_t epochs = 100;
  std::size_t batch_size = 16;
  /// warmup_epochs == 0 means "ramp over all epochs".
  nn::LrSchedule schedule{1e-7, 1e-6, 0, std::nullopt};
  std::uint64_t seed = 0;
  std::filesystem::path dataset_dir;
  std::filesystem::path out_dir;
  double partial_fraction = 0.5;
  model::ModelConfig model;
  double mask_lo = 0.05;
  double mask_hi = 0.40;
  /// Stop after this many optimizer steps (0: no limit).
  std::int64_t max_steps = 0;
  /// Random augmentation of every sketch as it is drawn.
  bool augment = false;
  /// Held-out evaluation every this many epochs (0: final epoch only).
  std::int64_t eval_every = 0;
  /// Refiner inputs come from the sketch network instead of ground truth.
  bool refiner_on_predictions = false;
  /// Sketch network used when refiner_on_predictions is set.
  std::filesystem::path sketch_checkpoint;

  /// Throws ConfigError on epochs < 1, batch_size < 1, a bad mask range or
  /// an invalid schedule.
  void validate() const;
  /// Schedule with warmup_epochs resolved.
  nn::LrSchedule resolved_schedule() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Unknown keys are rejected; missing keys keep defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochLog {
  std::int64_t epoch = 0;
  double lr = 0.0;
  double loss_full = 0.0;  // mean over outline and abstract samples
  double loss_cls = 0.0;   // mean over all samples
  double loss_part = 0.0;  // mean over partial samples
};

struct EvalOptions {
  std::size_t grid_res = 48;
  std::size_t reference_grid = 96;
  std::size_t n_points = 5000;
  std::uint64_t seed = 0;
  double inclusion_threshold = 0.5;
};

struct EvalReport {
  double cd_mean = 0.0;
  double presence_accuracy = 0.0;
  double loss_full_mean = 0.0;
  std::size_t samples = 0;
  std::size_t empty_predictions = 0;
  std::vector<double> cd_per_item;

  nlohmann::json to_json() const;
};

/// Scores predicted PartSets (one per sample) against the samples' targets:
/// decoded parts meshed at grid_res versus the target parts meshed at
/// reference_grid. Predictions with no part above the inclusion threshold
/// are counted and skipped for Chamfer.
EvalReport evaluate_predictions(std::span<const shape::PartSet> predictions, std::span<const data::TrainSample> samples,
                                const EvalOptions& options = {});
EvalReport evaluate_epoch(const model::SketchToParts& net, std::span<const data::TrainSample> heldout,
                          const EvalOptions& options = {});

struct TrainResult {
  std::vector<EpochLog> curve;
  nn::ParameterStore final_parameters;
  nn::ParameterStore best_parameters;
  double best_score = 0.0;  // held-out mean L_full of the best parameters
  std::int64_t steps = 0;
  std::vector<double> step_losses;  // objective per optimizer step
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Full and abstract samples optimize L_full + L_cls, partial samples
/// L_cls + L_part; each step averages per-sample gradients over a batch in
/// a seeded shuffle order. `heldout` picks the best parameters (training
/// samples when empty). Throws ConfigError when sample m / d_model differ
/// from the model configuration.
TrainResult train_sketch2shape(const TrainConfig& cfg, std::span<const data::TrainSample> samples,
                               std::span<const data::TrainSample> heldout = {}, const EpochCallback& on_epoch = {});

struct RefinerResult {
  std::vector<double> curve;  // mean L_refine per epoch
  std::vector<double> step_losses;
  nn::ParameterStore parameters;
  std::int64_t steps = 0;
};

/// Masking objective: sample_mask, zero the masked rows of the input,
/// predict, L_refine on the masked rows. `inputs` defaults to `targets`.
RefinerResult train_refiner(const TrainConfig& cfg, std::span<const shape::PartSet> targets,
                            std::span<const shape::PartSet> inputs = {}, const EpochCallback& on_epoch = {});

/// Copy of z with the masked rows zeroed.
std::vector<double> mask_rows(std::span<const double> z, std::size_t d_model, const model::RefineMask& mask);

// File-level drivers used by the command line.

/// Reads cfg.dataset_dir, trains, and writes out_dir/{loss_curve.csv,
/// final.ckpt, best.ckpt}. Best is chosen on the training samples.
TrainResult run_training(const TrainConfig& cfg, const EpochCallback& on_epoch = {});
/// Trains on the dataset's full targets; writes out_dir/refiner.ckpt.
RefinerResult run_refiner_training(const TrainConfig& cfg, const EpochCallback& on_epoch = {});

void write_loss_curve(const std::filesystem::path& path, std::span<const EpochLog> curve);

/// One PartSet per distinct shape (the outline-style targets), in order.
std::vector<shape::PartSet> unique_targets(std::span<const data::TrainSample> samples);

}  // namespace sketchpart::train
