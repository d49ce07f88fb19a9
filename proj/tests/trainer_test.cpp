#include <gtest/gtest.h>

#include <fstream>

#include "sketchpart/errors.hpp"
#include "sketchpart/nn/checkpoint.hpp"
#include "sketchpart/train/trainer.hpp"
#include "test_support.hpp"

using namespace sketchpart;
using namespace sketchpart::train;

namespace {

std::vector<data::TrainSample> few_samples(std::size_t shapes, double partial_fraction = 0.0) {
  data::DatasetConfig cfg;
  cfg.count = shapes;
  cfg.views = 1;
  cfg.seed = 2;
  cfg.samples.partial_fraction = partial_fraction;
  auto samples = data::generate_dataset(cfg);
  std::erase_if(samples, [](const auto& s) { return s.style == data::SketchStyle::abstract_substitute; });
  return samples;
}

TrainConfig quick(std::int64_t epochs, std::size_t batch) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.schedule = {1e-4, 1e-3, 1, std::nullopt};
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST(TrainConfigTest, ValidateAndSchedule) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.resolved_schedule().warmup_epochs, cfg.epochs);
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.mask_lo = 0.5;
  cfg.mask_hi = 0.4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.schedule.warmup_epochs = 12;
  EXPECT_EQ(cfg.resolved_schedule().warmup_epochs, 12);
}

TEST(TrainConfigTest, JsonRoundTripRejectsUnknownKeys) {
  TrainConfig cfg = quick(9, 3);
  cfg.schedule.cooldown = nn::Cooldown{1e-5, 9};
  cfg.partial_fraction = 0.3;
  cfg.augment = true;
  cfg.max_steps = 40;
  const auto back = train_config_from_json(to_json(cfg));
  EXPECT_EQ(back.epochs, 9);
  EXPECT_EQ(back.batch_size, 3u);
  EXPECT_EQ(back.schedule.lr_end, 1e-3);
  ASSERT_TRUE(back.schedule.cooldown.has_value());
  EXPECT_EQ(back.schedule.cooldown->lr_final, 1e-5);
  EXPECT_EQ(back.partial_fraction, 0.3);
  EXPECT_TRUE(back.augment);
  EXPECT_EQ(back.max_steps, 40);
  EXPECT_EQ(back.model, cfg.model);
  auto j = to_json(cfg);
  j["momentum"] = 0.9;
  EXPECT_THROW(train_config_from_json(j), ConfigError);
}

TEST(Sketch2Shape, TwoEpochsGiveTwoCurvePoints) {
  const auto samples = few_samples(2);
  ASSERT_EQ(samples.size(), 2u);
  const auto result = train_sketch2shape(quick(2, 1), samples);
  ASSERT_EQ(result.curve.size(), 2u);
  EXPECT_EQ(result.steps, 4);
  EXPECT_EQ(result.step_losses.size(), 4u);
  for (const auto& e : result.curve) {
    EXPECT_TRUE(std::isfinite(e.loss_full));
    EXPECT_GT(e.lr, 0.0);
  }
  EXPECT_EQ(result.curve[0].epoch, 0);
  EXPECT_EQ(result.curve[1].epoch, 1);
}

TEST(Sketch2Shape, DeterministicPerSeed) {
  const auto samples = few_samples(2);
  const auto a = train_sketch2shape(quick(2, 2), samples);
  const auto b = train_sketch2shape(quick(2, 2), samples);
  EXPECT_EQ(a.step_losses, b.step_losses);
  EXPECT_TRUE(a.final_parameters == b.final_parameters);
  auto other = quick(2, 2);
  other.seed = 8;
  EXPECT_NE(train_sketch2shape(other, samples).step_losses, a.step_losses);
}

TEST(Sketch2Shape, LossFallsOnOneSample) {
  const auto samples = few_samples(1);
  auto cfg = quick(40, 1);
  cfg.schedule = {1e-3, 1e-3, 1, std::nullopt};
  const auto result = train_sketch2shape(cfg, samples);
  EXPECT_LT(result.curve.back().loss_full, 0.5 * result.curve.front().loss_full);
}

TEST(Sketch2Shape, MaxStepsAndCallbacks) {
  const auto samples = few_samples(3);
  auto cfg = quick(5, 1);
  cfg.max_steps = 4;
  std::size_t calls = 0;
  const auto result = train_sketch2shape(cfg, samples, {}, [&](const EpochLog&) { ++calls; });
  EXPECT_EQ(result.steps, 4);
  EXPECT_EQ(calls, result.curve.size());
}

TEST(Sketch2Shape, PartialSamplesUseMaskedLoss) {
  const auto samples = few_samples(2, 1.0);
  std::size_t partials = 0;
  for (const auto& s : samples) partials += s.style == data::SketchStyle::partial;
  ASSERT_GT(partials, 0u);
  const auto result = train_sketch2shape(quick(1, 4), samples);
  EXPECT_GT(result.curve[0].loss_part, 0.0);
  EXPECT_GT(result.curve[0].loss_full, 0.0);
}

TEST(Sketch2Shape, MismatchedSlotsRejected) {
  auto samples = few_samples(1);
  auto cfg = quick(1, 1);
  cfg.model.m = 6;
  EXPECT_THROW(train_sketch2shape(cfg, samples), ConfigError);
}

TEST(Evaluation, GroundTruthScoresNearZero) {
  const auto samples = few_samples(3);
  std::vector<shape::PartSet> preds;
  for (const auto& s : samples) preds.push_back(s.target);
  const auto report = evaluate_predictions(preds, samples);
  const double bound = 2.0 * std::pow(2.5 / 48.0, 2);
  EXPECT_LT(report.cd_mean, bound);
  EXPECT_EQ(report.presence_accuracy, 1.0);
  EXPECT_EQ(report.loss_full_mean, 0.0);
  EXPECT_EQ(report.empty_predictions, 0u);
  EXPECT_EQ(report.samples, samples.size());
  const auto j = report.to_json();
  for (const char* key : {"cd_mean", "presence_accuracy", "loss_full_mean", "samples", "empty_predictions", "cd_per_item"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Evaluation, EmptyPredictionCounted) {
  const auto samples = few_samples(1);
  std::vector<shape::PartSet> preds{shape::PartSet(8, 32)};
  const auto report = evaluate_predictions(preds, samples);
  EXPECT_EQ(report.empty_predictions, 1u);
  EXPECT_THROW(evaluate_predictions(std::span<const shape::PartSet>{}, samples), ArgumentError);
}

TEST(RefinerTraining, CurveDeterminismAndMasking) {
  std::vector<shape::PartSet> targets;
  for (std::uint64_t s = 0; s < 4; ++s) targets.push_back(data::generate_shape(s, data::ShapeClass::chair).part_set(8, 32));
  auto cfg = quick(3, 2);
  const auto a = train_refiner(cfg, targets);
  const auto b = train_refiner(cfg, targets);
  EXPECT_EQ(a.curve.size(), 3u);
  EXPECT_EQ(a.steps, 6);
  EXPECT_EQ(a.step_losses, b.step_losses);
  EXPECT_TRUE(a.parameters == b.parameters);
  cfg.max_steps = 2;
  EXPECT_EQ(train_refiner(cfg, targets).steps, 2);
  EXPECT_THROW(train_refiner(cfg, std::span<const shape::PartSet>{}), ArgumentError);
}

TEST(RefinerTraining, MaskRowsZeroesOnlyMasked) {
  const std::vector<double> z{1, 2, 3, 4, 5, 6};
  const auto out = mask_rows(z, 2, model::RefineMask{{false, true, false}});
  EXPECT_EQ(out, (std::vector<double>{1, 2, 0, 0, 5, 6}));
}

TEST(Targets, UniqueSkipsPartialAndDuplicates) {
  auto samples = few_samples(3, 1.0);
  auto doubled = samples;
  doubled.insert(doubled.end(), samples.begin(), samples.end());
  const auto targets = unique_targets(doubled);
  ASSERT_EQ(targets.size(), 3u);
  for (const auto& t : targets) EXPECT_GE(t.present_count(), 5u);
}

TEST(Drivers, RunTrainingWritesArtifacts) {
  const auto root = testing_support::scratch_dir("run_training");
  data::DatasetConfig dcfg;
  dcfg.count = 2;
  dcfg.views = 1;
  dcfg.samples.partial_fraction = 0.0;
  data::write_dataset(root / "data", data::generate_dataset(dcfg), data::to_json(dcfg));
  auto cfg = quick(2, 4);
  cfg.dataset_dir = root / "data";
  cfg.out_dir = root / "run";
  const auto result = run_training(cfg);
  EXPECT_EQ(result.curve.size(), 2u);
  for (const char* f : {"loss_curve.csv", "final.ckpt", "best.ckpt"}) EXPECT_TRUE(std::filesystem::exists(cfg.out_dir / f));
  std::ifstream csv(cfg.out_dir / "loss_curve.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "epoch,lr,loss_full,loss_cls,loss_part");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) rows += !line.empty();
  EXPECT_EQ(rows, 2u);
  const auto ckpt = nn::load_checkpoint(cfg.out_dir / "best.ckpt");
  const auto mcfg = model::model_config_from_json(ckpt.header.at("model_config"));
  EXPECT_NO_THROW(model::SketchToParts(mcfg, ckpt.parameters));

  cfg.out_dir = root / "refiner";
  const auto ref = run_refiner_training(cfg);
  EXPECT_EQ(ref.curve.size(), 2u);
  const auto rc = nn::load_checkpoint(cfg.out_dir / "refiner.ckpt");
  EXPECT_NO_THROW(model::Refiner(model::model_config_from_json(rc.header.at("model_config")), rc.parameters));
}
