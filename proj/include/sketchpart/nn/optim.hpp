#pragma once

#include <cstdint>
#include <optional>

#include "sketchpart/nn/parameters.hpp"

namespace sketchpart::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer over every entry of a ParameterStore.
class Adam {
 public:
  Adam(const ParameterStore& store, AdamConfig config = {});

  void step(ParameterStore& store, const Gradients& grads, double lr);
  std::int64_t steps() const { return steps_; }

 private:
  AdamConfig config_;
  Gradients m_, v_;
  std::int64_t steps_ = 0;
};

/// Optional linear decay that follows the warmup ramp.
struct Cooldown {
  double lr_final = 0.0;
  std::int64_t end_epoch = 0;  // lr_final reached here and held afterwards
};

/// Linear warmup from lr_start to lr_end over warmup_epochs epochs.
struct LrSchedule {
  double lr_start = 1e-7;
  double lr_end = 1e-6;
  std::int64_t warmup_epochs = 1;
  std::optional<Cooldown> cooldown;

  void validate() const;
};

/// Warmup ramp only: lr_start at epoch 0, lr_end from warmup_epochs on.
double warmup_lr(std::int64_t epoch, const LrSchedule& schedule);

/// warmup_lr followed by the cooldown, when one is configured.
double scheduled_lr(std::int64_t epoch, const LrSchedule& schedule);

}  // namespace sketchpart::nn
