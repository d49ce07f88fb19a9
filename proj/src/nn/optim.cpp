#include "sketchpart/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "sketchpart/errors.hpp"

namespace sketchpart::nn {

Adam::Adam(const ParameterStore& store, AdamConfig config)
    : config_(config), m_(zero_gradients(store)), v_(zero_gradients(store)) {}

void Adam::step(ParameterStore& store, const Gradients& grads, double lr) {
  if (grads.size() != store.size() || m_.size() != store.size()) {
    throw ArgumentError("Adam: gradient set does not match the parameter store");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& values = store.entry(i).values;
    const auto& g = grads[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      values[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
}

void LrSchedule::validate() const {
  if (!(lr_start <= lr_end)) throw ConfigError("lr schedule: lr_start must not exceed lr_end");
  if (warmup_epochs < 1) throw ConfigError("lr schedule: warmup_epochs must be >= 1");
  if (cooldown && cooldown->end_epoch < warmup_epochs) {
    throw ConfigError("lr schedule: cooldown must end after the warmup");
  }
}

double warmup_lr(std::int64_t epoch, const LrSchedule& schedule) {
  if (epoch <= 0) return schedule.lr_start;
  if (epoch >= schedule.warmup_epochs) return schedule.lr_end;
  const double t = static_cast<double>(epoch) / static_cast<double>(schedule.warmup_epochs);
  return schedule.lr_start + t * (schedule.lr_end - schedule.lr_start);
}

double scheduled_lr(std::int64_t epoch, const LrSchedule& schedule) {
  if (!schedule.cooldown || epoch <= schedule.warmup_epochs) return warmup_lr(epoch, schedule);
  const auto& cd = *schedule.cooldown;
  if (epoch >= cd.end_epoch) return cd.lr_final;
  const double t = static_cast<double>(epoch - schedule.warmup_epochs) /
                   static_cast<double>(cd.end_epoch - schedule.warmup_epochs);
  return schedule.lr_end + t * (cd.lr_final - schedule.lr_end);
}

}  // namespace sketchpart::nn
