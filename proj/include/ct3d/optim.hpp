#pragma once

#include <cstddef>

#include "ct3d/param_store.hpp"

namespace ct3d::num {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected ADAM update from the gradients held in the store; clears
// the gradients afterwards.
void adam_step(ParamStore& store, double lr, const AdamConfig& cfg = {});

struct LrSchedule {
  double max_lr = 1e-3;
  std::size_t total_steps = 1;
  std::size_t warmup_steps = 0;
};

void validate(const LrSchedule& s);

// Linear warmup, then half-cosine decay from max_lr to 0 at total_steps. Steps
// past the end clamp to the final value.
double cosine_lr(const LrSchedule& s, std::size_t step);

}  // namespace ct3d::num
