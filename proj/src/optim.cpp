#include "ct3d/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ct3d::num {

void adam_step(ParamStore& store, double lr, const AdamConfig& cfg) {
  const std::uint64_t t = store.adam_steps() + 1;
  store.set_adam_steps(t);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (ParamId id = 0; id < store.size(); ++id) {
    auto p = store.value(id).values();
    auto g = store.grad(id).values();
    auto m = store.first_moment(id).values();
    auto v = store.second_moment(id).values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
  store.zero_grad();
}

void validate(const LrSchedule& s) {
  if (!(s.max_lr > 0.0)) throw std::invalid_argument("LrSchedule: max_lr must be > 0");
  if (s.total_steps < 1) throw std::invalid_argument("LrSchedule: total_steps must be >= 1");
  if (s.warmup_steps > s.total_steps)
    throw std::invalid_argument("LrSchedule: warmup_steps exceeds total_steps");
}

double cosine_lr(const LrSchedule& s, std::size_t step) {
  step = std::min(step, s.total_steps);
  if (step < s.warmup_steps)
    return s.max_lr * static_cast<double>(step + 1) / static_cast<double>(s.warmup_steps);
  const std::size_t span = s.total_steps - s.warmup_steps;
  if (span == 0) return 0.0;
  const double progress = static_cast<double>(step - s.warmup_steps) / static_cast<double>(span);
  return 0.5 * s.max_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace ct3d::num
