#pragma once

#include <cstdint>
#include <functional>

#include "ct3d/param_store.hpp"

namespace ct3d::num {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  ParamId worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Probes skipped because θ ± eps landed on a different piecewise branch
  // than θ, where a central difference does not estimate the gradient.
  std::size_t kinks_skipped = 0;
};

struct LossProbe {
  double loss = 0.0;
  std::uint64_t branch_signature = 0;
};

// Compares analytic gradients against central differences on up to `samples`
// uniformly drawn parameter coordinates. Relative error per coordinate is
// |a − n| / max(1e-8, |a| + |n|). `loss` must read the current store values
// and be deterministic; the store is restored after each probe. Coordinates
// whose probes change the branch signature are skipped and counted, and
// another coordinate is drawn in their place.
GradCheckResult grad_check(const std::function<LossProbe()>& loss, ParamStore& store,
                           const GradBuffer& analytic, double eps = 1e-4,
                           std::size_t samples = 200, std::uint64_t seed = 0);

// Same, for a loss without branch information (no coordinate is skipped).
GradCheckResult grad_check(const std::function<double()>& loss, ParamStore& store,
                           const GradBuffer& analytic, double eps = 1e-4,
                           std::size_t samples = 200, std::uint64_t seed = 0);

}  // namespace ct3d::num
