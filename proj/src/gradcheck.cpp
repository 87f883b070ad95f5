#include "ct3d/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace ct3d::num {

GradCheckResult grad_check(const std::function<LossProbe()>& loss, ParamStore& store,
                           const GradBuffer& analytic, double eps, std::size_t samples,
                           std::uint64_t seed) {
  if (analytic.size() != store.size())
    throw std::invalid_argument("grad_check: gradient buffer does not match store");

  std::vector<std::pair<ParamId, std::size_t>> coords;
  coords.reserve(store.scalar_count());
  for (ParamId id = 0; id < store.size(); ++id)
    for (std::size_t k = 0; k < store.value(id).size(); ++k) coords.emplace_back(id, k);

  const std::uint64_t base_branches = loss().branch_signature;
  std::mt19937_64 rng(seed);
  GradCheckResult result;
  // Lazy Fisher–Yates: coords[i] is a fresh uniform draw at every iteration.
  for (std::size_t i = 0; i < coords.size() && result.coords_checked < samples; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, coords.size() - 1);
    std::swap(coords[i], coords[pick(rng)]);
    const auto [id, k] = coords[i];

    double& p = store.value(id)[k];
    const double saved = p;
    p = saved + eps;
    const LossProbe up = loss();
    p = saved - eps;
    const LossProbe down = loss();
    p = saved;
    if (up.branch_signature != base_branches || down.branch_signature != base_branches) {
      ++result.kinks_skipped;
      continue;
    }

    const double numeric = (up.loss - down.loss) / (2.0 * eps);
    const double a = analytic[id][k];
    const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    ++result.coords_checked;
    if (result.coords_checked == 1 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_param = id;
      result.worst_index = k;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<double()>& loss, ParamStore& store,
                           const GradBuffer& analytic, double eps, std::size_t samples,
                           std::uint64_t seed) {
  return grad_check([&loss] { return LossProbe{loss(), 0}; }, store, analytic, eps, samples, seed);
}

}  // namespace ct3d::num
