#include "ct3d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "eigen_view.hpp"

namespace ct3d::num {

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  Tensor2 out(n, m);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m) throw std::invalid_argument("Tensor2::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), out.row(r).begin());
    ++r;
  }
  return out;
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  Tensor2 out(1, values.size());
  std::copy(values.begin(), values.end(), out.data());
  return out;
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor2 transpose(const Tensor2& m) {
  Tensor2 out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  return out;
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Tensor2 out(a.rows(), b.cols());
  detail::view(out).noalias() = detail::view(a) * detail::view(b);
  return out;
}

namespace {

// Vectorised exp over the row; both softmax entry points share it so they
// agree bit for bit.
void softmax_into(std::span<const double> v, double* out) {
  if (v.empty()) return;
  const Eigen::Map<const Eigen::ArrayXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
  Eigen::Map<Eigen::ArrayXd> y(out, static_cast<Eigen::Index>(v.size()));
  y = (x - x.maxCoeff()).exp();
  y /= y.sum();
}

}  // namespace

std::vector<double> softmax(std::span<const double> v) {
  // Aligned scratch keeps the vectorised reductions on one code path.
  const Tensor2 in = Tensor2::row_vector(v);
  Tensor2 out(1, v.size());
  softmax_into(in.values(), out.data());
  return {out.values().begin(), out.values().end()};
}

Tensor2 softmax_over_rows(const Tensor2& m) {
  Tensor2 out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) softmax_into(m.row(r), out.row(r).data());
  return out;
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("layer_norm: row length must be >= 2");
  if (gain.size() != n || bias.size() != n)
    throw std::invalid_argument("layer_norm: gain/bias length mismatch");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = gain[i] * (x[i] - mean) * inv_std + bias[i];
  return out;
}

double smooth_l1(double x, double target, double beta) {
  const double r = std::abs(x - target);
  return r < beta ? 0.5 * r * r / beta : r - 0.5 * beta;
}

double bce_with_logits(double logit, double target) {
  // max(z,0) − z·t + log(1 + e^{−|z|})
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace ct3d::num
