#include "ct3d/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace ct3d::num {

void GradBuffer::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

void GradBuffer::add(const GradBuffer& other, double scale) {
  if (other.size() != size()) throw std::invalid_argument("GradBuffer::add: size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    auto dst = grads_[i].values();
    auto src = other.grads_[i].values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  }
}

ParamId ParamStore::add(const std::string& name, Tensor2 init) {
  if (index_.contains(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  const ParamId id = entries_.size();
  Entry e;
  e.name = name;
  e.grad = Tensor2(init.rows(), init.cols());
  e.m = Tensor2(init.rows(), init.cols());
  e.v = Tensor2(init.rows(), init.cols());
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  index_.emplace(name, id);
  return id;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

ParamId ParamStore::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no parameter named " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

GradBuffer ParamStore::make_grad_buffer() const {
  std::vector<Tensor2> grads;
  grads.reserve(entries_.size());
  for (const auto& e : entries_) grads.emplace_back(e.value.rows(), e.value.cols());
  return GradBuffer(std::move(grads));
}

void ParamStore::accumulate_grad(const GradBuffer& g, double scale) {
  if (g.size() != entries_.size())
    throw std::invalid_argument("ParamStore::accumulate_grad: size mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = entries_[i].grad.values();
    auto src = g[i].values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  }
}

Tensor2 uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in,
                     std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor2 out(rows, cols);
  for (double& v : out.values()) v = dist(rng);
  return out;
}

}  // namespace ct3d::num
