#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ct3d/tensor.hpp"

namespace ct3d::num {

using ParamId = std::size_t;

// Gradient accumulators shaped like a ParamStore. Used to collect per-proposal
// gradients before a deterministic reduction.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(std::vector<Tensor2> grads) : grads_(std::move(grads)) {}

  Tensor2& operator[](ParamId id) { return grads_[id]; }
  const Tensor2& operator[](ParamId id) const { return grads_[id]; }
  std::size_t size() const { return grads_.size(); }

  void zero();
  void add(const GradBuffer& other, double scale = 1.0);

 private:
  std::vector<Tensor2> grads_;
};

// Named learnable tensors in registration order, each with a gradient and
// ADAM moment buffers.
class ParamStore {
 public:
  ParamId add(const std::string& name, Tensor2 init);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  ParamId id(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  const std::string& name(ParamId id) const { return entries_[id].name; }
  Tensor2& value(ParamId id) { return entries_[id].value; }
  const Tensor2& value(ParamId id) const { return entries_[id].value; }
  Tensor2& grad(ParamId id) { return entries_[id].grad; }
  const Tensor2& grad(ParamId id) const { return entries_[id].grad; }
  Tensor2& first_moment(ParamId id) { return entries_[id].m; }
  Tensor2& second_moment(ParamId id) { return entries_[id].v; }

  void zero_grad();
  GradBuffer make_grad_buffer() const;
  void accumulate_grad(const GradBuffer& g, double scale = 1.0);

  std::uint64_t adam_steps() const { return adam_steps_; }
  void set_adam_steps(std::uint64_t t) { adam_steps_ = t; }

 private:
  struct Entry {
    std::string name;
    Tensor2 value;
    Tensor2 grad;
    Tensor2 m;
    Tensor2 v;
  };
  std::vector<Entry> entries_;
  std::map<std::string, ParamId> index_;
  std::uint64_t adam_steps_ = 0;
};

// Uniform(−1/√fan_in, 1/√fan_in).
Tensor2 uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace ct3d::num
