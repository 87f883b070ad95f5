#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ct3d/param_store.hpp"
#include "ct3d/tensor.hpp"

namespace ct3d::num {

class Tape;

// Handle to a node recorded on a Tape.
struct Var {
  std::size_t index = 0;
};

// Reverse-mode recording of a forward computation over Tensor2 values.
//
// Parameters enter as non-owning leaves; after backward() their gradients are
// added into a GradBuffer (or a ParamStore) by collect_param_grads(). Calling
// backward() twice on the same recording throws std::logic_error; reset()
// starts a fresh recording.
class Tape {
 public:
  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  Var param(const ParamStore& store, ParamId id);

  const Tensor2& value(Var v) const;
  const Tensor2& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // a: n×k, b: k×m.
  Var matmul(Var a, Var b);
  // a·bᵀ with a: n×k, b: m×k.
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  // Adds a 1×m row to every row of a.
  Var add_row(Var a, Var row);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var relu(Var a);
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps = kLayerNormEps);
  Var transpose(Var a);
  Var slice_cols(Var a, std::size_t first, std::size_t count);
  Var slice_rows(Var a, std::size_t first, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  // Stacks `times` copies of a 1×n row into a times×n matrix.
  Var repeat_row(Var row, std::size_t times);
  // out.row(i) = a.row(indices[i]).
  Var gather_rows(Var a, std::span<const std::size_t> indices);
  Var sum(Var a);
  // Σ_k smooth_l1(pred[k], target[k]) over a 1×k prediction.
  Var smooth_l1_sum(Var pred, std::span<const double> target, double beta = kSmoothL1Beta);
  // Binary cross-entropy of a 1×1 logit against a soft target.
  Var bce_with_logits(Var logit, double target);

  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  // Adds scale × (gradient of every parameter leaf) into out.
  void collect_param_grads(GradBuffer& out, double scale = 1.0) const;
  void collect_param_grads(ParamStore& store, double scale = 1.0) const;

  // Hash of every piecewise branch taken so far (ReLU signs, smooth-L1
  // regions). Two recordings with equal signatures evaluated the same smooth
  // piece of the function.
  std::uint64_t branch_signature() const { return branch_hash_; }

  void reset();

 private:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Tensor2 owned;
    const Tensor2* external = nullptr;
    Tensor2 grad;
    bool requires_grad = false;
    BackwardFn backward;
    ParamId param = static_cast<ParamId>(-1);
  };

  Var push(Tensor2 value, bool requires_grad, BackwardFn fn);
  Tensor2& grad_ref(std::size_t index);
  const Tensor2& val(std::size_t index) const {
    const Node& n = nodes_[index];
    return n.external ? *n.external : n.owned;
  }
  bool needs(std::size_t index) const { return nodes_[index].requires_grad; }

  std::vector<Node> nodes_;
  std::vector<std::size_t> param_nodes_;
  std::vector<std::size_t> param_lookup_;
  const ParamStore* store_ = nullptr;
  Mode mode_ = Mode::record;
  bool backward_done_ = false;
  std::uint64_t branch_hash_ = 0;
};

}  // namespace ct3d::num
