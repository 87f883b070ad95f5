#include "ct3d/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ct3d/seed.hpp"
#include "eigen_view.hpp"

namespace ct3d::num {

using detail::view;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("Tape: ") + what);
}

}  // namespace

Var Tape::push(Tensor2 value, bool requires_grad, BackwardFn fn) {
  if (backward_done_) throw std::logic_error("Tape: recording after backward; call reset()");
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad && mode_ == Mode::record;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tensor2& Tape::grad_ref(std::size_t index) {
  Node& n = nodes_[index];
  if (n.grad.empty()) {
    const Tensor2& v = val(index);
    n.grad = Tensor2(v.rows(), v.cols());
  }
  return n.grad;
}

Var Tape::constant(Tensor2 value) { return push(std::move(value), false, nullptr); }

Var Tape::param(const ParamStore& store, ParamId id) {
  if (store_ != nullptr && store_ != &store)
    throw std::invalid_argument("Tape: parameters from two different stores");
  store_ = &store;
  if (param_lookup_.size() < store.size()) param_lookup_.resize(store.size(), SIZE_MAX);
  if (param_lookup_[id] != SIZE_MAX) return Var{param_lookup_[id]};
  if (backward_done_) throw std::logic_error("Tape: recording after backward; call reset()");
  Node n;
  n.external = &store.value(id);
  n.requires_grad = mode_ == Mode::record;
  n.param = id;
  nodes_.push_back(std::move(n));
  const std::size_t index = nodes_.size() - 1;
  param_lookup_[id] = index;
  param_nodes_.push_back(index);
  return Var{index};
}

const Tensor2& Tape::value(Var v) const { return val(v.index); }

const Tensor2& Tape::grad(Var v) const { return nodes_[v.index].grad; }

Var Tape::matmul(Var a, Var b) {
  const Tensor2& A = val(a.index);
  const Tensor2& B = val(b.index);
  require(A.cols() == B.rows(), "matmul shape mismatch");
  Tensor2 out(A.rows(), B.cols());
  view(out).noalias() = view(A) * view(B);
  return push(std::move(out), needs(a.index) || needs(b.index),
              [a, b](Tape& t, std::size_t self) {
                const Tensor2& g = t.nodes_[self].grad;
                if (t.needs(a.index))
                  view(t.grad_ref(a.index)).noalias() += view(g) * view(t.val(b.index)).transpose();
                if (t.needs(b.index))
                  view(t.grad_ref(b.index)).noalias() += view(t.val(a.index)).transpose() * view(g);
              });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor2& A = val(a.index);
  const Tensor2& B = val(b.index);
  require(A.cols() == B.cols(), "matmul_nt shape mismatch");
  Tensor2 out(A.rows(), B.rows());
  view(out).noalias() = view(A) * view(B).transpose();
  return push(std::move(out), needs(a.index) || needs(b.index),
              [a, b](Tape& t, std::size_t self) {
                const Tensor2& g = t.nodes_[self].grad;
                if (t.needs(a.index))
                  view(t.grad_ref(a.index)).noalias() += view(g) * view(t.val(b.index));
                if (t.needs(b.index))
                  view(t.grad_ref(b.index)).noalias() += view(g).transpose() * view(t.val(a.index));
              });
}

Var Tape::add(Var a, Var b) {
  const Tensor2& A = val(a.index);
  const Tensor2& B = val(b.index);
  require(A.same_shape(B), "add shape mismatch");
  Tensor2 out(A.rows(), A.cols());
  view(out) = view(A) + view(B);
  return push(std::move(out), needs(a.index) || needs(b.index),
              [a, b](Tape& t, std::size_t self) {
                const Tensor2& g = t.nodes_[self].grad;
                if (t.needs(a.index)) view(t.grad_ref(a.index)) += view(g);
                if (t.needs(b.index)) view(t.grad_ref(b.index)) += view(g);
              });
}

Var Tape::add_row(Var a, Var row) {
  const Tensor2& A = val(a.index);
  const Tensor2& R = val(row.index);
  require(R.rows() == 1 && R.cols() == A.cols(), "add_row shape mismatch");
  Tensor2 out = A;
  view(out).rowwise() += view(R).row(0);
  return push(std::move(out), needs(a.index) || needs(row.index),
              [a, row](Tape& t, std::size_t self) {
                const Tensor2& g = t.nodes_[self].grad;
                if (t.needs(a.index)) view(t.grad_ref(a.index)) += view(g);
                if (t.needs(row.index))
                  view(t.grad_ref(row.index)).row(0) += view(g).colwise().sum();
              });
}

Var Tape::sub(Var a, Var b) {
  const Tensor2& A = val(a.index);
  const Tensor2& B = val(b.index);
  require(A.same_shape(B), "sub shape mismatch");
  Tensor2 out(A.rows(), A.cols());
  view(out) = view(A) - view(B);
  return push(std::move(out), needs(a.index) || needs(b.index),
              [a, b](Tape& t, std::size_t self) {
                const Tensor2& g = t.nodes_[self].grad;
                if (t.needs(a.index)) view(t.grad_ref(a.index)) += view(g);
                if (t.needs(b.index)) view(t.grad_ref(b.index)) -= view(g);
              });
}

Var Tape::mul(Var a, Var b) {
  const Tensor2& A = val(a.index);
  const Tensor2& B = val(b.index);
  require(A.same_shape(B), "mul shape mismatch");
  Tensor2 out(A.rows(), A.cols());
  view(out) = view(A).cwiseProduct(view(B));
  return push(std::move(out), needs(a.index) || needs(b.index),
              [a, b](Tape& t, std::size_t self) {
                const Tensor2& g = t.nodes_[self].grad;
                if (t.needs(a.index))
                  view(t.grad_ref(a.index)) += view(g).cwiseProduct(view(t.val(b.index)));
                if (t.needs(b.index))
                  view(t.grad_ref(b.index)) += view(g).cwiseProduct(view(t.val(a.index)));
              });
}

Var Tape::scale(Var a, double s) {
  const Tensor2& A = val(a.index);
  Tensor2 out(A.rows(), A.cols());
  view(out) = view(A) * s;
  return push(std::move(out), needs(a.index), [a, s](Tape& t, std::size_t self) {
    view(t.grad_ref(a.index)) += view(t.nodes_[self].grad) * s;
  });
}

namespace {

// Folds a stream of branch bits into a running hash, 56 bits per word.
class BranchHasher {
 public:
  explicit BranchHasher(std::uint64_t h) : h_(h) {}
  void push(bool b) {
    word_ |= static_cast<std::uint64_t>(b) << bits_;
    if (++bits_ == 56) flush();
  }
  std::uint64_t finish() {
    flush();
    return h_;
  }

 private:
  void flush() {
    h_ = splitmix64(h_ ^ word_ ^ (static_cast<std::uint64_t>(bits_) << 56));
    word_ = 0;
    bits_ = 0;
  }
  std::uint64_t h_;
  std::uint64_t word_ = 0;
  unsigned bits_ = 0;
};

}  // namespace

Var Tape::relu(Var a) {
  const Tensor2& A = val(a.index);
  Tensor2 out(A.rows(), A.cols());
  view(out) = view(A).cwiseMax(0.0);
  BranchHasher branches(branch_hash_);
  for (std::size_t i = 0; i < A.size(); ++i) branches.push(A[i] > 0.0);
  branch_hash_ = branches.finish();
  return push(std::move(out), needs(a.index), [a](Tape& t, std::size_t self) {
    const Tensor2& g = t.nodes_[self].grad;
    const Tensor2& x = t.val(a.index);
    Tensor2& ga = t.grad_ref(a.index);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

Var Tape::softmax_rows(Var a) {
  Tensor2 out = softmax_over_rows(val(a.index));
  return push(std::move(out), needs(a.index), [a](Tape& t, std::size_t self) {
    const Tensor2& y = t.val(self);
    const Tensor2& g = t.nodes_[self].grad;
    auto Y = view(y);
    auto G = view(g);
    const Eigen::VectorXd dots = G.cwiseProduct(Y).rowwise().sum();
    auto GA = view(t.grad_ref(a.index));
    GA += Y.cwiseProduct(G.colwise() - dots);
  });
}

Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Tensor2& X = val(x.index);
  const Tensor2& Gn = val(gain.index);
  const Tensor2& B = val(bias.index);
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  require(d >= 2, "layer_norm_rows needs at least two columns");
  require(Gn.rows() == 1 && Gn.cols() == d && B.rows() == 1 && B.cols() == d,
          "layer_norm_rows gain/bias shape");
  Tensor2 xhat(n, d);
  std::vector<double> inv_std(n);
  Tensor2 out(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = X.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (row[c] - mean) * inv_std[r];
      out(r, c) = Gn[c] * xhat(r, c) + B[c];
    }
  }
  const bool rg = needs(x.index) || needs(gain.index) || needs(bias.index);
  return push(std::move(out), rg,
              [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  Tape& t, std::size_t self) {
                const Tensor2& g = t.nodes_[self].grad;
                const std::size_t n = g.rows();
                const std::size_t d = g.cols();
                const Tensor2& gn = t.val(gain.index);
                if (t.needs(gain.index)) {
                  Tensor2& gg = t.grad_ref(gain.index);
                  for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < d; ++c) gg[c] += g(r, c) * xhat(r, c);
                }
                if (t.needs(bias.index)) {
                  Tensor2& gb = t.grad_ref(bias.index);
                  for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < d; ++c) gb[c] += g(r, c);
                }
                if (t.needs(x.index)) {
                  Tensor2& gx = t.grad_ref(x.index);
                  const double inv_d = 1.0 / static_cast<double>(d);
                  for (std::size_t r = 0; r < n; ++r) {
                    double mean_dx = 0.0;
                    double mean_dx_xhat = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                      const double dxh = g(r, c) * gn[c];
                      mean_dx += dxh;
                      mean_dx_xhat += dxh * xhat(r, c);
                    }
                    mean_dx *= inv_d;
                    mean_dx_xhat *= inv_d;
                    for (std::size_t c = 0; c < d; ++c) {
                      const double dxh = g(r, c) * gn[c];
                      gx(r, c) += inv_std[r] * (dxh - mean_dx - xhat(r, c) * mean_dx_xhat);
                    }
                  }
                }
              });
}

Var Tape::transpose(Var a) {
  Tensor2 out = num::transpose(val(a.index));
  return push(std::move(out), needs(a.index), [a](Tape& t, std::size_t self) {
    view(t.grad_ref(a.index)) += view(t.nodes_[self].grad).transpose();
  });
}

Var Tape::slice_cols(Var a, std::size_t first, std::size_t count) {
  const Tensor2& A = val(a.index);
  require(first + count <= A.cols(), "slice_cols out of range");
  Tensor2 out(A.rows(), count);
  view(out) = view(A).middleCols(static_cast<Eigen::Index>(first),
                                 static_cast<Eigen::Index>(count));
  return push(std::move(out), needs(a.index), [a, first, count](Tape& t, std::size_t self) {
    view(t.grad_ref(a.index))
        .middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) +=
        view(t.nodes_[self].grad);
  });
}

Var Tape::slice_rows(Var a, std::size_t first, std::size_t count) {
  const Tensor2& A = val(a.index);
  require(first + count <= A.rows(), "slice_rows out of range");
  Tensor2 out(count, A.cols());
  view(out) = view(A).middleRows(static_cast<Eigen::Index>(first),
                                 static_cast<Eigen::Index>(count));
  return push(std::move(out), needs(a.index), [a, first, count](Tape& t, std::size_t self) {
    view(t.grad_ref(a.index))
        .middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) +=
        view(t.nodes_[self].grad);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols needs at least one part");
  const std::size_t rows = val(parts[0].index).rows();
  std::size_t cols = 0;
  bool rg = false;
  for (Var p : parts) {
    require(val(p.index).rows() == rows, "concat_cols row mismatch");
    cols += val(p.index).cols();
    rg = rg || needs(p.index);
  }
  Tensor2 out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor2& P = val(p.index);
    view(out).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(P.cols())) =
        view(P);
    offset += P.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), rg, [inputs = std::move(inputs)](Tape& t, std::size_t self) {
    const Tensor2& g = t.nodes_[self].grad;
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t w = t.val(p.index).cols();
      if (t.needs(p.index))
        view(t.grad_ref(p.index)) +=
            view(g).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(w));
      offset += w;
    }
  });
}

Var Tape::repeat_row(Var row, std::size_t times) {
  const Tensor2& R = val(row.index);
  require(R.rows() == 1, "repeat_row expects a 1×n input");
  Tensor2 out(times, R.cols());
  for (std::size_t r = 0; r < times; ++r) std::copy(R.data(), R.data() + R.cols(), out.row(r).begin());
  return push(std::move(out), needs(row.index), [row](Tape& t, std::size_t self) {
    view(t.grad_ref(row.index)).row(0) += view(t.nodes_[self].grad).colwise().sum();
  });
}

Var Tape::gather_rows(Var a, std::span<const std::size_t> indices) {
  const Tensor2& A = val(a.index);
  Tensor2 out(indices.size(), A.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < A.rows(), "gather_rows index out of range");
    std::copy(A.row(indices[i]).begin(), A.row(indices[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return push(std::move(out), needs(a.index), [a, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Tensor2& g = t.nodes_[self].grad;
    Tensor2& ga = t.grad_ref(a.index);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = g.row(i);
      auto dst = ga.row(idx[i]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var Tape::sum(Var a) {
  const Tensor2& A = val(a.index);
  Tensor2 out(1, 1);
  out[0] = view(A).sum();
  return push(std::move(out), needs(a.index), [a](Tape& t, std::size_t self) {
    view(t.grad_ref(a.index)).array() += t.nodes_[self].grad[0];
  });
}

Var Tape::smooth_l1_sum(Var pred, std::span<const double> target, double beta) {
  const Tensor2& P = val(pred.index);
  require(P.size() == target.size(), "smooth_l1_sum length mismatch");
  Tensor2 out(1, 1);
  BranchHasher branches(branch_hash_);
  for (std::size_t k = 0; k < P.size(); ++k) {
    out[0] += smooth_l1(P[k], target[k], beta);
    const double r = P[k] - target[k];
    branches.push(std::abs(r) < beta);
    branches.push(r > 0);
  }
  branch_hash_ = branches.finish();
  std::vector<double> tgt(target.begin(), target.end());
  return push(std::move(out), needs(pred.index),
              [pred, tgt = std::move(tgt), beta](Tape& t, std::size_t self) {
                const double g = t.nodes_[self].grad[0];
                const Tensor2& p = t.val(pred.index);
                Tensor2& gp = t.grad_ref(pred.index);
                for (std::size_t k = 0; k < p.size(); ++k) {
                  const double r = p[k] - tgt[k];
                  const double d = std::abs(r) < beta ? r / beta : (r > 0 ? 1.0 : -1.0);
                  gp[k] += g * d;
                }
              });
}

Var Tape::bce_with_logits(Var logit, double target) {
  const Tensor2& L = val(logit.index);
  require(L.size() == 1, "bce_with_logits expects a 1×1 logit");
  Tensor2 out(1, 1);
  out[0] = num::bce_with_logits(L[0], target);
  return push(std::move(out), needs(logit.index), [logit, target](Tape& t, std::size_t self) {
    const double z = t.val(logit.index)[0];
    t.grad_ref(logit.index)[0] += t.nodes_[self].grad[0] * (sigmoid(z) - target);
  });
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("Tape::backward called twice on one recording");
  require(val(loss.index).size() == 1, "backward expects a scalar loss");
  backward_done_ = true;
  if (!needs(loss.index)) return;
  grad_ref(loss.index)[0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

void Tape::collect_param_grads(GradBuffer& out, double scale) const {
  for (std::size_t idx : param_nodes_) {
    const Node& n = nodes_[idx];
    if (n.grad.empty()) continue;
    Tensor2& dst = out[n.param];
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * n.grad[k];
  }
}

void Tape::collect_param_grads(ParamStore& store, double scale) const {
  for (std::size_t idx : param_nodes_) {
    const Node& n = nodes_[idx];
    if (n.grad.empty()) continue;
    Tensor2& dst = store.grad(n.param);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * n.grad[k];
  }
}

void Tape::reset() {
  nodes_.clear();
  param_nodes_.clear();
  param_lookup_.clear();
  store_ = nullptr;
  backward_done_ = false;
  branch_hash_ = 0;
}

}  // namespace ct3d::num
