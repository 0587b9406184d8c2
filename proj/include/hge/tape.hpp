#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "hge/tensor.hpp"

namespace hge {

// Handle into a Tape slot.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Fixed fan-out wiring for one aggregation layer: every target draws the same
// number of source slots. Entries index rows of the layer's source-state
// matrix, not graph node ids.
struct FanoutIndex {
  int target_count = 0;
  int fanout = 0;
  std::vector<int> neighbor_pos;  // target_count * fanout
  std::vector<int> target_pos;    // target_count

  int at(int t, int s) const { return neighbor_pos[static_cast<std::size_t>(t) * fanout + s]; }
};

// Per-head attention coefficients captured during a pooled aggregation;
// row t holds the target's normalized weights over its fanout slots.
struct AttentionStash {
  Tensor alpha;   // [targets x fanout]
  Tensor lambda;  // [targets x fanout]
};

// Reverse-mode autodiff over Tensor ops. Single-threaded; one tape per batch.
// Leaves may reference external parameter tensors to avoid per-batch copies;
// the referenced tensors must outlive the tape and stay unmodified until
// backward() has run.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable leaf backed by external storage.
  Var leaf(const Tensor* external);
  // Non-trainable inputs.
  Var constant(Tensor v);
  Var constant_ref(const Tensor* external);

  const Tensor& val(Var v) const;
  const Tensor& grad(Var v);
  bool requires_grad(Var v) const;

  // Arithmetic
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var affine(Var a, double k, double b);  // k*a + b elementwise
  Var add_broadcast(Var v, Var s);        // vector + scalar
  Var add_rowvec(Var m, Var v);           // [n x c] + [c] per row

  // Linear algebra
  Var matmul(Var a, Var b);     // [m x k]*[k x n] or [m x k]*[k]
  Var matmul_nt(Var a, Var b);  // [m x k] * [n x k]^T -> [m x n]
  Var vecmat(Var w, Var m);     // [r] * [r x d] -> [d]
  Var dot(Var a, Var b);        // rank-1 -> scalar
  Var row_dot(Var a, Var b);    // [n x d],[n x d] -> [n]

  // Structure
  Var concat(Var a, Var b);       // rank-1
  Var concat_cols(Var a, Var b);  // [n x c1],[n x c2] -> [n x (c1+c2)]
  Var gather_rows(Var a, std::vector<int> rows);
  Var slice_vec(Var a, int start, int len);

  // Reductions
  Var sum(Var a);
  Var mean(Var a);
  Var average(const std::vector<Var>& xs);

  // Nonlinearities
  Var softmax(Var a);  // rank-1, or rank-2 row-wise
  Var log(Var a, double floor = 0.0);  // log(max(a, floor)); zero grad below floor
  Var leaky_relu(Var a, double slope = 0.2);
  Var elu(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var clamp(Var a, double lo, double hi);

  // Mean cross-entropy of row-wise softmax over labeled rows; label -1 ignores
  // the row. Stable log-sum-exp; gradient is (softmax - onehot)/count.
  Var cross_entropy(Var logits, std::vector<int> labels);

  // rows(X) * W^T for constant sparse X: out[r] = W * x_r. Gradient flows into
  // W only.
  Var feature_matmul(Var w, const SparseRows* x);

  // Fused dual-attention aggregation over a fixed fan-out: for each target t,
  //   a_logit(t,s) = LeakyReLU(au[tpos(t)] + av[nbr(t,s)]);  alpha = softmax_s
  //   l_logit(t,s) = LeakyReLU(lu[tpos(t)] + lv[nbr(t,s)]);  lambda = softmax_s
  //   out[t] = sum_s alpha(t,s)*lambda(t,s)*P[nbr(t,s)]
  // With uniform_lambda, lambda = 1/fanout and lu/lv may be invalid.
  Var attentive_pool(Var p, Var au, Var av, Var lu, Var lv, const FanoutIndex* idx, double slope,
                     bool uniform_lambda, std::shared_ptr<AttentionStash>* stash_out = nullptr);

  // Seeds d(loss)/d(loss)=1 and replays records in reverse; every recorded op
  // is visited exactly once and grads are zeroed first.
  void backward(Var loss);

  std::size_t op_count() const { return records_.size(); }

 private:
  struct Slot {
    const Tensor* ext = nullptr;
    Tensor owned;
    Tensor grad;
    bool needs_grad = false;
  };

  Var push(Tensor value, bool needs_grad, const char* opname);
  Tensor& grad_buf(Var v);
  void accum(Var v, const Tensor& g);

  std::deque<Slot> slots_;
  std::vector<std::function<void()>> records_;
};

}  // namespace hge
