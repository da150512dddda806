#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "genfeat/tensor.hpp"

namespace genfeat {

// One tape entry. `backward_fn` reads this node's grad and accumulates into
// the inputs' grads; it is only stored when some input requires a gradient.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};

// Value handle into the graph. Copies share the node.
class Var {
public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Tensor& value() const { return n_->value; }
  Tensor& mutable_value() { return n_->value; }
  const Tensor& grad() const;
  bool requires_grad() const { return n_ && n_->requires_grad; }
  void zero_grad();
  const std::shared_ptr<Node>& node() const { return n_; }

  const std::vector<std::size_t>& shape() const { return n_->value.shape(); }

private:
  std::shared_ptr<Node> n_;
  friend Var make_op(Tensor, std::vector<Var>, std::function<void(Node&)>);
};

// Builds a non-leaf node; drops the tape info when no input needs gradients.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

// Accumulates gradients of a scalar loss into every reachable node that
// requires them. Non-scalar loss or non-finite loss value throws.
void backward(const Var& loss);

// Elementwise; both operands must have identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, real c);

// x: [R,C] or [N,T,C]; b: [C] broadcast over leading axes.
Var add_rowvec(const Var& x, const Var& b);

Var matmul(const Var& a, const Var& b);  // [m,k] x [k,n]
Var transpose2(const Var& x);
Var reshape(const Var& x, std::vector<std::size_t> shape);
Var slice_cols(const Var& x, std::size_t start, std::size_t len);
Var concat_cols(const std::vector<Var>& parts);

Var time_slice(const Var& x, std::size_t t);        // [N,T,C] -> [N,C]
Var stack_time(const std::vector<Var>& steps);      // T x [N,C] -> [N,T,C]
Var slice_axis0(const Var& x, std::size_t i);       // [N,T,C] -> [T,C]
Var stack_axis0(const std::vector<Var>& samples);   // N x [T,C] -> [N,T,C]

Var sum_all(const Var& x);
Var mean_all(const Var& x);

Var sigmoid(const Var& x);
Var tanh_v(const Var& x);
Var elu(const Var& x, real alpha = 1.0);
Var leaky_relu(const Var& x, real slope = 0.2);
Var exp_v(const Var& x);
Var softmax_rows(const Var& x);  // rank 2, softmax along the last axis

}  // namespace genfeat
