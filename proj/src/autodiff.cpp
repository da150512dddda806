#include "genfeat/autodiff.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "genfeat/errors.hpp"
#include "genfeat/kernels.hpp"

namespace genfeat {

namespace {

const kernels::Backend& K() { return kernels::active(); }

void require_same_shape(const Var& a, const Var& b, const char* where) {
  if (!a.value().same_shape(b.value())) {
    throw DataError(std::string(where) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                    shape_str(b.shape()));
  }
}

}  // namespace

Tensor& Node::ensure_grad() {
  if (!grad.defined()) grad = Tensor::zeros(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : n_(std::make_shared<Node>()) {
  n_->value = std::move(value);
  n_->requires_grad = requires_grad;
}

const Tensor& Var::grad() const {
  Tensor& g = n_->ensure_grad();
  return g;
}

void Var::zero_grad() {
  if (n_ && n_->grad.defined()) n_->grad.fill(0.0);
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  Var out(std::move(value), false);
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.requires_grad()) {
      needs = true;
      break;
    }
  }
  if (needs) {
    out.n_->requires_grad = true;
    out.n_->inputs.reserve(inputs.size());
    for (const Var& v : inputs) out.n_->inputs.push_back(v.node());
    out.n_->backward_fn = std::move(backward_fn);
  }
  return out;
}

void backward(const Var& loss) {
  if (!loss.defined()) throw DataError("backward: undefined loss");
  if (loss.value().numel() != 1) {
    throw DataError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  if (!std::isfinite(loss.value()(0))) {
    throw NumericError("backward: loss is not finite");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order over the sub-DAG that requires gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      Node* in = f.node->inputs[f.next_input++].get();
      if (in->requires_grad && !visited.count(in)) {
        visited.insert(in);
        stack.push_back({in, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.defined()) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.value().shape());
  K().add(a.value().data(), b.value().data(), out.data(), out.numel());
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (int i = 0; i < 2; ++i) {
      Node& in = *self.inputs[i];
      if (in.requires_grad) K().axpy(1.0, self.grad.data(), in.ensure_grad().data(), self.grad.numel());
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.value().shape());
  K().sub(a.value().data(), b.value().data(), out.data(), out.numel());
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& ia = *self.inputs[0];
    Node& ib = *self.inputs[1];
    if (ia.requires_grad) K().axpy(1.0, self.grad.data(), ia.ensure_grad().data(), self.grad.numel());
    if (ib.requires_grad) K().axpy(-1.0, self.grad.data(), ib.ensure_grad().data(), self.grad.numel());
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.value().shape());
  K().mul(a.value().data(), b.value().data(), out.data(), out.numel());
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& ia = *self.inputs[0];
    Node& ib = *self.inputs[1];
    std::size_t n = self.grad.numel();
    Tensor tmp(self.grad.shape());
    if (ia.requires_grad) {
      Tensor& g = ia.ensure_grad();
      K().mul(self.grad.data(), ib.value.data(), tmp.data(), n);
      K().add(g.data(), tmp.data(), g.data(), n);
    }
    if (ib.requires_grad) {
      Tensor& g = ib.ensure_grad();
      K().mul(self.grad.data(), ia.value.data(), tmp.data(), n);
      K().add(g.data(), tmp.data(), g.data(), n);
    }
  });
}

Var scale(const Var& x, real c) {
  Tensor out(x.value().shape());
  K().scale(x.value().data(), c, out.data(), out.numel());
  return make_op(std::move(out), {x}, [c](Node& self) {
    Node& in = *self.inputs[0];
    if (in.requires_grad) K().axpy(c, self.grad.data(), in.ensure_grad().data(), self.grad.numel());
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (xv.rank() < 2 || bv.rank() != 1 || xv.shape().back() != bv.extent(0)) {
    throw DataError("add_rowvec: incompatible shapes " + shape_str(xv.shape()) + " and " +
                    shape_str(bv.shape()));
  }
  std::size_t c = bv.extent(0);
  std::size_t rows = xv.numel() / c;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    K().add(xv.data() + r * c, bv.data(), out.data() + r * c, c);
  }
  return make_op(std::move(out), {x, b}, [c, rows](Node& self) {
    Node& ix = *self.inputs[0];
    Node& ib = *self.inputs[1];
    if (ix.requires_grad) {
      K().axpy(1.0, self.grad.data(), ix.ensure_grad().data(), self.grad.numel());
    }
    if (ib.requires_grad) {
      Tensor& gb = ib.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        K().add(gb.data(), self.grad.data() + r * c, gb.data(), c);
      }
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.extent(1) != bv.extent(0)) {
    throw DataError("matmul: incompatible shapes " + shape_str(av.shape()) + " and " +
                    shape_str(bv.shape()));
  }
  std::size_t m = av.extent(0), k = av.extent(1), n = bv.extent(1);
  Tensor out({m, n});
  K().matmul_nn(av.data(), bv.data(), out.data(), m, k, n);
  return make_op(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& ia = *self.inputs[0];
    Node& ib = *self.inputs[1];
    if (ia.requires_grad) {
      K().matmul_nt_acc(self.grad.data(), ib.value.data(), ia.ensure_grad().data(), m, n, k);
    }
    if (ib.requires_grad) {
      K().matmul_tn_acc(ia.value.data(), self.grad.data(), ib.ensure_grad().data(), k, m, n);
    }
  });
}

Var transpose2(const Var& x) {
  require_rank(x.value(), 2, "transpose");
  std::size_t m = x.value().extent(0), n = x.value().extent(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = x.value()(i, j);
  return make_op(std::move(out), {x}, [m, n](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g(i, j) += self.grad(j, i);
  });
}

Var reshape(const Var& x, std::vector<std::size_t> shape) {
  if (shape_numel(shape) != x.value().numel()) {
    throw DataError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor out(std::move(shape), std::vector<real>(x.value().data(), x.value().data() + x.value().numel()));
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (in.requires_grad) K().axpy(1.0, self.grad.data(), in.ensure_grad().data(), self.grad.numel());
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t len) {
  require_rank(x.value(), 2, "slice_cols");
  std::size_t rows = x.value().extent(0), cols = x.value().extent(1);
  if (len == 0 || start + len > cols) {
    throw DataError("slice_cols: range [" + std::to_string(start) + "," +
                    std::to_string(start + len) + ") out of " + std::to_string(cols));
  }
  Tensor out({rows, len});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < len; ++j) out(r, j) = x.value()(r, start + j);
  return make_op(std::move(out), {x}, [start, len, rows](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < len; ++j) g(r, start + j) += self.grad(r, j);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DataError("concat_cols: no inputs");
  std::size_t rows = parts[0].value().extent(0);
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank(p.value(), 2, "concat_cols");
    if (p.value().extent(0) != rows) throw DataError("concat_cols: row count mismatch");
    total += p.value().extent(1);
  }
  Tensor out({rows, total});
  std::size_t off = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    std::size_t w = p.value().extent(1);
    widths.push_back(w);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < w; ++j) out(r, off + j) = p.value()(r, j);
    off += w;
  }
  return make_op(std::move(out), parts, [rows, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = *self.inputs[i];
      std::size_t w = widths[i];
      if (in.requires_grad) {
        Tensor& g = in.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < w; ++j) g(r, j) += self.grad(r, off + j);
      }
      off += w;
    }
  });
}

Var time_slice(const Var& x, std::size_t t) {
  require_rank(x.value(), 3, "time_slice");
  std::size_t n = x.value().extent(0), tt = x.value().extent(1), c = x.value().extent(2);
  if (t >= tt) throw DataError("time_slice: index out of range");
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = x.value()(i, t, j);
  return make_op(std::move(out), {x}, [n, t, c](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) g(i, t, j) += self.grad(i, j);
  });
}

Var stack_time(const std::vector<Var>& steps) {
  if (steps.empty()) throw DataError("stack_time: no inputs");
  std::size_t n = steps[0].value().extent(0), c = steps[0].value().extent(1);
  for (const Var& s : steps) {
    require_rank(s.value(), 2, "stack_time");
    if (s.value().extent(0) != n || s.value().extent(1) != c) {
      throw DataError("stack_time: step shape mismatch");
    }
  }
  std::size_t tt = steps.size();
  Tensor out({n, tt, c});
  for (std::size_t t = 0; t < tt; ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) out(i, t, j) = steps[t].value()(i, j);
  return make_op(std::move(out), steps, [n, tt, c](Node& self) {
    for (std::size_t t = 0; t < tt; ++t) {
      Node& in = *self.inputs[t];
      if (!in.requires_grad) continue;
      Tensor& g = in.ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) g(i, j) += self.grad(i, t, j);
    }
  });
}

Var slice_axis0(const Var& x, std::size_t i) {
  require_rank(x.value(), 3, "slice_axis0");
  std::size_t n = x.value().extent(0), tt = x.value().extent(1), c = x.value().extent(2);
  if (i >= n) throw DataError("slice_axis0: index out of range");
  Tensor out({tt, c});
  const real* src = x.value().data() + i * tt * c;
  std::copy(src, src + tt * c, out.data());
  return make_op(std::move(out), {x}, [i, tt, c](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    K().axpy(1.0, self.grad.data(), g.data() + i * tt * c, tt * c);
  });
}

Var stack_axis0(const std::vector<Var>& samples) {
  if (samples.empty()) throw DataError("stack_axis0: no inputs");
  std::size_t tt = samples[0].value().extent(0), c = samples[0].value().extent(1);
  for (const Var& s : samples) {
    require_rank(s.value(), 2, "stack_axis0");
    if (s.value().extent(0) != tt || s.value().extent(1) != c) {
      throw DataError("stack_axis0: sample shape mismatch");
    }
  }
  std::size_t n = samples.size();
  Tensor out({n, tt, c});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(samples[i].value().data(), samples[i].value().data() + tt * c,
              out.data() + i * tt * c);
  }
  return make_op(std::move(out), samples, [n, tt, c](Node& self) {
    for (std::size_t i = 0; i < n; ++i) {
      Node& in = *self.inputs[i];
      if (!in.requires_grad) continue;
      K().axpy(1.0, self.grad.data() + i * tt * c, in.ensure_grad().data(), tt * c);
    }
  });
}

Var sum_all(const Var& x) {
  Tensor out = Tensor::scalar(K().sum(x.value().data(), x.value().numel()));
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    real g0 = self.grad(0);
    for (std::size_t i = 0; i < g.numel(); ++i) g(i) += g0;
  });
}

Var mean_all(const Var& x) {
  std::size_t n = x.value().numel();
  Tensor out = Tensor::scalar(K().sum(x.value().data(), n) / static_cast<real>(n));
  return make_op(std::move(out), {x}, [n](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    real g0 = self.grad(0) / static_cast<real>(n);
    for (std::size_t i = 0; i < g.numel(); ++i) g(i) += g0;
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    real v = x.value()(i);
    out(i) = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      real y = self.value(i);
      g(i) += self.grad(i) * y * (1.0 - y);
    }
  });
}

Var tanh_v(const Var& x) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out(i) = std::tanh(x.value()(i));
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      real y = self.value(i);
      g(i) += self.grad(i) * (1.0 - y * y);
    }
  });
}

Var elu(const Var& x, real alpha) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    real v = x.value()(i);
    out(i) = v > 0 ? v : alpha * (std::exp(v) - 1.0);
  }
  return make_op(std::move(out), {x}, [alpha](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      real v = in.value(i);
      g(i) += self.grad(i) * (v > 0 ? 1.0 : self.value(i) + alpha);
    }
  });
}

Var leaky_relu(const Var& x, real slope) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    real v = x.value()(i);
    out(i) = v > 0 ? v : slope * v;
  }
  return make_op(std::move(out), {x}, [slope](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      g(i) += self.grad(i) * (in.value(i) > 0 ? 1.0 : slope);
    }
  });
}

Var exp_v(const Var& x) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out(i) = std::exp(x.value()(i));
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) g(i) += self.grad(i) * self.value(i);
  });
}

Var softmax_rows(const Var& x) {
  require_rank(x.value(), 2, "softmax");
  std::size_t rows = x.value().extent(0), cols = x.value().extent(1);
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    real mx = x.value()(r, 0);
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x.value()(r, j));
    real denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      real e = std::exp(x.value()(r, j) - mx);
      out(r, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < cols; ++j) out(r, j) /= denom;
  }
  return make_op(std::move(out), {x}, [rows, cols](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      real dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += self.grad(r, j) * self.value(r, j);
      for (std::size_t j = 0; j < cols; ++j) {
        g(r, j) += self.value(r, j) * (self.grad(r, j) - dot);
      }
    }
  });
}

}  // namespace genfeat
