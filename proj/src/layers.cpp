#include "genfeat/layers.hpp"

#include <algorithm>
#include <cmath>

#include "genfeat/errors.hpp"
#include "genfeat/kernels.hpp"

namespace genfeat {

namespace {

const kernels::Backend& K() { return kernels::active(); }

struct ConvGeom {
  std::size_t t_out;
  std::size_t pad_left;
};

// Same padding: output covers ceil(T/stride) positions, split the overhang
// with the extra column on the right.
ConvGeom conv_geom(std::size_t t_in, std::size_t k, std::size_t stride) {
  ConvGeom g;
  g.t_out = (t_in + stride - 1) / stride;
  std::size_t span = (g.t_out - 1) * stride + k;
  std::size_t pad_total = span > t_in ? span - t_in : 0;
  g.pad_left = pad_total / 2;
  return g;
}

struct TapRange {
  std::size_t t0, t1;  // inclusive output range
  long off;            // input row of output t0 for this tap
  bool empty;
};

TapRange tap_range(std::size_t j, std::size_t pad_left, std::size_t t_in, std::size_t stride,
                   std::size_t t_out) {
  TapRange r{0, 0, 0, true};
  long off = static_cast<long>(j) - static_cast<long>(pad_left);
  long s = static_cast<long>(stride);
  long t0 = off >= 0 ? 0 : (-off + s - 1) / s;
  long last = static_cast<long>(t_in) - 1 - off;
  if (last < 0) return r;
  long t1 = last / s;
  if (t1 >= static_cast<long>(t_out)) t1 = static_cast<long>(t_out) - 1;
  if (t0 > t1) return r;
  r.t0 = static_cast<std::size_t>(t0);
  r.t1 = static_cast<std::size_t>(t1);
  r.off = off;
  r.empty = false;
  return r;
}

// y[t_out,cout] += same-padded conv of x[t_in,cin] with w[k,cin,cout].
void conv_fwd_acc(const real* x, const real* w, real* y, std::size_t t_in, std::size_t cin,
                  std::size_t cout, std::size_t k, std::size_t stride, std::size_t t_out,
                  std::size_t pad_left, std::vector<real>& scratch) {
  for (std::size_t j = 0; j < k; ++j) {
    TapRange r = tap_range(j, pad_left, t_in, stride, t_out);
    if (r.empty) continue;
    std::size_t rows = r.t1 - r.t0 + 1;
    const real* wj = w + j * cin * cout;
    std::size_t first_in = static_cast<std::size_t>(static_cast<long>(r.t0 * stride) + r.off);
    if (stride == 1) {
      K().matmul_nn_acc(x + first_in * cin, wj, y + r.t0 * cout, rows, cin, cout);
    } else {
      scratch.assign(rows * cin, 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        const real* src = x + (first_in + i * stride) * cin;
        std::copy(src, src + cin, scratch.data() + i * cin);
      }
      K().matmul_nn_acc(scratch.data(), wj, y + r.t0 * cout, rows, cin, cout);
    }
  }
}

// dx[t_in,cin] += adjoint of the conv above applied to dy[t_out,cout].
void conv_bwd_input_acc(const real* dy, const real* w, real* dx, std::size_t t_in,
                        std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
                        std::size_t t_out, std::size_t pad_left, std::vector<real>& scratch) {
  for (std::size_t j = 0; j < k; ++j) {
    TapRange r = tap_range(j, pad_left, t_in, stride, t_out);
    if (r.empty) continue;
    std::size_t rows = r.t1 - r.t0 + 1;
    const real* wj = w + j * cin * cout;
    std::size_t first_in = static_cast<std::size_t>(static_cast<long>(r.t0 * stride) + r.off);
    if (stride == 1) {
      K().matmul_nt_acc(dy + r.t0 * cout, wj, dx + first_in * cin, rows, cout, cin);
    } else {
      scratch.assign(rows * cin, 0.0);
      K().matmul_nt_acc(dy + r.t0 * cout, wj, scratch.data(), rows, cout, cin);
      for (std::size_t i = 0; i < rows; ++i) {
        K().add(dx + (first_in + i * stride) * cin, scratch.data() + i * cin,
                dx + (first_in + i * stride) * cin, cin);
      }
    }
  }
}

// dw[k,cin,cout] += correlation of x with dy.
void conv_bwd_kernel_acc(const real* x, const real* dy, real* dw, std::size_t t_in,
                         std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
                         std::size_t t_out, std::size_t pad_left, std::vector<real>& scratch) {
  for (std::size_t j = 0; j < k; ++j) {
    TapRange r = tap_range(j, pad_left, t_in, stride, t_out);
    if (r.empty) continue;
    std::size_t rows = r.t1 - r.t0 + 1;
    real* dwj = dw + j * cin * cout;
    std::size_t first_in = static_cast<std::size_t>(static_cast<long>(r.t0 * stride) + r.off);
    if (stride == 1) {
      K().matmul_tn_acc(x + first_in * cin, dy + r.t0 * cout, dwj, cin, rows, cout);
    } else {
      scratch.assign(rows * cin, 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        const real* src = x + (first_in + i * stride) * cin;
        std::copy(src, src + cin, scratch.data() + i * cin);
      }
      K().matmul_tn_acc(scratch.data(), dy + r.t0 * cout, dwj, cin, rows, cout);
    }
  }
}

std::function<void(Tensor&)> pick_init(Rng& rng, InitKind kind, std::size_t fan_in,
                                       std::size_t fan_out) {
  if (kind == InitKind::Normal02) return normal_init(rng, 0.02);
  return glorot_init(rng, fan_in, fan_out);
}

}  // namespace

Var apply_activation(const Var& x, Activation act) {
  switch (act) {
    case Activation::Linear:
      return x;
    case Activation::Sigmoid:
      return sigmoid(x);
    case Activation::Tanh:
      return tanh_v(x);
    case Activation::Elu:
      return elu(x, 1.0);
    case Activation::LeakyRelu:
      return leaky_relu(x, 0.2);
    case Activation::Softmax:
      return softmax_rows(x);
  }
  throw DataError("unknown activation");
}

Var dense(ParamStore& store, const std::string& prefix, const Var& x, std::size_t in,
          std::size_t out, Activation act, Rng& init_rng, InitKind init) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DataError("dense: input must be rank 2 or 3, got " + shape_str(xv.shape()));
  }
  if (xv.shape().back() != in) {
    throw DataError("dense " + prefix + ": input width " + std::to_string(xv.shape().back()) +
                    " != " + std::to_string(in));
  }
  Var& w = store.get_or_create(prefix + "/w", {in, out}, pick_init(init_rng, init, in, out));
  Var& b = store.get_or_create(prefix + "/b", {out}, zeros_init());
  bool rank3 = xv.rank() == 3;
  Var x2 = rank3 ? reshape(x, {xv.extent(0) * xv.extent(1), in}) : x;
  Var z = apply_activation(add_rowvec(matmul(x2, w), b), act);
  if (rank3) z = reshape(z, {xv.extent(0), xv.extent(1), out});
  return z;
}

Var embedding_lookup(ParamStore& store, const std::string& prefix,
                     const std::vector<int>& indices, std::size_t vocab, std::size_t dim,
                     Rng& init_rng, InitKind init) {
  if (indices.empty()) throw DataError("embedding_lookup: empty index sequence");
  Var& table = store.get_or_create(prefix + "/table", {vocab, dim},
                                   pick_init(init_rng, init, vocab, dim));
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= vocab) {
      throw DataError("embedding_lookup: index " + std::to_string(idx) + " out of vocabulary " +
                      std::to_string(vocab));
    }
  }
  std::size_t t = indices.size();
  Tensor out({t, dim});
  for (std::size_t i = 0; i < t; ++i) {
    const real* src = table.value().data() + static_cast<std::size_t>(indices[i]) * dim;
    std::copy(src, src + dim, out.data() + i * dim);
  }
  std::vector<int> idx = indices;
  return make_op(std::move(out), {table}, [idx = std::move(idx), dim](Node& self) {
    Node& tab = *self.inputs[0];
    if (!tab.requires_grad) return;
    Tensor& g = tab.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      K().add(g.data() + static_cast<std::size_t>(idx[i]) * dim, self.grad.data() + i * dim,
              g.data() + static_cast<std::size_t>(idx[i]) * dim, dim);
    }
  });
}

Tensor embed_rows(const Tensor& table, const std::vector<int>& indices) {
  require_rank(table, 2, "embed_rows");
  std::size_t vocab = table.extent(0), dim = table.extent(1);
  if (indices.empty()) throw DataError("embed_rows: empty index sequence");
  Tensor out({indices.size(), dim});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= vocab) {
      throw DataError("embed_rows: index " + std::to_string(indices[i]) +
                      " out of vocabulary " + std::to_string(vocab));
    }
    const real* src = table.data() + static_cast<std::size_t>(indices[i]) * dim;
    std::copy(src, src + dim, out.data() + i * dim);
  }
  return out;
}

LstmOut lstm(ParamStore& store, const std::string& prefix, const Var& x, std::size_t in,
             std::size_t units, Rng& init_rng) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "lstm");
  if (xv.extent(2) != in) {
    throw DataError("lstm " + prefix + ": input width " + std::to_string(xv.extent(2)) +
                    " != " + std::to_string(in));
  }
  std::size_t n = xv.extent(0), t_len = xv.extent(1);
  Var& w = store.get_or_create(prefix + "/w", {in, 4 * units},
                               glorot_init(init_rng, in, 4 * units));
  Var& r = store.get_or_create(prefix + "/r", {units, 4 * units},
                               glorot_init(init_rng, units, 4 * units));
  Var& b = store.get_or_create(prefix + "/b", {4 * units}, zeros_init());

  Var h(Tensor::zeros({n, units}), false);
  Var c(Tensor::zeros({n, units}), false);
  std::vector<Var> steps;
  steps.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    Var xt = time_slice(x, t);
    Var z = add_rowvec(add(matmul(xt, w), matmul(h, r)), b);
    Var gi = sigmoid(slice_cols(z, 0, units));
    Var gf = sigmoid(slice_cols(z, units, units));
    Var gg = tanh_v(slice_cols(z, 2 * units, units));
    Var go = sigmoid(slice_cols(z, 3 * units, units));
    c = add(mul(gf, c), mul(gi, gg));
    h = mul(go, tanh_v(c));
    steps.push_back(h);
  }
  LstmOut out;
  out.sequence = stack_time(steps);
  out.final_state = h;
  return out;
}

LstmOut bidirectional_lstm(ParamStore& store, const std::string& prefix, const Var& x,
                           std::size_t in, std::size_t units, Rng& init_rng) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "bidirectional_lstm");
  std::size_t n = xv.extent(0), t_len = xv.extent(1);

  LstmOut fwd = lstm(store, prefix + "/fwd", x, in, units, init_rng);

  Var& w = store.get_or_create(prefix + "/bwd/w", {in, 4 * units},
                               glorot_init(init_rng, in, 4 * units));
  Var& r = store.get_or_create(prefix + "/bwd/r", {units, 4 * units},
                               glorot_init(init_rng, units, 4 * units));
  Var& b = store.get_or_create(prefix + "/bwd/b", {4 * units}, zeros_init());

  Var h(Tensor::zeros({n, units}), false);
  Var c(Tensor::zeros({n, units}), false);
  std::vector<Var> rev(t_len);
  for (std::size_t step = 0; step < t_len; ++step) {
    std::size_t t = t_len - 1 - step;
    Var xt = time_slice(x, t);
    Var z = add_rowvec(add(matmul(xt, w), matmul(h, r)), b);
    Var gi = sigmoid(slice_cols(z, 0, units));
    Var gf = sigmoid(slice_cols(z, units, units));
    Var gg = tanh_v(slice_cols(z, 2 * units, units));
    Var go = sigmoid(slice_cols(z, 3 * units, units));
    c = add(mul(gf, c), mul(gi, gg));
    h = mul(go, tanh_v(c));
    rev[t] = h;
  }

  std::vector<Var> steps;
  steps.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    steps.push_back(concat_cols({time_slice(fwd.sequence, t), rev[t]}));
  }
  LstmOut out;
  out.sequence = stack_time(steps);
  out.final_state = concat_cols({fwd.final_state, rev[0]});
  return out;
}

namespace {

Var conv1d_node(const Var& x, const Var& w, std::size_t in_ch, std::size_t out_ch,
                std::size_t kernel, std::size_t stride) {
  const Tensor& xv = x.value();
  std::size_t n = xv.extent(0), t_in = xv.extent(1);
  ConvGeom geom = conv_geom(t_in, kernel, stride);
  Tensor out({n, geom.t_out, out_ch});
  std::vector<real> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    conv_fwd_acc(xv.data() + i * t_in * in_ch, w.value().data(), out.data() + i * geom.t_out * out_ch,
                 t_in, in_ch, out_ch, kernel, stride, geom.t_out, geom.pad_left, scratch);
  }
  std::size_t t_out = geom.t_out, pad_left = geom.pad_left;
  return make_op(std::move(out), {x, w},
                 [n, t_in, in_ch, out_ch, kernel, stride, t_out, pad_left](Node& self) {
                   Node& ix = *self.inputs[0];
                   Node& iw = *self.inputs[1];
                   std::vector<real> scratch;
                   if (ix.requires_grad) {
                     Tensor& g = ix.ensure_grad();
                     for (std::size_t i = 0; i < n; ++i) {
                       conv_bwd_input_acc(self.grad.data() + i * t_out * out_ch, iw.value.data(),
                                          g.data() + i * t_in * in_ch, t_in, in_ch, out_ch, kernel,
                                          stride, t_out, pad_left, scratch);
                     }
                   }
                   if (iw.requires_grad) {
                     Tensor& g = iw.ensure_grad();
                     for (std::size_t i = 0; i < n; ++i) {
                       conv_bwd_kernel_acc(ix.value.data() + i * t_in * in_ch,
                                           self.grad.data() + i * t_out * out_ch, g.data(), t_in,
                                           in_ch, out_ch, kernel, stride, t_out, pad_left, scratch);
                     }
                   }
                 });
}

Var conv1d_transpose_node(const Var& x, const Var& w, std::size_t in_ch, std::size_t out_ch,
                          std::size_t kernel) {
  // Scatter adjoint of a stride-2 conv whose kernel is w[kernel,out_ch,in_ch].
  const std::size_t stride = 2;
  const Tensor& xv = x.value();
  std::size_t n = xv.extent(0), t_in = xv.extent(1);
  std::size_t t_out = stride * t_in;
  ConvGeom geom = conv_geom(t_out, kernel, stride);  // geometry of the adjoint conv
  Tensor out({n, t_out, out_ch});
  std::vector<real> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    conv_bwd_input_acc(xv.data() + i * t_in * in_ch, w.value().data(),
                       out.data() + i * t_out * out_ch, t_out, out_ch, in_ch, kernel, stride,
                       t_in, geom.pad_left, scratch);
  }
  std::size_t pad_left = geom.pad_left;
  return make_op(std::move(out), {x, w},
                 [n, t_in, in_ch, out_ch, kernel, t_out, pad_left](Node& self) {
                   const std::size_t stride = 2;
                   Node& ix = *self.inputs[0];
                   Node& iw = *self.inputs[1];
                   std::vector<real> scratch;
                   if (ix.requires_grad) {
                     Tensor& g = ix.ensure_grad();
                     for (std::size_t i = 0; i < n; ++i) {
                       conv_fwd_acc(self.grad.data() + i * t_out * out_ch, iw.value.data(),
                                    g.data() + i * t_in * in_ch, t_out, out_ch, in_ch, kernel,
                                    stride, t_in, pad_left, scratch);
                     }
                   }
                   if (iw.requires_grad) {
                     Tensor& g = iw.ensure_grad();
                     for (std::size_t i = 0; i < n; ++i) {
                       conv_bwd_kernel_acc(self.grad.data() + i * t_out * out_ch,
                                           ix.value.data() + i * t_in * in_ch, g.data(), t_out,
                                           out_ch, in_ch, kernel, stride, t_in, pad_left, scratch);
                     }
                   }
                 });
}

}  // namespace

Var conv1d(ParamStore& store, const std::string& prefix, const Var& x, std::size_t in_ch,
           std::size_t out_ch, std::size_t kernel, std::size_t stride, Activation act,
           Rng& init_rng, InitKind init) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "conv1d");
  if (xv.extent(2) != in_ch) {
    throw DataError("conv1d " + prefix + ": input channels " + std::to_string(xv.extent(2)) +
                    " != " + std::to_string(in_ch));
  }
  if (stride != 1 && stride != 2) {
    throw DataError("conv1d: stride must be 1 or 2, got " + std::to_string(stride));
  }
  if (kernel == 0 || kernel > kMaxKernelWidth) {
    throw DataError("conv1d: kernel width " + std::to_string(kernel) + " outside [1," +
                    std::to_string(kMaxKernelWidth) + "]");
  }
  Var& w = store.get_or_create(prefix + "/w", {kernel, in_ch, out_ch},
                               pick_init(init_rng, init, kernel * in_ch, kernel * out_ch));
  Var& b = store.get_or_create(prefix + "/b", {out_ch}, zeros_init());
  Var y = add_rowvec(conv1d_node(x, w, in_ch, out_ch, kernel, stride), b);
  return apply_activation(y, act);
}

Var conv1d_transpose(ParamStore& store, const std::string& prefix, const Var& x,
                     std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Activation act,
                     Rng& init_rng, InitKind init) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "conv1d_transpose");
  if (xv.extent(2) != in_ch) {
    throw DataError("conv1d_transpose " + prefix + ": input channels " +
                    std::to_string(xv.extent(2)) + " != " + std::to_string(in_ch));
  }
  if (kernel == 0 || kernel > kMaxKernelWidth) {
    throw DataError("conv1d_transpose: kernel width " + std::to_string(kernel) + " outside [1," +
                    std::to_string(kMaxKernelWidth) + "]");
  }
  Var& w = store.get_or_create(prefix + "/w", {kernel, out_ch, in_ch},
                               pick_init(init_rng, init, kernel * in_ch, kernel * out_ch));
  Var& b = store.get_or_create(prefix + "/b", {out_ch}, zeros_init());
  Var y = add_rowvec(conv1d_transpose_node(x, w, in_ch, out_ch, kernel), b);
  return apply_activation(y, act);
}

Var max_pool1d(const Var& x) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "max_pool1d");
  std::size_t n = xv.extent(0), t_in = xv.extent(1), c = xv.extent(2);
  std::size_t t_out = (t_in + 1) / 2;
  Tensor out({n, t_out, c});
  std::vector<std::size_t> arg(n * t_out * c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < t_out; ++t) {
      std::size_t a = 2 * t;
      std::size_t b = std::min(2 * t + 1, t_in - 1);  // odd length repeats the last frame
      for (std::size_t j = 0; j < c; ++j) {
        real va = xv(i, a, j), vb = xv(i, b, j);
        std::size_t flat_out = (i * t_out + t) * c + j;
        if (vb > va) {
          out(i, t, j) = vb;
          arg[flat_out] = (i * t_in + b) * c + j;
        } else {
          out(i, t, j) = va;
          arg[flat_out] = (i * t_in + a) * c + j;
        }
      }
    }
  }
  return make_op(std::move(out), {x}, [arg = std::move(arg)](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < arg.size(); ++i) g(arg[i]) += self.grad(i);
  });
}

Var global_avg_pool1d(const Var& x) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "global_avg_pool1d");
  std::size_t n = xv.extent(0), t_len = xv.extent(1), c = xv.extent(2);
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < t_len; ++t) {
      K().add(out.data() + i * c, xv.data() + (i * t_len + t) * c, out.data() + i * c, c);
    }
    K().scale(out.data() + i * c, 1.0 / static_cast<real>(t_len), out.data() + i * c, c);
  }
  return make_op(std::move(out), {x}, [n, t_len, c](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < t_len; ++t) {
        K().axpy(1.0 / static_cast<real>(t_len), self.grad.data() + i * c,
                 g.data() + (i * t_len + t) * c, c);
      }
    }
  });
}

Var batch_norm1d(ParamStore& store, const std::string& prefix, const Var& x,
                 std::size_t channels, Mode mode, double momentum, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DataError("batch_norm1d: input must be rank 2 or 3, got " + shape_str(xv.shape()));
  }
  if (xv.shape().back() != channels) {
    throw DataError("batch_norm1d " + prefix + ": channel count " +
                    std::to_string(xv.shape().back()) + " != " + std::to_string(channels));
  }
  Var& gamma = store.get_or_create(prefix + "/gamma", {channels}, ones_init());
  Var& beta = store.get_or_create(prefix + "/beta", {channels}, zeros_init());
  Var& rmean = store.get_or_create_buffer(prefix + "/running_mean", {channels}, zeros_init());
  Var& rvar = store.get_or_create_buffer(prefix + "/running_var", {channels}, ones_init());

  std::size_t rows = xv.numel() / channels;
  Tensor mean({channels}), var({channels});
  if (mode == Mode::Train) {
    for (std::size_t r = 0; r < rows; ++r) {
      K().add(mean.data(), xv.data() + r * channels, mean.data(), channels);
    }
    K().scale(mean.data(), 1.0 / static_cast<real>(rows), mean.data(), channels);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < channels; ++j) {
        real d = xv(r * channels + j) - mean(j);
        var(j) += d * d;
      }
    }
    K().scale(var.data(), 1.0 / static_cast<real>(rows), var.data(), channels);
    Tensor& rm = rmean.mutable_value();
    Tensor& rv = rvar.mutable_value();
    for (std::size_t j = 0; j < channels; ++j) {
      rm(j) = momentum * rm(j) + (1.0 - momentum) * mean(j);
      rv(j) = momentum * rv(j) + (1.0 - momentum) * var(j);
    }
  } else {
    mean = rmean.value();
    var = rvar.value();
  }

  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < channels; ++j) {
      real xh = (xv(r * channels + j) - mean(j)) / std::sqrt(var(j) + eps);
      xhat(r * channels + j) = xh;
      out(r * channels + j) = gamma.value()(j) * xh + beta.value()(j);
    }
  }

  bool train = mode == Mode::Train;
  return make_op(
      std::move(out), {x, gamma, beta},
      [rows, channels, eps, train, mean = std::move(mean), var = std::move(var),
       xhat = std::move(xhat)](Node& self) {
        Node& ix = *self.inputs[0];
        Node& igamma = *self.inputs[1];
        Node& ibeta = *self.inputs[2];
        if (igamma.requires_grad) {
          Tensor& g = igamma.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < channels; ++j)
              g(j) += self.grad(r * channels + j) * xhat(r * channels + j);
        }
        if (ibeta.requires_grad) {
          Tensor& g = ibeta.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < channels; ++j) g(j) += self.grad(r * channels + j);
        }
        if (!ix.requires_grad) return;
        Tensor& gx = ix.ensure_grad();
        if (!train) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < channels; ++j)
              gx(r * channels + j) += self.grad(r * channels + j) * igamma.value(j) /
                                      std::sqrt(var(j) + eps);
          return;
        }
        // Batch statistics participate in the gradient.
        for (std::size_t j = 0; j < channels; ++j) {
          real inv_std = 1.0 / std::sqrt(var(j) + eps);
          real sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t r = 0; r < rows; ++r) {
            real dxhat = self.grad(r * channels + j) * igamma.value(j);
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat(r * channels + j);
          }
          real inv_rows = 1.0 / static_cast<real>(rows);
          for (std::size_t r = 0; r < rows; ++r) {
            real dxhat = self.grad(r * channels + j) * igamma.value(j);
            gx(r * channels + j) += inv_std * (dxhat - inv_rows * sum_dxhat -
                                               xhat(r * channels + j) * inv_rows * sum_dxhat_xhat);
          }
        }
      });
}

Var dropout(const Var& x, double rate, Mode mode, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw DataError("dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  if (mode == Mode::Infer || rate == 0.0) return x;
  Tensor mask(x.value().shape());
  real keep = 1.0 - rate;
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    mask(i) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  }
  return mul(x, Var(std::move(mask), false));
}

namespace {

Var attention_core(ParamStore& store, const std::string& prefix, const Var& x2, std::size_t dim,
                   std::size_t heads, Rng& init_rng) {
  Var q = dense(store, prefix + "/q", x2, dim, dim, Activation::Linear, init_rng);
  Var k = dense(store, prefix + "/k", x2, dim, dim, Activation::Linear, init_rng);
  Var v = dense(store, prefix + "/v", x2, dim, dim, Activation::Linear, init_rng);
  std::size_t dh = dim / heads;
  std::vector<Var> ctx;
  ctx.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul(qh, transpose2(kh)), 1.0 / std::sqrt(static_cast<real>(dh)));
    ctx.push_back(matmul(softmax_rows(scores), vh));
  }
  return dense(store, prefix + "/o", concat_cols(ctx), dim, dim, Activation::Linear, init_rng);
}

}  // namespace

Var multi_head_attention(ParamStore& store, const std::string& prefix, const Var& x,
                         std::size_t dim, std::size_t heads, Rng& init_rng) {
  const Tensor& xv = x.value();
  if (heads == 0 || dim % heads != 0) {
    throw DataError("multi_head_attention: heads " + std::to_string(heads) +
                    " must divide model dim " + std::to_string(dim));
  }
  if (xv.shape().back() != dim) {
    throw DataError("multi_head_attention " + prefix + ": input width " +
                    std::to_string(xv.shape().back()) + " != " + std::to_string(dim));
  }
  if (xv.rank() == 2) return attention_core(store, prefix, x, dim, heads, init_rng);
  require_rank(xv, 3, "multi_head_attention");
  std::vector<Var> samples;
  samples.reserve(xv.extent(0));
  for (std::size_t i = 0; i < xv.extent(0); ++i) {
    samples.push_back(attention_core(store, prefix, slice_axis0(x, i), dim, heads, init_rng));
  }
  return stack_axis0(samples);
}

Var repeat_vector(const Var& x, std::size_t times) {
  if (times == 0) throw DataError("repeat_vector: times must be positive");
  const Tensor& xv = x.value();
  if (xv.rank() == 1) {
    std::size_t d = xv.extent(0);
    Tensor out({times, d});
    for (std::size_t t = 0; t < times; ++t) std::copy(xv.data(), xv.data() + d, out.data() + t * d);
    return make_op(std::move(out), {x}, [times, d](Node& self) {
      Node& in = *self.inputs[0];
      if (!in.requires_grad) return;
      Tensor& g = in.ensure_grad();
      for (std::size_t t = 0; t < times; ++t) K().add(g.data(), self.grad.data() + t * d, g.data(), d);
    });
  }
  require_rank(xv, 2, "repeat_vector");
  std::size_t n = xv.extent(0), d = xv.extent(1);
  Tensor out({n, times, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < times; ++t)
      std::copy(xv.data() + i * d, xv.data() + (i + 1) * d, out.data() + (i * times + t) * d);
  return make_op(std::move(out), {x}, [n, times, d](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < times; ++t)
        K().add(g.data() + i * d, self.grad.data() + (i * times + t) * d, g.data() + i * d, d);
  });
}

void LayerSpec::validate() const {
  if (stride != 1 && stride != 2) {
    throw DataError("layer spec: stride must be 1 or 2, got " + std::to_string(stride));
  }
  if (rate < 0.0 || rate >= 1.0) {
    throw DataError("layer spec: dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  switch (kind) {
    case LayerKind::Dense:
    case LayerKind::Lstm:
    case LayerKind::BidirectionalLstm:
      if (input_dim == 0 || units == 0) throw DataError("layer spec: zero width");
      break;
    case LayerKind::EmbeddingLookup:
      if (vocab == 0 || units == 0) throw DataError("layer spec: zero embedding size");
      break;
    case LayerKind::Conv1d:
    case LayerKind::Conv1dTranspose:
      if (input_dim == 0 || units == 0) throw DataError("layer spec: zero channel count");
      if (kernel == 0 || kernel > kMaxKernelWidth) {
        throw DataError("layer spec: kernel width " + std::to_string(kernel) + " outside [1," +
                        std::to_string(kMaxKernelWidth) + "]");
      }
      break;
    case LayerKind::BatchNorm1d:
      if (input_dim == 0) throw DataError("layer spec: zero channel count");
      break;
    case LayerKind::MultiHeadAttention:
      if (input_dim == 0 || heads == 0 || input_dim % heads != 0) {
        throw DataError("layer spec: heads must divide model dim");
      }
      break;
    case LayerKind::RepeatVector:
      if (times == 0) throw DataError("layer spec: repeat count must be positive");
      break;
    case LayerKind::MaxPool1d:
    case LayerKind::GlobalAvgPool1d:
    case LayerKind::Dropout:
      break;
  }
}

Var layer_forward(const LayerSpec& spec, ParamStore& store, const std::string& prefix,
                  const Var& x, Mode mode, Rng& init_rng, Rng* mask_rng,
                  const std::vector<int>* indices) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::Dense:
      return dense(store, prefix, x, spec.input_dim, spec.units, spec.activation, init_rng);
    case LayerKind::EmbeddingLookup:
      if (!indices) throw DataError("embedding layer needs an index sequence");
      return embedding_lookup(store, prefix, *indices, spec.vocab, spec.units, init_rng);
    case LayerKind::Lstm:
      return lstm(store, prefix, x, spec.input_dim, spec.units, init_rng).sequence;
    case LayerKind::BidirectionalLstm:
      return bidirectional_lstm(store, prefix, x, spec.input_dim, spec.units, init_rng).sequence;
    case LayerKind::Conv1d:
      return conv1d(store, prefix, x, spec.input_dim, spec.units, spec.kernel, spec.stride,
                    spec.activation, init_rng);
    case LayerKind::Conv1dTranspose:
      return conv1d_transpose(store, prefix, x, spec.input_dim, spec.units, spec.kernel,
                              spec.activation, init_rng);
    case LayerKind::MaxPool1d:
      return max_pool1d(x);
    case LayerKind::GlobalAvgPool1d:
      return global_avg_pool1d(x);
    case LayerKind::BatchNorm1d:
      return batch_norm1d(store, prefix, x, spec.input_dim, mode);
    case LayerKind::Dropout: {
      if (mode == Mode::Train && spec.rate > 0.0 && !mask_rng) {
        throw DataError("dropout layer needs a mask stream in train mode");
      }
      static Rng unused(0);
      return dropout(x, spec.rate, mode, mask_rng ? *mask_rng : unused);
    }
    case LayerKind::MultiHeadAttention:
      return multi_head_attention(store, prefix, x, spec.input_dim, spec.heads, init_rng);
    case LayerKind::RepeatVector:
      return repeat_vector(x, spec.times);
  }
  throw DataError("unknown layer kind");
}

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::EmbeddingLookup: return "embedding-lookup";
    case LayerKind::Lstm: return "lstm";
    case LayerKind::BidirectionalLstm: return "bidirectional-lstm";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::Conv1dTranspose: return "conv1d-transpose";
    case LayerKind::MaxPool1d: return "max-pool1d";
    case LayerKind::GlobalAvgPool1d: return "global-avg-pool1d";
    case LayerKind::BatchNorm1d: return "batch-norm1d";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::MultiHeadAttention: return "multi-head-attention";
    case LayerKind::RepeatVector: return "repeat-vector";
  }
  return "unknown";
}

}  // namespace genfeat
