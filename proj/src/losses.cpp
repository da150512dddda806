#include "genfeat/losses.hpp"

#include <cmath>

#include "genfeat/errors.hpp"

namespace genfeat {

namespace {
constexpr real kProbClamp = 1e-7;

real clamp_prob(real p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}
}  // namespace

Var mean_squared_error(const Var& pred, const Tensor& target) {
  if (!pred.value().same_shape(target)) {
    throw DataError("mean_squared_error: shape mismatch " + shape_str(pred.shape()) + " vs " +
                    shape_str(target.shape()));
  }
  std::size_t n = target.numel();
  real acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    real d = pred.value()(i) - target(i);
    acc += d * d;
  }
  Tensor t = target;
  return make_op(Tensor::scalar(acc / static_cast<real>(n)), {pred}, [t = std::move(t), n](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.ensure_grad();
    real s = 2.0 * self.grad(0) / static_cast<real>(n);
    for (std::size_t i = 0; i < n; ++i) g(i) += s * (in.value(i) - t(i));
  });
}

Var binary_cross_entropy(const Var& pred, const Tensor& target) {
  if (!pred.value().same_shape(target)) {
    throw DataError("binary_cross_entropy: shape mismatch " + shape_str(pred.shape()) + " vs " +
                    shape_str(target.shape()));
  }
  std::size_t n = target.numel();
  for (std::size_t i = 0; i < n; ++i) {
    if (target(i) != 0.0 && target(i) != 1.0) {
      throw DataError("binary_cross_entropy: targets must be 0 or 1, got " +
                      std::to_string(target(i)));
    }
  }
  real acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    real p = clamp_prob(pred.value()(i));
    acc += target(i) == 1.0 ? -std::log(p) : -std::log(1.0 - p);
  }
  Tensor t = target;
  return make_op(Tensor::scalar(acc / static_cast<real>(n)), {pred},
                 [t = std::move(t), n](Node& self) {
                   Node& in = *self.inputs[0];
                   if (!in.requires_grad) return;
                   Tensor& g = in.ensure_grad();
                   real s = self.grad(0) / static_cast<real>(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     real raw = in.value(i);
                     if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;  // clamped: flat
                     real p = raw;
                     g(i) += s * (t(i) == 1.0 ? -1.0 / p : 1.0 / (1.0 - p));
                   }
                 });
}

Var categorical_cross_entropy(const Var& pred, const Tensor& target,
                              const std::optional<std::vector<real>>& class_weights) {
  if (!pred.value().same_shape(target)) {
    throw DataError("categorical_cross_entropy: shape mismatch " + shape_str(pred.shape()) +
                    " vs " + shape_str(target.shape()));
  }
  require_rank(pred.value(), 2, "categorical_cross_entropy");
  std::size_t rows = pred.value().extent(0), cols = pred.value().extent(1);
  if (class_weights && class_weights->size() != cols) {
    throw DataError("categorical_cross_entropy: expected " + std::to_string(cols) +
                    " class weights, got " + std::to_string(class_weights->size()));
  }

  std::vector<std::size_t> labels(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    real row_sum = 0.0;
    std::size_t ones = 0;
    std::size_t label = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum += pred.value()(r, j);
      real y = target(r, j);
      if (y == 1.0) {
        ones += 1;
        label = j;
      } else if (y != 0.0) {
        throw DataError("categorical_cross_entropy: target rows must be one-hot");
      }
    }
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw DataError("categorical_cross_entropy: prediction row " + std::to_string(r) +
                      " sums to " + std::to_string(row_sum) + ", expected 1");
    }
    if (ones != 1) {
      throw DataError("categorical_cross_entropy: target rows must be one-hot");
    }
    labels[r] = label;
  }

  std::vector<real> row_weight(rows, 1.0);
  real weight_sum = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (class_weights) row_weight[r] = (*class_weights)[labels[r]];
    weight_sum += row_weight[r];
  }
  if (weight_sum <= 0.0) {
    throw NumericError("categorical_cross_entropy: row weights sum to zero");
  }

  real acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    acc += row_weight[r] * -std::log(clamp_prob(pred.value()(r, labels[r])));
  }

  return make_op(
      Tensor::scalar(acc / weight_sum), {pred},
      [labels = std::move(labels), row_weight = std::move(row_weight), weight_sum, cols](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        Tensor& g = in.ensure_grad();
        real s = self.grad(0) / weight_sum;
        for (std::size_t r = 0; r < labels.size(); ++r) {
          real raw = in.value(r, labels[r]);
          if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;
          g(r * cols + labels[r]) += s * row_weight[r] * (-1.0 / raw);
        }
      });
}

Var kl_gaussian(const Var& mu, const Var& logvar) {
  if (!mu.value().same_shape(logvar.value())) {
    throw DataError("kl_gaussian: shape mismatch " + shape_str(mu.shape()) + " vs " +
                    shape_str(logvar.shape()));
  }
  std::size_t n = mu.value().numel();
  real acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    real m = mu.value()(i);
    real lv = logvar.value()(i);
    acc += 1.0 + lv - m * m - std::exp(lv);
  }
  return make_op(Tensor::scalar(-0.5 * acc), {mu, logvar}, [n](Node& self) {
    Node& im = *self.inputs[0];
    Node& il = *self.inputs[1];
    real g0 = self.grad(0);
    if (im.requires_grad) {
      Tensor& g = im.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g(i) += g0 * im.value(i);
    }
    if (il.requires_grad) {
      Tensor& g = il.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g(i) += g0 * 0.5 * (std::exp(il.value(i)) - 1.0);
    }
  });
}

}  // namespace genfeat
