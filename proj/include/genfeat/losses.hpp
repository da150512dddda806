#pragma once

#include <optional>
#include <vector>

#include "genfeat/autodiff.hpp"
#include "genfeat/tensor.hpp"

namespace genfeat {

// All losses return scalar graph nodes. Targets are constants; gradients
// flow only through predictions.

// mean((pred - target)^2) over all elements.
Var mean_squared_error(const Var& pred, const Tensor& target);

// -mean(y*ln(p) + (1-y)*ln(1-p)) with p clamped to [1e-7, 1 - 1e-7].
// Targets must be exactly 0 or 1.
Var binary_cross_entropy(const Var& pred, const Tensor& target);

// Rows of `pred` are distributions over classes (each row must sum to 1
// within 1e-6); `target` rows are one-hot. With class weights w the loss is
// sum_r w[c_r] * (-ln p[r, c_r]) / sum_r w[c_r], so uniform weights reduce
// exactly to the unweighted mean.
Var categorical_cross_entropy(const Var& pred, const Tensor& target,
                              const std::optional<std::vector<real>>& class_weights = {});

// KL(N(mu, exp(logvar)) || N(0, I)) summed over every element:
// -0.5 * sum(1 + logvar - mu^2 - exp(logvar)).
Var kl_gaussian(const Var& mu, const Var& logvar);

}  // namespace genfeat
