#pragma once

#include <functional>
#include <string>
#include <vector>

#include "genfeat/autodiff.hpp"
#include "genfeat/optim.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/tensor.hpp"

namespace testutil {

inline genfeat::Tensor random_tensor(genfeat::Rng& rng, std::vector<std::size_t> shape,
                                     double lo = -1.0, double hi = 1.0) {
  genfeat::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t(i) = rng.uniform(lo, hi);
  return t;
}

// Registers a tensor as a trainable parameter so the finite-difference
// checker also perturbs graph inputs.
inline genfeat::Var& as_param(genfeat::ParamStore& store, const std::string& name,
                              const genfeat::Tensor& value) {
  genfeat::Tensor copy = value;
  return store.get_or_create(name, value.shape(), [&copy](genfeat::Tensor& t) { t = copy; });
}

// Overwrites every trainable parameter with O(stddev) noise. Finite
// differences sit next to piecewise-linear kinks when pre-activations are
// comparable to the probe step; tiny production initializations (e.g.
// stddev 0.02) leave them there, so gradient tests re-scale first.
inline void randomize_params(genfeat::ParamStore& store, genfeat::Rng& rng,
                             double stddev = 0.5) {
  for (const std::string& name : store.trainable_names()) {
    genfeat::Tensor& v = store.param(name).mutable_value();
    for (std::size_t i = 0; i < v.numel(); ++i) v.data()[i] = stddev * rng.normal();
  }
}

}  // namespace testutil
