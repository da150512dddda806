#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "genfeat/autodiff.hpp"
#include "genfeat/rng.hpp"
#include "genfeat/tensor.hpp"

namespace genfeat {

// Named parameters plus per-parameter Adam state. Iteration order is the
// sorted name order everywhere, which keeps runs reproducible.
class ParamStore {
public:
  struct AdamSlot {
    Tensor m;
    Tensor v;
    std::int64_t step = 0;
  };

  // Returns the existing parameter or creates it with `init` applied to a
  // zero tensor. Shape mismatches against an existing entry throw.
  Var& get_or_create(const std::string& name, const std::vector<std::size_t>& shape,
                     const std::function<void(Tensor&)>& init);

  // Non-trainable state (e.g. normalization running statistics). Saved in
  // checkpoints but excluded from gradients and Adam updates.
  Var& get_or_create_buffer(const std::string& name, const std::vector<std::size_t>& shape,
                            const std::function<void(Tensor&)>& init);

  Var& param(const std::string& name);
  const Var& param(const std::string& name) const;
  bool has(const std::string& name) const;
  bool is_trainable(const std::string& name) const;
  std::vector<std::string> names() const;            // sorted, params + buffers
  std::vector<std::string> trainable_names() const;  // sorted

  AdamSlot& adam_slot(const std::string& name);

  void zero_grads();

  // Replaces values from a checkpoint map; missing or extra names throw.
  void load_values(const std::map<std::string, Tensor>& values);
  std::map<std::string, Tensor> snapshot() const;  // deep copy of all values

private:
  struct Slot {
    Var var;
    bool trainable = true;
    AdamSlot adam;
  };
  std::map<std::string, Slot> slots_;
};

// Gradients of a scalar loss with respect to every trainable parameter.
// Parameters the loss does not reach get zero gradients.
std::map<std::string, Tensor> gradients(const Var& loss, ParamStore& params);

// Subset of `grads` whose names start with `prefix`; used to restrict an
// optimizer step to one sub-network.
std::map<std::string, Tensor> filter_grads(const std::map<std::string, Tensor>& grads,
                                           const std::string& prefix);

// Bias-corrected Adam, applied in place to the parameters named in `grads`.
void adam_step(ParamStore& params, const std::map<std::string, Tensor>& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Parameter initializers.
std::function<void(Tensor&)> glorot_init(Rng& rng, std::size_t fan_in, std::size_t fan_out);
std::function<void(Tensor&)> normal_init(Rng& rng, double stddev);
std::function<void(Tensor&)> zeros_init();
std::function<void(Tensor&)> ones_init();

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::string worst;
  bool ok() const { return failures == 0 && checked > 0; }
};

// Central finite differences against one reverse pass. `build` must
// reconstruct the same forward graph from the store's current values on
// every call. An element passes when the absolute error stays under
// `abs_tol` or the relative error stays under `rel_tol`.
GradCheckReport finite_difference_check(const std::function<Var(ParamStore&)>& build,
                                        ParamStore& params, double eps = 1e-5,
                                        double abs_tol = 1e-8, double rel_tol = 1e-4);

}  // namespace genfeat
