#include "genfeat/optim.hpp"

#include <cmath>

#include "genfeat/errors.hpp"

namespace genfeat {

Var& ParamStore::get_or_create(const std::string& name, const std::vector<std::size_t>& shape,
                               const std::function<void(Tensor&)>& init) {
  auto it = slots_.find(name);
  if (it != slots_.end()) {
    if (it->second.var.value().shape() != shape) {
      throw DataError("parameter \"" + name + "\" already exists with shape " +
                      shape_str(it->second.var.shape()) + ", requested " + shape_str(shape));
    }
    return it->second.var;
  }
  Tensor t(shape);
  init(t);
  Slot slot;
  slot.var = Var(std::move(t), true);
  slot.trainable = true;
  return slots_.emplace(name, std::move(slot)).first->second.var;
}

Var& ParamStore::get_or_create_buffer(const std::string& name,
                                      const std::vector<std::size_t>& shape,
                                      const std::function<void(Tensor&)>& init) {
  auto it = slots_.find(name);
  if (it != slots_.end()) {
    if (it->second.var.value().shape() != shape) {
      throw DataError("buffer \"" + name + "\" already exists with shape " +
                      shape_str(it->second.var.shape()) + ", requested " + shape_str(shape));
    }
    return it->second.var;
  }
  Tensor t(shape);
  init(t);
  Slot slot;
  slot.var = Var(std::move(t), false);
  slot.trainable = false;
  return slots_.emplace(name, std::move(slot)).first->second.var;
}

Var& ParamStore::param(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw DataError("unknown parameter \"" + name + "\"");
  return it->second.var;
}

const Var& ParamStore::param(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw DataError("unknown parameter \"" + name + "\"");
  return it->second.var;
}

bool ParamStore::has(const std::string& name) const { return slots_.count(name) > 0; }

bool ParamStore::is_trainable(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw DataError("unknown parameter \"" + name + "\"");
  return it->second.trainable;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, slot] : slots_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& [name, slot] : slots_) {
    if (slot.trainable) out.push_back(name);
  }
  return out;
}

ParamStore::AdamSlot& ParamStore::adam_slot(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw DataError("unknown parameter \"" + name + "\"");
  AdamSlot& a = it->second.adam;
  if (!a.m.defined()) {
    a.m = Tensor::zeros(it->second.var.value().shape());
    a.v = Tensor::zeros(it->second.var.value().shape());
    a.step = 0;
  }
  return a;
}

void ParamStore::zero_grads() {
  for (auto& [name, slot] : slots_) slot.var.zero_grad();
}

void ParamStore::load_values(const std::map<std::string, Tensor>& values) {
  for (const auto& [name, slot] : slots_) {
    if (!values.count(name)) throw DataError("checkpoint is missing parameter \"" + name + "\"");
  }
  for (const auto& [name, tensor] : values) {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw DataError("checkpoint has unknown parameter \"" + name + "\"");
    if (it->second.var.value().shape() != tensor.shape()) {
      throw DataError("checkpoint shape mismatch for \"" + name + "\": expected " +
                      shape_str(it->second.var.shape()) + ", got " + shape_str(tensor.shape()));
    }
    it->second.var.mutable_value() = tensor;
  }
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, slot] : slots_) out.emplace(name, slot.var.value());
  return out;
}

std::map<std::string, Tensor> gradients(const Var& loss, ParamStore& params) {
  params.zero_grads();
  backward(loss);
  std::map<std::string, Tensor> out;
  for (const std::string& name : params.trainable_names()) {
    const Var& p = params.param(name);
    const Tensor& g = p.node()->grad;
    out.emplace(name, g.defined() ? g : Tensor::zeros(p.value().shape()));
  }
  return out;
}

std::map<std::string, Tensor> filter_grads(const std::map<std::string, Tensor>& grads,
                                           const std::string& prefix) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, g] : grads)
    if (name.rfind(prefix, 0) == 0) out.emplace(name, g);
  return out;
}

void adam_step(ParamStore& params, const std::map<std::string, Tensor>& grads, double lr,
               double beta1, double beta2, double eps) {
  for (const auto& [name, g] : grads) {
    Var& p = params.param(name);
    if (!params.is_trainable(name)) {
      throw DataError("adam_step: \"" + name + "\" is not a trainable parameter");
    }
    if (!p.value().same_shape(g)) {
      throw DataError("adam_step: gradient shape mismatch for \"" + name + "\"");
    }
    ParamStore::AdamSlot& slot = params.adam_slot(name);
    slot.step += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(slot.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(slot.step));
    Tensor& value = p.mutable_value();
    for (std::size_t i = 0; i < value.numel(); ++i) {
      double gi = g(i);
      slot.m(i) = beta1 * slot.m(i) + (1.0 - beta1) * gi;
      slot.v(i) = beta2 * slot.v(i) + (1.0 - beta2) * gi * gi;
      double mhat = slot.m(i) / bc1;
      double vhat = slot.v(i) / bc2;
      value(i) -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::function<void(Tensor&)> glorot_init(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng* r = &rng;
  return [r, limit](Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i) t(i) = r->uniform(-limit, limit);
  };
}

std::function<void(Tensor&)> normal_init(Rng& rng, double stddev) {
  Rng* r = &rng;
  return [r, stddev](Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i) t(i) = stddev * r->normal();
  };
}

std::function<void(Tensor&)> zeros_init() {
  return [](Tensor&) {};
}

std::function<void(Tensor&)> ones_init() {
  return [](Tensor& t) { t.fill(1.0); };
}

GradCheckReport finite_difference_check(const std::function<Var(ParamStore&)>& build,
                                        ParamStore& params, double eps, double abs_tol,
                                        double rel_tol) {
  GradCheckReport report;

  Var loss = build(params);
  std::map<std::string, Tensor> analytic = gradients(loss, params);

  for (const std::string& name : params.trainable_names()) {
    Tensor& value = params.param(name).mutable_value();
    const Tensor& grad = analytic.at(name);
    for (std::size_t i = 0; i < value.numel(); ++i) {
      double saved = value(i);
      value(i) = saved + eps;
      double up = build(params).value()(0);
      value(i) = saved - eps;
      double down = build(params).value()(0);
      value(i) = saved;
      double numeric = (up - down) / (2.0 * eps);
      double a = grad(i);
      double abs_err = std::abs(a - numeric);
      double scale = std::max(std::abs(a), std::abs(numeric));
      double rel_err = scale > 0 ? abs_err / scale : 0.0;
      report.checked += 1;
      bool pass = abs_err <= abs_tol || rel_err <= rel_tol;
      if (!pass) report.failures += 1;
      if (abs_err > report.max_abs_err) report.max_abs_err = abs_err;
      if (rel_err > report.max_rel_err && abs_err > abs_tol) {
        report.max_rel_err = rel_err;
        report.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace genfeat
