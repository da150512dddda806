#include <cmath>

#include "doctest.h"
#include "genfeat/autodiff.hpp"
#include "genfeat/errors.hpp"
#include "genfeat/losses.hpp"
#include "genfeat/optim.hpp"
#include "helpers.hpp"

using namespace genfeat;
using testutil::as_param;
using testutil::random_tensor;

TEST_CASE("mean squared error: value and gradient") {
  Var pred(Tensor({2}, {1.0, 2.0}), true);
  Tensor target({2}, {0.0, 0.0});
  Var loss = mean_squared_error(pred, target);
  CHECK(loss.value()(0) == doctest::Approx(2.5));
  backward(loss);
  CHECK(pred.grad()(0) == doctest::Approx(1.0));  // 2*(1-0)/2
  CHECK(pred.grad()(1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(mean_squared_error(pred, Tensor({3})), DataError);
}

TEST_CASE("binary cross entropy: hand values, clamping, target validation") {
  Var pred(Tensor({2}, {0.8, 0.3}), true);
  Tensor target({2}, {1.0, 0.0});
  Var loss = binary_cross_entropy(pred, target);
  double expect = (-std::log(0.8) - std::log(0.7)) / 2.0;
  CHECK(loss.value()(0) == doctest::Approx(expect));
  backward(loss);
  CHECK(pred.grad()(0) == doctest::Approx(-1.0 / (2 * 0.8)));
  CHECK(pred.grad()(1) == doctest::Approx(1.0 / (2 * 0.7)));

  // A confident-correct prediction is clamped, never infinite.
  Var exact(Tensor({1}, {1.0}), false);
  Var l2 = binary_cross_entropy(exact, Tensor({1}, {1.0}));
  CHECK(l2.value()(0) == doctest::Approx(-std::log(1.0 - 1e-7)));
  CHECK(std::isfinite(l2.value()(0)));

  CHECK_THROWS_AS(binary_cross_entropy(pred, Tensor({2}, {0.5, 1.0})), DataError);
}

TEST_CASE("categorical cross entropy: weighting matches the row-weight definition") {
  Tensor p({2, 2}, {0.7, 0.3, 0.2, 0.8});
  Tensor y({2, 2}, {1, 0, 0, 1});
  Var pred(p, true);

  Var unweighted = categorical_cross_entropy(pred, y);
  double expect = (-std::log(0.7) - std::log(0.8)) / 2.0;
  CHECK(unweighted.value()(0) == doctest::Approx(expect));

  // Uniform weights reduce exactly to the unweighted mean.
  Var uniform = categorical_cross_entropy(pred, y, std::vector<real>{3.0, 3.0});
  CHECK(uniform.value()(0) == doctest::Approx(unweighted.value()(0)).epsilon(1e-15));

  Var weighted = categorical_cross_entropy(pred, y, std::vector<real>{2.0, 1.0});
  double expect_w = (2.0 * -std::log(0.7) + 1.0 * -std::log(0.8)) / 3.0;
  CHECK(weighted.value()(0) == doctest::Approx(expect_w));

  // Row sums must be 1 and targets one-hot.
  Var bad(Tensor({1, 2}, {0.9, 0.3}), false);
  CHECK_THROWS_AS(categorical_cross_entropy(bad, Tensor({1, 2}, {1, 0})), DataError);
  CHECK_THROWS_AS(categorical_cross_entropy(pred, Tensor({2, 2}, {1, 1, 0, 1})), DataError);
  CHECK_THROWS_AS(categorical_cross_entropy(pred, y, std::vector<real>{1.0}), DataError);
}

TEST_CASE("gaussian KL: sum form") {
  // mu=1, logvar=0 contributes -0.5*(1+0-1-1) = 0.5 per element.
  Var mu(Tensor({2, 2}, {1, 1, 1, 1}), true);
  Var lv(Tensor::zeros({2, 2}), true);
  Var loss = kl_gaussian(mu, lv);
  CHECK(loss.value()(0) == doctest::Approx(2.0));
  backward(loss);
  CHECK(mu.grad()(0) == doctest::Approx(1.0));        // d/dmu = mu
  CHECK(lv.grad()(0) == doctest::Approx(0.0));        // 0.5*(e^0 - 1)
  CHECK(kl_gaussian(Var(Tensor::zeros({3})), Var(Tensor::zeros({3}))).value()(0) ==
        doctest::Approx(0.0));
}

TEST_CASE("finite differences through every loss") {
  for (std::uint64_t seed : {41u, 42u, 43u}) {
    Rng rng(seed);
    ParamStore store;
    as_param(store, "z", random_tensor(rng, {4, 3}));
    as_param(store, "mu", random_tensor(rng, {2, 5}));
    as_param(store, "lv", random_tensor(rng, {2, 5}, -0.5, 0.5));

    Tensor onehot = Tensor::zeros({4, 3});
    for (std::size_t r = 0; r < 4; ++r) onehot(r, (r * 2 + 1) % 3) = 1.0;
    Tensor bce_target = Tensor::zeros({4, 3});
    for (std::size_t i = 0; i < 12; ++i) bce_target(i) = (i % 3 == 0) ? 1.0 : 0.0;
    Tensor mse_target = random_tensor(rng, {4, 3});

    auto build_cce = [&](ParamStore& s) {
      Var probs = softmax_rows(s.param("z"));
      return categorical_cross_entropy(probs, onehot, std::vector<real>{1.0, 2.5, 0.5});
    };
    auto build_bce = [&](ParamStore& s) {
      return binary_cross_entropy(sigmoid(s.param("z")), bce_target);
    };
    auto build_mse = [&](ParamStore& s) {
      return mean_squared_error(tanh_v(s.param("z")), mse_target);
    };
    auto build_kl = [&](ParamStore& s) { return kl_gaussian(s.param("mu"), s.param("lv")); };

    for (auto& build : {std::function<Var(ParamStore&)>(build_cce),
                        std::function<Var(ParamStore&)>(build_bce),
                        std::function<Var(ParamStore&)>(build_mse),
                        std::function<Var(ParamStore&)>(build_kl)}) {
      GradCheckReport r = finite_difference_check(build, store);
      CHECK(r.checked > 0);
      CHECK_MESSAGE(r.failures == 0, "worst ", r.worst, " rel ", r.max_rel_err);
    }
  }
}

namespace {

// Independent scalar Adam recurrence for the dual-route check.
struct ScalarAdam {
  double m = 0, v = 0;
  long step = 0;
  double apply(double theta, double g, double lr, double b1, double b2, double eps) {
    step += 1;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mhat = m / (1 - std::pow(b1, step));
    double vhat = v / (1 - std::pow(b2, step));
    return theta - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace

TEST_CASE("adam: bias-corrected update matches an independent recurrence") {
  ParamStore store;
  store.get_or_create("w", {1}, [](Tensor&) {});
  ScalarAdam oracle;
  double theta = 0.0;
  for (int i = 0; i < 25; ++i) {
    double g = std::sin(0.7 * i) + 0.1;
    std::map<std::string, Tensor> grads;
    grads.emplace("w", Tensor({1}, {g}));
    adam_step(store, grads, 1e-3, 0.9, 0.999, 1e-8);
    theta = oracle.apply(theta, g, 1e-3, 0.9, 0.999, 1e-8);
    CHECK(store.param("w").value()(0) == doctest::Approx(theta).epsilon(1e-15));
  }
  // First step from zero moves by almost exactly -lr.
  ParamStore fresh;
  fresh.get_or_create("w", {1}, [](Tensor&) {});
  std::map<std::string, Tensor> grads;
  grads.emplace("w", Tensor({1}, {1.0}));
  adam_step(fresh, grads, 1e-3);
  CHECK(fresh.param("w").value()(0) == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam: separate beta schedules on the same slot stay deterministic") {
  ParamStore a, b;
  a.get_or_create("w", {2}, [](Tensor& t) { t.fill(0.3); });
  b.get_or_create("w", {2}, [](Tensor& t) { t.fill(0.3); });
  for (int i = 0; i < 10; ++i) {
    std::map<std::string, Tensor> g;
    g.emplace("w", Tensor({2}, {0.5, -0.25}));
    double b1 = (i % 2 == 0) ? 0.9 : 0.5;
    adam_step(a, g, 2e-3, b1);
    adam_step(b, g, 2e-3, b1);
  }
  CHECK(a.param("w").value()(0) == b.param("w").value()(0));
  CHECK(a.param("w").value()(1) == b.param("w").value()(1));
}

TEST_CASE("param store contracts") {
  ParamStore store;
  Rng rng(50);
  store.get_or_create("w", {2, 2}, [](Tensor& t) { t.fill(1.0); });
  CHECK_THROWS_AS(store.get_or_create("w", {3}, [](Tensor&) {}), DataError);
  CHECK_THROWS_AS(store.param("nope"), DataError);

  store.get_or_create_buffer("buf", {2}, zeros_init());
  CHECK_FALSE(store.is_trainable("buf"));
  CHECK(store.trainable_names() == std::vector<std::string>{"w"});
  CHECK(store.names() == std::vector<std::string>{"buf", "w"});

  // Buffers reject Adam updates.
  std::map<std::string, Tensor> g;
  g.emplace("buf", Tensor({2}));
  CHECK_THROWS_AS(adam_step(store, g, 1e-3), DataError);

  auto snap = store.snapshot();
  CHECK(snap.size() == 2);
  snap.at("w")(0) = 9.0;
  CHECK(store.param("w").value()(0) == 1.0);  // deep copy

  std::map<std::string, Tensor> missing;
  missing.emplace("w", Tensor({2, 2}));
  CHECK_THROWS_AS(store.load_values(missing), DataError);  // buf absent
  auto full = store.snapshot();
  full.at("w").fill(4.0);
  store.load_values(full);
  CHECK(store.param("w").value()(3) == 4.0);
}

TEST_CASE("initializers: glorot bounds and seeded determinism") {
  Rng r1(99), r2(99);
  Tensor a({40, 30}), b({40, 30});
  glorot_init(r1, 40, 30)(a);
  glorot_init(r2, 40, 30)(b);
  double limit = std::sqrt(6.0 / 70.0);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    CHECK(a(i) == b(i));
    CHECK(std::abs(a(i)) <= limit);
  }
  Rng r3(7);
  Tensor c({5000});
  normal_init(r3, 0.02)(c);
  double var = 0;
  for (std::size_t i = 0; i < c.numel(); ++i) var += c(i) * c(i);
  var /= c.numel();
  CHECK(std::sqrt(var) == doctest::Approx(0.02).epsilon(0.05));
}
