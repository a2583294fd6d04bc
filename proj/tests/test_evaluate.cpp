#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "zubov/evaluate.hpp"
#include "zubov/losses.hpp"
#include "zubov/ode.hpp"
#include "zubov/rng.hpp"

using namespace zubov;
using testutil::quad_head;
using testutil::zero_mlp;

namespace {

ModelBundle frozen_bundle() {
  // constant dynamics freeze every trajectory at its start point
  ModelBundle b;
  b.d_in = 2;
  b.dynamics = zero_mlp(2, 4, 2);
  b.head = quad_head(Tensor(2, 2, std::vector<double>{-1, 0, 1, 0}), 0.5);
  b.domain_lo = Tensor(1, 2, -10.0);
  b.domain_hi = Tensor(1, 2, 10.0);
  return b;
}

ModelBundle live_bundle(uint64_t seed) {
  Rng rng(seed);
  ModelBundle b;
  b.d_in = 2;
  b.dynamics = make_mlp(2, 6, 2, rng);
  b.head = quad_head(Tensor(2, 2, std::vector<double>{-1, 0, 1, 0}), 0.5);
  b.domain_lo = Tensor(1, 2, -10.0);
  b.domain_hi = Tensor(1, 2, 10.0);
  return b;
}

EvalPipelineConfig short_pipe() {
  EvalPipelineConfig p;
  p.horizon = 1.0;
  p.ode_steps = 4;
  p.traj_samples = 2;
  return p;
}

TEST_CASE("constant dynamics keep the forward states at the inputs") {
  ModelBundle b = frozen_bundle();
  Tensor x(3, 2, std::vector<double>{-1.2, 0.1, 0.9, -0.2, -0.8, 0.0});
  EvalPipelineConfig pipe;
  pipe.traj_samples = 5;
  const ForwardStates fs = forward_states(b, x, pipe);
  REQUIRE(fs.sampled.size() == 5);
  for (int64_t k = 0; k < x.numel(); ++k) {
    CHECK(fs.h_final[k] == x[k]);
    CHECK(fs.sampled[0][k] == x[k]);
  }
}

TEST_CASE("input gradient matches finite differences") {
  ModelBundle b = live_bundle(31);
  EvalPipelineConfig pipe = short_pipe();
  Tensor x(2, 2, std::vector<double>{0.4, -0.2, -0.3, 0.5});
  std::vector<int64_t> y{0, 1};
  CHECK_THROWS_AS(input_gradient(b, x, {0}, pipe), EvalError);

  const Tensor g = input_gradient(b, x, y, pipe);

  auto loss_at = [&](const Tensor& xs) {
    Tape tape;
    BoundMlp bdyn = bind_mlp(tape, b.dynamics, false);
    BoundHead bhead = bind_head(tape, b.head, false);
    TapeField fld = [&bdyn](Value h) { return mlp_forward<Value>(bdyn, h); };
    FixedSolverConfig s;
    s.horizon = pipe.horizon;
    s.steps = pipe.ode_steps;
    TapeTrajectory traj = rk4_integrate(fld, tape.leaf(xs), s, 1);
    return tape.val(cla_loss(output_probs(bhead, traj.states.back()), y)).item();
  };

  const double eps = 1e-5;
  for (int64_t k = 0; k < x.numel(); ++k) {
    Tensor hi = x, lo = x;
    hi[k] += eps;
    lo[k] -= eps;
    const double fd = (loss_at(hi) - loss_at(lo)) / (2.0 * eps);
    const double rel = std::abs(g[k] - fd) / std::max({std::abs(fd), std::abs(g[k]), 1e-8});
    CHECK(rel <= 1e-4);
  }
}

TEST_CASE("attacks respect the budget and collapse at epsilon zero") {
  ModelBundle b = live_bundle(17);
  EvalPipelineConfig pipe = short_pipe();
  Tensor x(3, 2, std::vector<double>{-0.9, 0.1, 0.8, -0.3, 0.2, 0.4});
  std::vector<int64_t> y{0, 1, 1};

  for (const char* tag : {"fgsm", "pgd", "bim"}) {
    AttackConfig cfg;
    cfg.tag = tag;
    cfg.epsilon = 0.0;
    cfg.step_size = 0.0125;
    const Tensor adv = attack(b, x, y, cfg, pipe, 7);
    for (int64_t k = 0; k < x.numel(); ++k) CHECK(adv[k] == x[k]);
  }

  AttackConfig pgd;
  pgd.epsilon = 0.1;
  pgd.step_size = 0.0125;
  const Tensor adv = attack(b, x, y, pgd, pipe, 7);
  for (int64_t k = 0; k < x.numel(); ++k) CHECK(std::abs(adv[k] - x[k]) <= 0.1 + 1e-12);
  for (int64_t i = 0; i < adv.rows(); ++i)
    for (int64_t k = 0; k < 2; ++k) {
      CHECK(adv(i, k) >= b.domain_lo(0, k));
      CHECK(adv(i, k) <= b.domain_hi(0, k));
    }

  // the one-shot attack is exactly epsilon times the gradient sign
  AttackConfig fg;
  fg.tag = "fgsm";
  fg.epsilon = 0.05;
  const Tensor fadv = attack(b, x, y, fg, pipe, 7);
  const Tensor g = input_gradient(b, x, y, pipe);
  for (int64_t k = 0; k < x.numel(); ++k) {
    const double s = g[k] > 0.0 ? 1.0 : (g[k] < 0.0 ? -1.0 : 0.0);
    CHECK(fadv[k] - x[k] == doctest::Approx(0.05 * s).epsilon(1e-12));
  }

  AttackConfig bad;
  bad.epsilon = -0.1;
  CHECK_THROWS_AS(attack(b, x, y, bad, pipe, 7), EvalError);
  bad = AttackConfig{};
  bad.steps = 0;
  CHECK_THROWS_AS(attack(b, x, y, bad, pipe, 7), EvalError);
  bad = AttackConfig{};
  bad.step_size = 0.0;
  CHECK_THROWS_AS(attack(b, x, y, bad, pipe, 7), EvalError);
  bad = AttackConfig{};
  bad.tag = "cw";
  CHECK_THROWS_AS(attack(b, x, y, bad, pipe, 7), EvalError);
}

TEST_CASE("corruption statistics follow the requested noise model") {
  Tensor zeros(1000, 100, 0.0);
  Tensor lo(1, 100, -1.0), hi(1, 100, 1.0);

  const Tensor g = corrupt(zeros, "gaussian", 0.03, lo, hi, 5);
  double mean = 0.0, ss = 0.0;
  for (int64_t k = 0; k < g.numel(); ++k) mean += g[k];
  mean /= static_cast<double>(g.numel());
  for (int64_t k = 0; k < g.numel(); ++k) ss += (g[k] - mean) * (g[k] - mean);
  const double sd = std::sqrt(ss / static_cast<double>(g.numel() - 1));
  CHECK(std::abs(mean) <= 5e-4);
  CHECK(std::abs(sd - 0.03) <= 0.02 * 0.03);

  const Tensor u = corrupt(zeros, "uniform", 0.2, lo, hi, 5);
  for (int64_t k = 0; k < u.numel(); ++k) CHECK(std::abs(u[k]) <= 0.2);

  Tensor x(4, 2, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  Tensor lo2(1, 2, std::vector<double>{-2.0, -3.0}), hi2(1, 2, std::vector<double>{2.0, 3.0});
  const Tensor all = corrupt(x, "salt", 1.0, lo2, hi2, 9);
  for (int64_t i = 0; i < all.rows(); ++i)
    for (int64_t k = 0; k < all.cols(); ++k) {
      const bool at_edge = all(i, k) == lo2(0, k) || all(i, k) == hi2(0, k);
      CHECK(at_edge);
    }
  const Tensor none = corrupt(x, "salt", 0.0, lo2, hi2, 9);
  for (int64_t k = 0; k < x.numel(); ++k) CHECK(none[k] == x[k]);

  CHECK_THROWS_AS(corrupt(x, "speckle", 0.1, lo2, hi2, 1), EvalError);
  CHECK_THROWS_AS(corrupt(x, "gaussian", -0.1, lo2, hi2, 1), EvalError);
}

TEST_CASE("evaluation rows on a frozen model") {
  ModelBundle b = frozen_bundle();
  Dataset test;
  test.X = Tensor(4, 2, std::vector<double>{-1.2, 0.1, 0.9, -0.2, -0.8, 0.0, 1.1, 0.3});
  test.y = {0, 1, 0, 1};
  test.classes = 2;
  test.lo = Tensor(1, 2, -3.0);
  test.hi = Tensor(1, 2, 3.0);

  EvalScenario atk;
  atk.name = "pgd-0.1";
  atk.kind = "attack";
  EvalScenario noise;
  noise.name = "gauss-0.05";
  noise.kind = "corrupt";
  noise.magnitude = 0.05;

  const std::vector<MetricsRow> rows = evaluate(b, test, {atk, noise}, short_pipe());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].scenario == "clean");
  CHECK(rows[1].scenario == "pgd-0.1");
  CHECK(rows[2].scenario == "gauss-0.05");

  const MetricsRow& clean = rows[0];
  CHECK(clean.n == 4);
  CHECK(clean.acc_w == 1.0);
  CHECK(clean.acc_fc == 1.0);
  REQUIRE(clean.per_class_acc.size() == 2);
  CHECK(clean.per_class_acc[0] == 1.0);
  CHECK(clean.per_class_acc[1] == 1.0);
  CHECK(clean.containment == 1.0);
  CHECK(clean.res_mean > 0.0);
  CHECK(clean.res_max >= clean.res_mean);
  CHECK(std::isfinite(clean.res_max));
}

TEST_CASE("evaluation scenario validation") {
  ModelBundle b = frozen_bundle();
  Dataset test;
  test.X = Tensor(2, 2, std::vector<double>{-1.0, 0.0, 1.0, 0.0});
  test.y = {0, 1};
  test.classes = 2;
  test.lo = Tensor(1, 2, -3.0);
  test.hi = Tensor(1, 2, 3.0);

  EvalScenario a;
  a.name = "x";
  EvalScenario dup = a;
  CHECK_THROWS_AS(evaluate(b, test, {a, dup}), EvalError);

  EvalScenario clean_name;
  clean_name.name = "clean";
  CHECK_THROWS_AS(evaluate(b, test, {clean_name}), EvalError);

  EvalScenario odd;
  odd.name = "odd";
  odd.kind = "mystery";
  CHECK_THROWS_AS(evaluate(b, test, {odd}), EvalError);

  Dataset empty;  // default X has no rows
  empty.classes = 2;
  empty.lo = test.lo;
  empty.hi = test.hi;
  CHECK_THROWS_AS(evaluate(b, empty, {}), EvalError);
}

}  // namespace
