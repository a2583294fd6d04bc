#include "zubov/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "zubov/losses.hpp"
#include "zubov/ode.hpp"
#include "zubov/rng.hpp"

namespace zubov {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void clip_box(Tensor& x, const Tensor& lo, const Tensor& hi) {
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t k = 0; k < x.cols(); ++k)
      x(i, k) = std::min(hi(0, k), std::max(lo(0, k), x(i, k)));
}

int64_t argmax_row(const Tensor& t, int64_t row) {
  int64_t best = 0;
  for (int64_t k = 1; k < t.cols(); ++k)
    if (t(row, k) > t(row, best)) best = k;
  return best;
}

FixedSolverConfig solver_of(const EvalPipelineConfig& pipe) {
  FixedSolverConfig s;
  s.horizon = pipe.horizon;
  s.steps = pipe.ode_steps;
  s.divergence_norm = pipe.divergence_norm;
  return s;
}

}  // namespace

ForwardStates forward_states(const ModelBundle& bundle, const Tensor& x,
                             const EvalPipelineConfig& pipe) {
  Tape tape;
  BoundMlp bdyn = bind_mlp(tape, bundle.dynamics, false);
  std::optional<BoundMlp> blift;
  if (bundle.lift) blift = bind_mlp(tape, *bundle.lift, false);
  Value xin = tape.constant(x);
  Value h0 = blift ? mlp_forward<Value>(*blift, xin) : xin;
  TapeField fld = [&bdyn](Value h) { return mlp_forward<Value>(bdyn, h); };
  TapeTrajectory traj = rk4_integrate(fld, h0, solver_of(pipe), pipe.traj_samples);
  ForwardStates out;
  out.h_final = tape.val(traj.states.back());
  for (size_t s = 1; s < traj.states.size(); ++s) out.sampled.push_back(tape.val(traj.states[s]));
  return out;
}

Tensor input_gradient(const ModelBundle& bundle, const Tensor& x,
                      const std::vector<int64_t>& y, const EvalPipelineConfig& pipe) {
  if (static_cast<int64_t>(y.size()) != x.rows())
    throw EvalError("input_gradient: label count must match rows");
  Tape tape;
  BoundMlp bdyn = bind_mlp(tape, bundle.dynamics, false);
  std::optional<BoundMlp> blift;
  if (bundle.lift) blift = bind_mlp(tape, *bundle.lift, false);
  BoundHead bhead = bind_head(tape, bundle.head, false);
  Value xin = tape.leaf(x);
  Value h0 = blift ? mlp_forward<Value>(*blift, xin) : xin;
  TapeField fld = [&bdyn](Value h) { return mlp_forward<Value>(bdyn, h); };
  TapeTrajectory traj = rk4_integrate(fld, h0, solver_of(pipe), 1);
  Value probs = output_probs(bhead, traj.states.back());
  tape.backward(cla_loss(probs, y));
  return tape.grad(xin);
}

Tensor attack(const ModelBundle& bundle, const Tensor& x, const std::vector<int64_t>& y,
              const AttackConfig& cfg, const EvalPipelineConfig& pipe, uint64_t seed) {
  if (cfg.epsilon < 0.0) throw EvalError("attack: epsilon must be >= 0");
  if (cfg.steps < 1) throw EvalError("attack: steps must be >= 1");
  if (cfg.step_size <= 0.0) throw EvalError("attack: step_size must be > 0");
  const bool fgsm = cfg.tag == "fgsm";
  const bool pgd = cfg.tag == "pgd";
  const bool bim = cfg.tag == "bim";
  if (!fgsm && !pgd && !bim) throw EvalError("attack: unknown tag '" + cfg.tag + "'");

  Tensor adv = x;
  if (fgsm) {
    Tensor g = input_gradient(bundle, x, y, pipe);
    for (int64_t k = 0; k < adv.numel(); ++k) adv[k] += cfg.epsilon * sign(g[k]);
  } else {
    if (pgd) {
      Rng rng(mix_seed(seed, 0xadba11u));
      for (int64_t k = 0; k < adv.numel(); ++k)
        adv[k] += rng.uniform(-cfg.epsilon, cfg.epsilon);
      clip_box(adv, bundle.domain_lo, bundle.domain_hi);
    }
    for (int it = 0; it < cfg.steps; ++it) {
      Tensor g = input_gradient(bundle, adv, y, pipe);
      for (int64_t k = 0; k < adv.numel(); ++k) {
        adv[k] += cfg.step_size * sign(g[k]);
        adv[k] = std::min(x[k] + cfg.epsilon, std::max(x[k] - cfg.epsilon, adv[k]));
      }
      clip_box(adv, bundle.domain_lo, bundle.domain_hi);
    }
  }
  for (int64_t k = 0; k < adv.numel(); ++k)
    adv[k] = std::min(x[k] + cfg.epsilon, std::max(x[k] - cfg.epsilon, adv[k]));
  clip_box(adv, bundle.domain_lo, bundle.domain_hi);
  return adv;
}

Tensor corrupt(const Tensor& x, const std::string& tag, double magnitude, const Tensor& lo,
               const Tensor& hi, uint64_t seed) {
  if (magnitude < 0.0) throw EvalError("corrupt: magnitude must be >= 0");
  Tensor out = x;
  Rng rng(mix_seed(seed, 0xc0442u));
  if (tag == "gaussian") {
    for (int64_t k = 0; k < out.numel(); ++k) out[k] += magnitude * rng.normal();
  } else if (tag == "uniform") {
    for (int64_t k = 0; k < out.numel(); ++k) out[k] += rng.uniform(-magnitude, magnitude);
  } else if (tag == "salt") {
    for (int64_t i = 0; i < out.rows(); ++i)
      for (int64_t k = 0; k < out.cols(); ++k) {
        const bool hit = rng.uniform() < magnitude;
        const double edge = rng.uniform() < 0.5 ? lo(0, k) : hi(0, k);
        if (hit) out(i, k) = edge;
      }
  } else {
    throw EvalError("corrupt: unknown tag '" + tag + "'");
  }
  return out;
}

std::vector<MetricsRow> evaluate(const ModelBundle& bundle, const Dataset& test,
                                 const std::vector<EvalScenario>& scenarios,
                                 const EvalPipelineConfig& pipe) {
  const int64_t n = test.X.rows();
  if (n == 0) throw EvalError("evaluate: empty test set");
  const int64_t L = bundle.classes();

  std::set<std::string> seen{"clean"};
  for (const auto& s : scenarios)
    if (!seen.insert(s.name).second)
      throw EvalError("evaluate: duplicate scenario name '" + s.name + "'");

  auto row_for = [&](const std::string& name, const Tensor& xs) {
    MetricsRow row;
    row.scenario = name;
    row.n = n;
    ForwardStates fs = forward_states(bundle, xs, pipe);

    Tape tape;
    BoundHead bhead = bind_head(tape, bundle.head, false);
    Value hT = tape.constant(fs.h_final);
    Value probs = output_probs(bhead, hT);
    const Tensor& pv = tape.val(probs);

    std::vector<int64_t> pred(static_cast<size_t>(n));
    std::vector<int64_t> class_n(static_cast<size_t>(L), 0), class_hit(static_cast<size_t>(L), 0);
    int64_t hit_w = 0, hit_fc = 0;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t yi = test.y[static_cast<size_t>(i)];
      pred[static_cast<size_t>(i)] = argmax_row(pv, i);
      class_n[static_cast<size_t>(yi)] += 1;
      if (pred[static_cast<size_t>(i)] == yi) {
        ++hit_w;
        class_hit[static_cast<size_t>(yi)] += 1;
      }
      int64_t best = 0;
      double best_dot = -1e300;
      for (int64_t c = 0; c < L; ++c) {
        double dot = 0.0;
        for (int64_t k = 0; k < bundle.d_h(); ++k)
          dot += fs.h_final(i, k) * bundle.head.anchors.c(c, k);
        if (dot > best_dot) {
          best_dot = dot;
          best = c;
        }
      }
      if (best == yi) ++hit_fc;
    }
    row.acc_w = static_cast<double>(hit_w) / static_cast<double>(n);
    row.acc_fc = static_cast<double>(hit_fc) / static_cast<double>(n);
    for (int64_t c = 0; c < L; ++c)
      row.per_class_acc.push_back(class_n[static_cast<size_t>(c)] > 0
                                      ? static_cast<double>(class_hit[static_cast<size_t>(c)]) /
                                            static_cast<double>(class_n[static_cast<size_t>(c)])
                                      : 0.0);

    // consistency residual at the final states, grouped per true class
    BoundMlp bdyn = bind_mlp(tape, bundle.dynamics, false);
    double res_sum = 0.0;
    int64_t res_n = 0;
    for (int64_t c = 0; c < L; ++c) {
      std::vector<int64_t> members;
      for (int64_t i = 0; i < n; ++i)
        if (test.y[static_cast<size_t>(i)] == c) members.push_back(i);
      if (members.empty()) continue;
      Tensor pts(static_cast<int64_t>(members.size()), bundle.d_h(), 0.0);
      for (size_t m = 0; m < members.size(); ++m)
        for (int64_t k = 0; k < bundle.d_h(); ++k) pts(static_cast<int64_t>(m), k) = fs.h_final(members[m], k);
      Value res = consistency_residual(bhead, bdyn, tape.constant(std::move(pts)),
                                       static_cast<int>(c));
      const Tensor& rv = tape.val(res);
      for (int64_t i = 0; i < rv.rows(); ++i) {
        res_sum += rv(i, 0);
        row.res_max = std::max(row.res_max, rv(i, 0));
      }
      res_n += rv.rows();
    }
    row.res_mean = res_n > 0 ? res_sum / static_cast<double>(res_n) : 0.0;

    // containment: correctly classified points whose sampled trajectory stays
    // in the rho-sublevel set of the true class
    int64_t contained = 0, correct = 0;
    std::vector<Tensor> w_at(fs.sampled.size());
    for (size_t s = 0; s < fs.sampled.size(); ++s) {
      Tensor w(n, L, 0.0);
      for (int64_t c = 0; c < L; ++c) {
        Tensor wc = w_eval(bundle.head, fs.sampled[s], static_cast<int>(c));
        for (int64_t i = 0; i < n; ++i) w(i, c) = wc(i, 0);
      }
      w_at[s] = std::move(w);
    }
    for (int64_t i = 0; i < n; ++i) {
      const int64_t yi = test.y[static_cast<size_t>(i)];
      if (pred[static_cast<size_t>(i)] != yi) continue;
      ++correct;
      bool inside = true;
      for (const auto& w : w_at)
        if (w(i, yi) > bundle.head.rho) inside = false;
      if (inside) ++contained;
    }
    row.containment = correct > 0 ? static_cast<double>(contained) / static_cast<double>(correct) : 0.0;
    return row;
  };

  std::vector<MetricsRow> rows;
  rows.push_back(row_for("clean", test.X));
  for (const auto& s : scenarios) {
    if (s.kind == "clean") {
      rows.push_back(row_for(s.name, test.X));
    } else if (s.kind == "attack") {
      rows.push_back(row_for(s.name, attack(bundle, test.X, test.y, s.attack, pipe, s.seed)));
    } else if (s.kind == "corrupt") {
      rows.push_back(row_for(s.name, corrupt(test.X, s.corrupt_tag, s.magnitude, test.lo,
                                             test.hi, s.seed)));
    } else {
      throw EvalError("evaluate: unknown scenario kind '" + s.kind + "'");
    }
  }
  return rows;
}

}  // namespace zubov
