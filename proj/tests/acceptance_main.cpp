// Acceptance gate. Each criterion prints one PASS/FAIL line with its measured
// statistic and pinned tolerance; the process exits nonzero if any line fails.
// Ordered cheap to expensive so breakage surfaces fast.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "zubov/checkpoint.hpp"
#include "zubov/config.hpp"
#include "zubov/dataset.hpp"
#include "zubov/evaluate.hpp"
#include "zubov/losses.hpp"
#include "zubov/nets.hpp"
#include "zubov/ode.hpp"
#include "zubov/rng.hpp"
#include "zubov/sampler.hpp"
#include "zubov/train.hpp"
#include "zubov/verify.hpp"

namespace {

using namespace zubov;

int failures = 0;

std::string g3(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%.3g", v);
  return b;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome oc;
  try {
    oc = body();
  } catch (const std::exception& e) {
    oc.pass = false;
    oc.detail = std::string("exception: ") + e.what();
  }
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = budget_s <= 0.0 || dt <= budget_s;
  const bool pass = oc.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s  %-36s %s  [%.1fs", pass ? "PASS" : "FAIL", name, oc.detail.c_str(), dt);
  if (budget_s > 0.0) std::printf(" / budget %gs", budget_s);
  std::printf("]\n");
  std::fflush(stdout);
}

Outcome linear_field_residual() {
  LyapunovHead head = testutil::quad_head(Tensor(1, 1, std::vector<double>{0.0}), 0.5);
  Tape tape;
  BoundHead bh = bind_head(tape, head, false);
  Tensor grid(101, 1, 0.0);
  for (int i = 0; i < 101; ++i) grid(i, 0) = -3.0 + 6.0 * i / 100.0;
  TapeFieldFn f = [](Value h) { return neg(h); };
  const Tensor res = tape.val(consistency_residual(bh, f, tape.constant(grid), 0));
  double worst = 0.0;
  for (int64_t i = 0; i < res.rows(); ++i) worst = std::max(worst, res(i, 0));
  return {worst <= 1e-12, "max residual " + g3(worst) + " on 101 nodes (tol 1e-12)"};
}

Outcome boundary_sampler() {
  LyapunovHead head = testutil::quad_head(Tensor(1, 2, 0.0), 1.0);  // V = ||h||^2
  Tensor dirs(64, 2, 0.0);
  for (int k = 0; k < 64; ++k) {
    const double th = 2.0 * 3.14159265358979312 * k / 64.0;
    dirs(k, 0) = std::cos(th);
    dirs(k, 1) = std::sin(th);
  }
  const BoundaryBatch b = boundary_sample(head, 0, dirs, 1e-4, 60);
  const double r_true = std::sqrt(std::log(10.0));
  int conv = 0;
  double w_dev = 0.0, r_dev = 0.0;
  for (int64_t i = 0; i < b.points.rows(); ++i) {
    conv += b.converged[static_cast<size_t>(i)] ? 1 : 0;
    w_dev = std::max(w_dev, std::abs(b.w_values(i, 0) - 0.9));
    r_dev = std::max(r_dev, std::abs(std::hypot(b.points(i, 0), b.points(i, 1)) - r_true));
  }
  const bool ok = conv == 64 && b.iterations <= 60 && w_dev <= 1e-4 && r_dev <= 1e-3;
  std::ostringstream d;
  d << conv << "/64 converged in " << b.iterations << " iters, |W-rho| " << g3(w_dev)
    << " (tol 1e-4), radius dev " << g3(r_dev) << " (tol 1e-3)";
  return {ok, d.str()};
}

Outcome convexity_probes() {
  Rng rng(2026);
  GatedConvexNet net = make_gated_convex(2, {6, 6, 1}, {4, 4, 0}, rng);
  project_nonneg(net);
  const AnchorSet an = build_anchors(3, 2, 11);
  const PropositionReport r = convexity_suite(net, an.c, 10000, 77);
  return {r.pass && r.statistic <= 1e-9,
          "worst midpoint violation " + g3(r.statistic) + " over 10000 probes (tol 1e-9)"};
}

Outcome separability_grid() {
  const SeparabilityTrial base = separability_mc(2, 2, 1, 100000, 404);
  bool ok = std::abs(base.empirical - 4.0 / 9.0) <= 0.02;
  const int64_t cases[6][3] = {{2, 2, 2}, {3, 2, 2}, {4, 3, 2},
                               {2, 2, 3}, {3, 2, 4}, {5, 4, 8}};
  double margin = 1.0;
  for (int i = 0; i < 6; ++i) {
    const SeparabilityTrial t =
        separability_mc(cases[i][0], cases[i][1], cases[i][2], 20000, 500 + i);
    ok = ok && t.empirical >= t.bound;
    margin = std::min(margin, t.empirical - t.bound);
    if (cases[i][2] >= cases[i][0] + 1) ok = ok && t.empirical == 1.0 && t.bound == 1.0;
  }
  return {ok, "P(2,2,1) " + g3(base.empirical) + " vs 4/9 (tol 0.02), min grid margin " +
                  g3(margin) + " (>= 0)"};
}

Outcome gradient_integrity() {
  int bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    Rng rng(1000 + k);
    LyapunovHead head;
    head.net = make_gated_convex(2, {4, 4, 1}, {3, 3, 0}, rng);
    project_nonneg(head.net);
    head.anchors = build_anchors(2, 2, 50 + static_cast<uint64_t>(k));
    MlpParams dyn = make_mlp(2, 5, 2, rng);
    const Tensor X = rng.uniform_tensor(3, 2, -1.0, 1.0);
    const Tensor P = rng.uniform_tensor(3, 2, -1.0, 1.0);
    std::vector<int64_t> y;
    for (int i = 0; i < 3; ++i) y.push_back(static_cast<int64_t>(rng.index(2)));

    // every loss term at once: trajectory scores, anchor logits, residual on a
    // mid state, and separation at fixed probe points
    const auto total_of = [&y](Tape& tape, BoundHead& bh, BoundMlp& bm, Value x,
                               const Tensor& pts) {
      TapeField fld = [&bm](Value h) { return mlp_forward<Value>(bm, h); };
      FixedSolverConfig sc;
      sc.horizon = 1.0;
      sc.steps = 4;
      TapeTrajectory traj = rk4_integrate(fld, x, sc, 2);
      const Value hT = traj.states.back();
      const Value con = consistency_residual(bh, bm, traj.states[1], 0);
      Value total = add(cla_loss(output_probs(bh, hT), y), scale(fc_loss(bh, hT, y), 1.5));
      total = add(total, scale(sum_all(con), 0.12 / 3.0));
      total = add(total, scale(sep_term(bh, tape.constant(pts), 0), 0.9));
      return total;
    };

    const auto eval_loss = [&](const Tensor& xin) {
      Tape tape;
      BoundHead bh = bind_head(tape, head, false);
      BoundMlp bm = bind_mlp(tape, dyn, false);
      return tape.val(total_of(tape, bh, bm, tape.constant(xin), P)).item();
    };

    Tape tape;
    BoundHead bh = bind_head(tape, head, true);
    BoundMlp bm = bind_mlp(tape, dyn, true);
    Value x = tape.leaf(X);
    tape.backward(total_of(tape, bh, bm, x, P));

    struct Slot {
      Tensor* t;
      Value v;
    };
    std::vector<Slot> slots;
    for (size_t i = 0; i < dyn.layers.size(); ++i) {
      slots.push_back({&dyn.layers[i].w, bm.layers[i].w});
      slots.push_back({&dyn.layers[i].b, bm.layers[i].b});
    }
    for (size_t i = 0; i < head.net.layers.size(); ++i) {
      auto& L = head.net.layers[i];
      auto& B = bh.net.layers[i];
      slots.push_back({&L.az, B.az});
      slots.push_back({&L.azu, B.azu});
      slots.push_back({&L.bz, B.bz});
      slots.push_back({&L.ax, B.ax});
      slots.push_back({&L.axu, B.axu});
      slots.push_back({&L.bx, B.bx});
      slots.push_back({&L.au, B.au});
      slots.push_back({&L.b, B.b});
    }
    for (size_t i = 0; i < head.net.upath.size(); ++i) {
      slots.push_back({&head.net.upath[i].w, bh.net.upath[i].w});
      slots.push_back({&head.net.upath[i].b, bh.net.upath[i].b});
    }

    const size_t target = static_cast<size_t>(k) % (slots.size() + 1);
    const double eps = 1e-5;
    double an = 0.0, fd = 0.0;
    if (target == slots.size()) {  // the input itself
      const int64_t e = k % X.numel();
      an = tape.grad(x)[e];
      Tensor hi = X, lo = X;
      hi[e] += eps;
      lo[e] -= eps;
      fd = (eval_loss(hi) - eval_loss(lo)) / (2.0 * eps);
    } else {
      Tensor& t = *slots[target].t;
      const int64_t e = k % t.numel();
      an = tape.grad(slots[target].v)[e];
      const double keep = t[e];
      t[e] = keep + eps;
      const double up = eval_loss(X);
      t[e] = keep - eps;
      const double dn = eval_loss(X);
      t[e] = keep;
      fd = (up - dn) / (2.0 * eps);
    }
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
    worst = std::max(worst, rel);
    if (rel > 1e-4) ++bad;
  }
  return {bad == 0, "100 seeded cases, worst rel err " + g3(worst) + " (tol 1e-4)"};
}

Outcome bit_identical_reruns() {
  const char* text = R"({
    "seed": 5,
    "dataset": {"tag": "moons", "count": 64, "noise_std": 0.05, "train_fraction": 0.75},
    "model": {"d_h": 2, "dynamics_hidden": 8, "x_widths": [6, 6, 1], "u_widths": [4, 4, 0]},
    "train": {"iterations": 5, "batch": 16, "horizon": 1.0, "ode_steps": 8,
              "traj_samples": 2, "refine_steps": 1, "boundary_samples": 4,
              "rand_per_pair": 5}
  })";
  const auto run_once = [&]() {
    RunConfig cfg = parse_run_config(text);
    const SplitDataset data = generate_dataset(cfg.dataset);
    ModelBundle bundle = build_bundle(data.train, cfg.model);
    std::ostringstream csv;
    const auto on_step = [&](const StepMetrics& m, const ModelBundle&) {
      char row[512];
      std::snprintf(row, sizeof(row),
                    "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(m.step), m.loss_total, m.loss_cla, m.loss_fc,
                    m.loss_con_mean, m.loss_con_max, m.loss_sep, m.acc_w, m.acc_fc, m.lr);
      csv << row;
    };
    train_loop(bundle, data.train, cfg.train, on_step);
    CheckpointMeta meta{1, cfg.seed, cfg.train.iterations, text};
    return std::pair<std::string, std::string>(checkpoint_string(bundle, meta), csv.str());
  };
  const auto a = run_once();
  const auto b = run_once();
  const bool ok = !a.first.empty() && a.first == b.first && a.second == b.second;
  return {ok, ok ? "checkpoint and metrics bytes identical across two runs"
                 : "reruns diverged"};
}

Outcome cubic_basin_boundary() {
  Rng rng(7);
  LyapunovHead head;
  head.net = make_gated_convex(1, {8, 8, 1}, {4, 4, 0}, rng);
  project_nonneg(head.net);
  head.anchors = AnchorSet{Tensor(1, 1, std::vector<double>{0.0}), 0.0};

  ZubovFitConfig cfg;
  cfg.iterations = 3000;
  cfg.batch = 128;
  cfg.lo = Tensor(1, 1, -1.5);
  cfg.hi = Tensor(1, 1, 1.5);
  cfg.adam.lr = 0.01;
  cfg.seed = 1;
  const TapeField f = [](Value h) { return sub(hadamard(square(h), h), h); };  // h^3 - h
  const std::vector<double> hist = fit_zubov(head, f, cfg);

  Tensor dirs(2, 1, std::vector<double>{1.0, -1.0});
  const BoundaryBatch b = boundary_sample(head, 0, dirs, 1e-4, 200);
  const double hi = b.points(0, 0), lo = b.points(1, 0);
  const bool ok = b.converged[0] && b.converged[1] && std::abs(hi - 1.0) <= 0.1 &&
                  std::abs(lo + 1.0) <= 0.1;
  return {ok, "level boundary at " + g3(lo) + " / " + g3(hi) +
                  " (true -1 / +1, tol 0.1), fit loss " + g3(hist.back())};
}

Outcome moons_margins() {
  const char* text = R"({
    "seed": 5,
    "dataset": {"tag": "moons", "count": 600, "noise_std": 0.08, "train_fraction": 0.75},
    "model": {"d_h": 2, "dynamics_hidden": 32, "x_widths": [16, 16, 1],
              "u_widths": [8, 8, 0]},
    "train": {"iterations": 600, "batch": 64, "horizon": 5.0, "ode_steps": 20,
              "traj_samples": 4, "refine_steps": 2, "refine_step_size": 0.6,
              "boundary_samples": 8, "rand_per_pair": 10, "lr": 0.005}
  })";
  RunConfig cfg = parse_run_config(text);
  const SplitDataset data = generate_dataset(cfg.dataset);

  EvalScenario pgd;
  pgd.name = "pgd";
  pgd.kind = "attack";
  pgd.attack.tag = "pgd";
  pgd.attack.epsilon = 0.1;
  pgd.attack.steps = 10;
  pgd.attack.step_size = 0.0125;
  pgd.seed = 99;
  EvalPipelineConfig pipe;
  pipe.horizon = cfg.train.horizon;
  pipe.ode_steps = cfg.train.ode_steps;
  pipe.traj_samples = cfg.train.traj_samples;

  ModelBundle tuned = build_bundle(data.train, cfg.model);
  train_loop(tuned, data.train, cfg.train);
  const auto rows = evaluate(tuned, data.test, {pgd}, pipe);

  // identical budget and seeds, consistency and separation switched off
  RunConfig base_cfg = parse_run_config(text);
  base_cfg.train.loss.lambda2 = 0.0;
  base_cfg.train.loss.lambda3 = 0.0;
  ModelBundle plain = build_bundle(data.train, base_cfg.model);
  train_loop(plain, data.train, base_cfg.train);
  const auto base_rows = evaluate(plain, data.test, {pgd}, pipe);

  std::vector<AxisSpec> axes;
  for (int64_t k = 0; k < tuned.domain_lo.cols(); ++k)
    axes.push_back({tuned.domain_lo(0, k), tuned.domain_hi(0, k), 101});
  const PropositionReport ov = overlap_check(tuned.head, axes, cfg.rho);
  const PropositionReport ct = containment_check(tuned, data.test, cfg.rho, 1,
                                                 cfg.train.horizon);

  const double clean = rows[0].acc_w;
  const double robust = rows[1].acc_w;
  const double base_robust = base_rows[1].acc_w;
  const bool ok = clean >= 0.95 && robust >= base_robust + 0.05 && ov.statistic <= 0.01 &&
                  ct.statistic >= 0.95;
  std::ostringstream d;
  d << "clean " << g3(clean) << " (>= 0.95), pgd " << g3(robust) << " vs plain "
    << g3(base_robust) << " (margin >= 0.05), overlap " << g3(ov.statistic)
    << " (<= 0.01), containment " << g3(ct.statistic) << " (>= 0.95)";
  return {ok, d.str()};
}

Outcome vdp_region_match() {
  Rng rng(21);
  LyapunovHead head;
  head.net = make_gated_convex(2, {12, 12, 1}, {6, 6, 0}, rng);
  project_nonneg(head.net);
  head.anchors = AnchorSet{Tensor(1, 2, 0.0), 0.0};
  head.delta = 0.25;  // keeps the reachable level boundary outside the basin

  const TapeField f = [](Value h) {
    Tape* t = h.tape;
    const Value x = matmul(h, t->constant(Tensor(2, 1, std::vector<double>{1.0, 0.0})));
    const Value y = matmul(h, t->constant(Tensor(2, 1, std::vector<double>{0.0, 1.0})));
    const Value fx = neg(y);
    const Value fy = sub(x, hadamard(affine(square(x), -1.0, 1.0), y));
    return concat_cols({fx, fy});
  };

  ZubovFitConfig fit;
  fit.iterations = 5000;
  fit.batch = 256;
  fit.lo = Tensor(1, 2, -3.0);
  fit.hi = Tensor(1, 2, 3.0);
  fit.adam.lr = 0.01;
  fit.seed = 2;
  fit_zubov(head, f, fit);

  const Field plain = [](const Tensor& h) {
    Tensor out(h.rows(), 2, 0.0);
    for (int64_t i = 0; i < h.rows(); ++i) {
      const double x = h(i, 0), y = h(i, 1);
      out(i, 0) = -y;
      out(i, 1) = x - (1.0 - x * x) * y;
    }
    return out;
  };
  const std::vector<AxisSpec> axes{{-3.0, 3.0, 101}, {-3.0, 3.0, 101}};
  const RoaGrid grid = roa_compare(plain, head, axes, 0.9, 60.0);
  const double iou = grid.iou.at(0);
  return {iou >= 0.85, "IoU " + g3(iou) + " vs the simulated basin on 101x101 (tol 0.85)"};
}

}  // namespace

int main() {
  std::printf("acceptance gate\n");
  criterion("linear-field residual identity", 1.0, linear_field_residual);
  criterion("level boundary sampler", 0.0, boundary_sampler);
  criterion("midpoint convexity after projection", 0.0, convexity_probes);
  criterion("convex separability probabilities", 0.0, separability_grid);
  criterion("loss gradients vs finite differences", 0.0, gradient_integrity);
  criterion("bit-identical reruns", 0.0, bit_identical_reruns);
  criterion("cubic-field basin boundary", 120.0, cubic_basin_boundary);
  criterion("two-moons co-training margins", 900.0, moons_margins);
  criterion("reversed van der pol region match", 600.0, vdp_region_match);

  if (failures == 0) {
    std::printf("all 9 criteria passed\n");
    return 0;
  }
  std::printf("%d of 9 criteria failed\n", failures);
  return 1;
}
