#include "zubov/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "zubov/rng.hpp"
#include "zubov/sampler.hpp"

namespace zubov {

namespace {

Tensor vstack(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw TrainError("vstack: column mismatch");
  Tensor out(a.rows() + b.rows(), a.cols(), 0.0);
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t k = 0; k < a.cols(); ++k) out(i, k) = a(i, k);
  for (int64_t i = 0; i < b.rows(); ++i)
    for (int64_t k = 0; k < b.cols(); ++k) out(a.rows() + i, k) = b(i, k);
  return out;
}

double lr_scale_at(int64_t step, int64_t iterations, double frac, double factor) {
  const int64_t milestone = static_cast<int64_t>(std::llround(frac * static_cast<double>(iterations)));
  return step >= milestone ? factor : 1.0;
}

int64_t argmax_row(const Tensor& t, int64_t row) {
  int64_t best = 0;
  for (int64_t k = 1; k < t.cols(); ++k)
    if (t(row, k) > t(row, best)) best = k;
  return best;
}

}  // namespace

void adam_init(AdamState& st, const std::vector<ParamRef>& params) {
  st.m.clear();
  st.v.clear();
  st.t = 0;
  for (const auto& p : params) {
    st.m.push_back(Tensor::zeros_like(*p.t));
    st.v.push_back(Tensor::zeros_like(*p.t));
  }
}

void adam_step(std::vector<ParamRef>& params, const std::vector<Tensor>& grads, AdamState& st,
               const AdamConfig& cfg, double lr_scale) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw TrainError("adam_step: state/gradient arity mismatch");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  const double lr = cfg.lr * lr_scale;
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].t;
    const Tensor& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw TrainError("adam_step: gradient shape mismatch for " + params[i].name);
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    for (int64_t k = 0; k < p.numel(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
    }
  }
}

Tensor counterexample_refine(const ModelBundle& bundle, const Tensor& pts, int cls,
                             const TrainConfig& cfg) {
  Tensor cur = pts;
  for (int it = 0; it < cfg.refine_steps; ++it) {
    Tape tape;
    BoundHead bh = bind_head(tape, bundle.head, false);
    BoundMlp bf = bind_mlp(tape, bundle.dynamics, false);
    Value x = tape.leaf(cur);
    tape.backward(sum_all(consistency_residual(bh, bf, x, cls)));
    Tensor g = tape.grad(x);
    for (int64_t k = 0; k < cur.numel(); ++k) cur[k] += cfg.refine_step_size * g[k];
    cur = project_into_proa(bundle.head, cls, cur, cfg.boundary_eps);
  }
  return cur;
}

StepMetrics train_step(ModelBundle& bundle, const Dataset& data,
                       const std::vector<int64_t>& batch_rows, AdamState& st,
                       const TrainConfig& cfg, int64_t step) {
  const int64_t B = static_cast<int64_t>(batch_rows.size());
  if (B == 0) throw TrainError("train_step: empty batch");
  const int64_t L = bundle.classes();
  const int64_t d_h = bundle.d_h();

  Tensor xb(B, data.X.cols(), 0.0);
  std::vector<int64_t> yb(static_cast<size_t>(B));
  for (int64_t i = 0; i < B; ++i) {
    const int64_t r = batch_rows[static_cast<size_t>(i)];
    if (r < 0 || r >= data.X.rows()) throw TrainError("train_step: batch row out of range");
    for (int64_t k = 0; k < data.X.cols(); ++k) xb(i, k) = data.X(r, k);
    yb[static_cast<size_t>(i)] = data.y[static_cast<size_t>(r)];
  }

  Tape tape;
  BoundMlp bdyn = bind_mlp(tape, bundle.dynamics, true);
  std::optional<BoundMlp> blift;
  if (bundle.lift) blift = bind_mlp(tape, *bundle.lift, true);
  BoundHead bhead = bind_head(tape, bundle.head, true);

  Value x = tape.constant(xb);
  Value h0 = blift ? mlp_forward<Value>(*blift, x) : x;
  TapeField fld = [&bdyn](Value h) { return mlp_forward<Value>(bdyn, h); };
  FixedSolverConfig scfg;
  scfg.horizon = cfg.horizon;
  scfg.steps = cfg.ode_steps;
  scfg.divergence_norm = cfg.divergence_norm;
  TapeTrajectory traj = rk4_integrate(fld, h0, scfg, cfg.traj_samples);
  Value hT = traj.states.back();

  Value probs = output_probs(bhead, hT);
  Value l_cla = cla_loss(probs, yb);
  Value l_fc = fc_loss(bhead, hT, yb);

  // per-class consistency and separation terms
  std::optional<Value> con_total, sep_total;
  double con_max = 0.0, con_sum_pooled = 0.0;
  int64_t con_count = 0;
  for (int64_t c = 0; c < L; ++c) {
    std::vector<int64_t> members;
    for (int64_t i = 0; i < B; ++i)
      if (yb[static_cast<size_t>(i)] == c) members.push_back(i);

    if (!members.empty()) {
      const int64_t ns = cfg.traj_samples;
      Tensor s1(static_cast<int64_t>(members.size()) * ns, d_h, 0.0);
      for (size_t mi = 0; mi < members.size(); ++mi) {
        for (int64_t s = 0; s < ns; ++s) {
          const Tensor& state = tape.val(traj.states[static_cast<size_t>(s + 1)]);
          for (int64_t k = 0; k < d_h; ++k)
            s1(static_cast<int64_t>(mi) * ns + s, k) = state(members[mi], k);
        }
      }
      Tensor refined = counterexample_refine(bundle, s1, static_cast<int>(c), cfg);
      Tensor pts = vstack(s1, refined);
      Value res = consistency_residual(bhead, bdyn, tape.constant(std::move(pts)),
                                       static_cast<int>(c));
      // copy count first: sum_all below may reallocate the tape's storage
      const Tensor& rv = tape.val(res);
      const int64_t nres = rv.rows();
      for (int64_t i = 0; i < nres; ++i) {
        con_max = std::max(con_max, rv(i, 0));
        con_sum_pooled += rv(i, 0);
      }
      con_count += nres;
      Value mean_c = affine(sum_all(res), 1.0 / static_cast<double>(nres), 0.0);
      con_total = con_total ? add(*con_total, mean_c) : mean_c;
    }

    if (L >= 2 && cfg.boundary_samples > 0) {
      Tensor dirs = make_directions(bundle.head.anchors.c, static_cast<int>(c),
                                    cfg.rand_per_pair, cfg.dir_scale_max,
                                    mix_seed(cfg.seed, 0x9d1ce5u + static_cast<uint64_t>(step) * static_cast<uint64_t>(L) + static_cast<uint64_t>(c)));
      if (dirs.rows() < cfg.boundary_samples)
        throw TrainError("train_step: rand_per_pair yields too few boundary directions");
      Tensor sub(cfg.boundary_samples, d_h, 0.0);
      for (int64_t i = 0; i < sub.rows(); ++i)
        for (int64_t k = 0; k < d_h; ++k) sub(i, k) = dirs(i, k);
      BoundaryBatch bb = boundary_sample(bundle.head, static_cast<int>(c), sub,
                                         cfg.boundary_eps, cfg.boundary_iters);
      int64_t kept = 0;
      for (uint8_t f : bb.converged) kept += f;
      Tensor bpts(kept, d_h, 0.0);
      int64_t w = 0;
      for (int64_t i = 0; i < bb.points.rows(); ++i) {
        if (!bb.converged[static_cast<size_t>(i)]) continue;
        for (int64_t k = 0; k < d_h; ++k) bpts(w, k) = bb.points(i, k);
        ++w;
      }
      Value sep_c = affine(sep_term(bhead, tape.constant(std::move(bpts)), static_cast<int>(c)),
                           1.0 / static_cast<double>(kept), 0.0);
      sep_total = sep_total ? add(*sep_total, sep_c) : sep_c;
    }
  }

  Value total = add(l_cla, affine(l_fc, cfg.loss.lambda1, 0.0));
  if (con_total) total = add(total, affine(*con_total, cfg.loss.lambda2, 0.0));
  if (sep_total) total = add(total, affine(*sep_total, cfg.loss.lambda3, 0.0));

  tape.backward(total);

  std::vector<ParamRef> params = collect_params(bundle);
  std::vector<Value> leaves = bound_param_values(bdyn);
  if (blift)
    for (Value v : bound_param_values(*blift)) leaves.push_back(v);
  for (Value v : bound_param_values(bhead.net)) leaves.push_back(v);
  if (leaves.size() != params.size())
    throw TrainError("train_step: bound leaf count does not match parameter count");
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Value v : leaves) grads.push_back(tape.grad(v));

  const double ls = lr_scale_at(step, cfg.iterations, cfg.decay_frac, cfg.decay_factor);
  adam_step(params, grads, st, cfg.adam, ls);
  project_nonneg(bundle.head.net);

  StepMetrics m;
  m.step = step;
  m.loss_total = tape.val(total).item();
  m.loss_cla = tape.val(l_cla).item();
  m.loss_fc = tape.val(l_fc).item();
  m.loss_con_sum = con_total ? tape.val(*con_total).item() : 0.0;
  m.loss_con_mean = con_count > 0 ? con_sum_pooled / static_cast<double>(con_count) : 0.0;
  m.loss_con_max = con_max;
  m.loss_sep = sep_total ? tape.val(*sep_total).item() : 0.0;
  m.lr = cfg.adam.lr * ls;

  const Tensor& pv = tape.val(probs);
  const Tensor& hv = tape.val(hT);
  int64_t hit_w = 0, hit_fc = 0;
  for (int64_t i = 0; i < B; ++i) {
    if (argmax_row(pv, i) == yb[static_cast<size_t>(i)]) ++hit_w;
    int64_t best = 0;
    double best_dot = -1e300;
    for (int64_t c = 0; c < L; ++c) {
      double dot = 0.0;
      for (int64_t k = 0; k < d_h; ++k) dot += hv(i, k) * bundle.head.anchors.c(c, k);
      if (dot > best_dot) {
        best_dot = dot;
        best = c;
      }
    }
    if (best == yb[static_cast<size_t>(i)]) ++hit_fc;
  }
  m.acc_w = static_cast<double>(hit_w) / static_cast<double>(B);
  m.acc_fc = static_cast<double>(hit_fc) / static_cast<double>(B);
  return m;
}

std::vector<StepMetrics> train_loop(ModelBundle& bundle, const Dataset& train_set,
                                    const TrainConfig& cfg, const StepCallbackFn& on_step) {
  const int64_t n = train_set.X.rows();
  if (n == 0) throw TrainError("train_loop: empty training set");
  if (cfg.batch < 1) throw TrainError("train_loop: batch must be positive");

  std::vector<ParamRef> params = collect_params(bundle);
  AdamState st;
  adam_init(st, params);

  Rng rng(mix_seed(cfg.seed, 0xba7c4u));
  std::vector<int64_t> pool(static_cast<size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  const int64_t take = std::min<int64_t>(cfg.batch, n);

  std::vector<StepMetrics> history;
  history.reserve(static_cast<size_t>(cfg.iterations));
  for (int64_t step = 0; step < cfg.iterations; ++step) {
    for (int64_t i = 0; i < take; ++i) {
      const int64_t j = i + rng.index(n - i);
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    std::vector<int64_t> rows(pool.begin(), pool.begin() + take);
    StepMetrics m = train_step(bundle, train_set, rows, st, cfg, step);
    history.push_back(m);
    if (on_step) on_step(m, bundle);
  }
  return history;
}

ModelBundle build_bundle(const Dataset& train_set, const BuildConfig& cfg) {
  const int64_t d_in = train_set.X.cols();
  const int64_t L = train_set.classes;
  if (L < 2) throw TrainError("build_bundle: need at least two classes");

  ModelBundle b;
  b.d_in = d_in;
  Rng rng(mix_seed(cfg.seed, 0x6e75u));
  b.dynamics = make_mlp(cfg.d_h, cfg.dynamics_hidden, cfg.d_h, rng);
  if (d_in != cfg.d_h) b.lift = make_mlp(d_in, cfg.dynamics_hidden, cfg.d_h, rng);
  b.head.net = make_gated_convex(cfg.d_h, cfg.x_widths, cfg.u_widths, rng);
  project_nonneg(b.head.net);
  b.head.anchors = build_anchors(L, cfg.d_h, mix_seed(cfg.seed, 0xa2c4u));
  b.head.delta = cfg.delta;
  b.head.knee = cfg.knee;
  b.head.beta = cfg.beta;
  b.head.rho = cfg.rho;
  b.head.alpha = cfg.alpha;
  b.head.eps_w = cfg.eps_w;
  b.domain_lo = train_set.lo;
  b.domain_hi = train_set.hi;
  return b;
}

std::vector<double> fit_zubov(LyapunovHead& head, const TapeField& field,
                              const ZubovFitConfig& cfg) {
  const int64_t d = head.dim();
  if (cfg.lo.rows() != 1 || cfg.lo.cols() != d || cfg.hi.rows() != 1 || cfg.hi.cols() != d)
    throw TrainError("fit_zubov: collocation box must be (1,d)");
  for (int64_t k = 0; k < d; ++k)
    if (!(cfg.lo(0, k) < cfg.hi(0, k))) throw TrainError("fit_zubov: empty collocation box");

  std::vector<ParamRef> params = collect_params(head.net, "head");
  AdamState st;
  adam_init(st, params);
  Rng rng(mix_seed(cfg.seed, 0xf17u));

  std::vector<double> history;
  history.reserve(static_cast<size_t>(cfg.iterations));
  for (int64_t step = 0; step < cfg.iterations; ++step) {
    Tensor pts(cfg.batch, d, 0.0);
    for (int64_t i = 0; i < cfg.batch; ++i)
      for (int64_t k = 0; k < d; ++k) pts(i, k) = rng.uniform(cfg.lo(0, k), cfg.hi(0, k));
    // the residual only characterizes the basin inside the sublevel set, and
    // evaluating it outside admits a degenerate fit that saturates W off the
    // anchor; pulling the batch onto the set keeps pressure on its frontier
    pts = project_into_proa(head, 0, pts, cfg.boundary_eps);

    Tape tape;
    BoundHead bh = bind_head(tape, head, true);
    Value res = consistency_residual(bh, field, tape.constant(std::move(pts)), 0);
    Value loss = affine(sum_all(res), 1.0 / static_cast<double>(cfg.batch), 0.0);
    tape.backward(loss);

    std::vector<Value> leaves = bound_param_values(bh.net);
    if (leaves.size() != params.size())
      throw TrainError("fit_zubov: bound leaf count does not match parameter count");
    std::vector<Tensor> grads;
    grads.reserve(leaves.size());
    for (Value v : leaves) grads.push_back(tape.grad(v));

    adam_step(params, grads, st, cfg.adam,
              lr_scale_at(step, cfg.iterations, cfg.decay_frac, cfg.decay_factor));
    project_nonneg(head.net);
    history.push_back(tape.val(loss).item());
  }
  return history;
}

}  // namespace zubov
