#pragma once

#include <functional>
#include <vector>

#include "zubov/dataset.hpp"
#include "zubov/losses.hpp"
#include "zubov/nets.hpp"
#include "zubov/ode.hpp"

namespace zubov {

struct TrainError : TensorError {
  explicit TrainError(const std::string& what) : TensorError(what) {}
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First-moment/second-moment state per parameter, in collect_params order.
struct AdamState {
  std::vector<Tensor> m, v;
  int64_t t = 0;
};

void adam_init(AdamState& st, const std::vector<ParamRef>& params);
void adam_step(std::vector<ParamRef>& params, const std::vector<Tensor>& grads, AdamState& st,
               const AdamConfig& cfg, double lr_scale);

struct TrainConfig {
  int64_t iterations = 600;
  int64_t batch = 64;
  double horizon = 10.0;
  int ode_steps = 40;
  int traj_samples = 5;          // trajectory states kept per example
  int refine_steps = 5;          // ascent steps on the residual
  double refine_step_size = 1.2;
  int boundary_samples = 16;     // per class, per step
  int rand_per_pair = 20;
  double dir_scale_max = 0.5;
  double boundary_eps = 1e-4;
  int boundary_iters = 60;
  double decay_frac = 0.7;       // one lr decay at this fraction of iterations
  double decay_factor = 0.1;
  double divergence_norm = 1e6;
  AdamConfig adam;
  LossConfig loss;
  uint64_t seed = 0;
};

struct StepMetrics {
  int64_t step = 0;
  double loss_total = 0, loss_cla = 0, loss_fc = 0;
  double loss_con_mean = 0, loss_con_max = 0, loss_con_sum = 0;
  double loss_sep = 0;
  double acc_w = 0, acc_fc = 0;
  double lr = 0;
};

// N2 ascent steps h <- project_into_proa(h + eta2 * grad_h l_con) with the
// model parameters held constant; returns detached points.
Tensor counterexample_refine(const ModelBundle& bundle, const Tensor& pts, int cls,
                             const TrainConfig& cfg);

StepMetrics train_step(ModelBundle& bundle, const Dataset& data,
                       const std::vector<int64_t>& batch_rows, AdamState& st,
                       const TrainConfig& cfg, int64_t step);

using StepCallbackFn = std::function<void(const StepMetrics&, const ModelBundle&)>;

std::vector<StepMetrics> train_loop(ModelBundle& bundle, const Dataset& train_set,
                                    const TrainConfig& cfg,
                                    const StepCallbackFn& on_step = nullptr);

// Builds a bundle sized for the dataset: identity lift when dimensions match,
// anchors from the deterministic construction, desk-scale widths.
struct BuildConfig {
  int64_t d_h = 2;
  int64_t dynamics_hidden = 64;
  std::vector<int64_t> x_widths = {32, 32, 1};
  std::vector<int64_t> u_widths = {32, 32, 0};
  double delta = 0.5, knee = 0.1, beta = 0.85, rho = 0.9, alpha = 0.0, eps_w = 1e-6;
  uint64_t seed = 0;
};
ModelBundle build_bundle(const Dataset& train_set, const BuildConfig& cfg);

// --- Zubov fit against a known field ----------------------------------------
// Minimizes the mean squared Zubov residual of the head over uniform
// collocation points in a box; the field enters through tape primitives so the
// residual stays differentiable in the head parameters.

struct ZubovFitConfig {
  int64_t iterations = 2000;
  int64_t batch = 256;
  Tensor lo, hi;  // (1,d) collocation box
  AdamConfig adam;
  double decay_frac = 0.7;
  double decay_factor = 0.1;
  double boundary_eps = 1e-4;  // slack for pulling collocation points into the set
  uint64_t seed = 0;
};

std::vector<double> fit_zubov(LyapunovHead& head, const TapeField& field,
                              const ZubovFitConfig& cfg);

}  // namespace zubov
