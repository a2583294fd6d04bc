#pragma once

#include <functional>
#include <vector>

#include "zubov/tape.hpp"
#include "zubov/tensor.hpp"

namespace zubov {

struct SolverError : TensorError {
  explicit SolverError(const std::string& what) : TensorError(what) {}
};
struct DivergenceError : SolverError {
  explicit DivergenceError(const std::string& what) : SolverError(what) {}
};
struct StiffnessError : SolverError {
  explicit StiffnessError(const std::string& what) : SolverError(what) {}
};

struct FixedSolverConfig {
  double horizon = 10.0;
  int steps = 40;
  double divergence_norm = 1e6;
};

struct AdaptiveSolverConfig {
  double abs_tol = 1e-3;
  double rel_tol = 1e-3;
  double divergence_norm = 1e6;
  double h_min = 1e-12;
  double safety = 0.9;
  double fac_min = 0.2;
  double fac_max = 10.0;
  int max_steps = 200000;
};

// dynamics recorded on a tape (states may be batched, one row per trajectory)
using TapeField = std::function<Value(Value)>;
// untracked dynamics for evaluation-time integration
using Field = std::function<Tensor(const Tensor&)>;

struct TapeTrajectory {
  std::vector<double> times;   // n_samples+1 entries, first 0, last horizon
  std::vector<Value> states;   // states at those times, all on the caller's tape
};

// Classic fixed-step RK4 with every stage on the tape, so backward yields
// d(loss)/d(h0, field parameters). steps must be divisible by n_samples.
TapeTrajectory rk4_integrate(const TapeField& f, Value h0, const FixedSolverConfig& cfg,
                             int n_samples);

struct PlainTrajectory {
  std::vector<double> times;
  std::vector<Tensor> states;
  int steps_taken = 0;
};

// Dormand-Prince 5(4) with a PI step controller; no gradients. States at the
// requested interior times come from step-endpoint interpolation; the final
// step is clipped to land on t_end exactly.
PlainTrajectory dopri5_integrate(const Field& f, Tensor h0, double t_end,
                                 const AdaptiveSolverConfig& cfg,
                                 const std::vector<double>& sample_times);

// Integrates a single state (1,d) until it enters an eps ball of some anchor
// row; returns that anchor's index, or -1 if t_max elapses or the trajectory
// escapes to norm > divergence_norm (escape cannot reach any anchor).
int flow_to_convergence(const Field& f, const Tensor& h0, const Tensor& anchors,
                        double eps_conv, double t_max, const AdaptiveSolverConfig& cfg);

}  // namespace zubov
