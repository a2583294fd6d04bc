#pragma once

#include <string>
#include <vector>

#include "zubov/dataset.hpp"
#include "zubov/nets.hpp"

namespace zubov {

struct EvalError : TensorError {
  explicit EvalError(const std::string& what) : TensorError(what) {}
};

struct AttackConfig {
  std::string tag = "pgd";  // fgsm | pgd | bim
  double epsilon = 0.1;     // L-inf radius
  int steps = 10;
  double step_size = 0.0125;  // epsilon / 8 per the evaluation protocol
};

// one evaluation row request; kind selects which extra fields apply
struct EvalScenario {
  std::string name;
  std::string kind = "clean";  // clean | attack | corrupt
  AttackConfig attack;
  std::string corrupt_tag = "gaussian";  // gaussian | uniform | salt
  double magnitude = 0.0;
  uint64_t seed = 0;
};

struct MetricsRow {
  std::string scenario;
  int64_t n = 0;
  double acc_w = 0.0;   // argmax of output_probs
  double acc_fc = 0.0;  // argmax of anchor logits
  std::vector<double> per_class_acc;  // W-head, per true class
  double res_mean = 0.0, res_max = 0.0;  // consistency residual at final states
  double containment = 0.0;  // W_y <= rho at every trajectory sample time
};

struct EvalPipelineConfig {
  double horizon = 10.0;
  int ode_steps = 40;
  int traj_samples = 5;
  double divergence_norm = 1e6;
};

// final latent states and the sampled trajectory, no gradients kept
struct ForwardStates {
  Tensor h_final;
  std::vector<Tensor> sampled;  // traj_samples states, t > 0
};
ForwardStates forward_states(const ModelBundle& bundle, const Tensor& x,
                             const EvalPipelineConfig& pipe);

// gradient of the mean classification loss w.r.t. the inputs, through the
// lift -> RK4 -> W-head pipeline
Tensor input_gradient(const ModelBundle& bundle, const Tensor& x,
                      const std::vector<int64_t>& y, const EvalPipelineConfig& pipe);

Tensor attack(const ModelBundle& bundle, const Tensor& x, const std::vector<int64_t>& y,
              const AttackConfig& cfg, const EvalPipelineConfig& pipe, uint64_t seed);

Tensor corrupt(const Tensor& x, const std::string& tag, double magnitude, const Tensor& lo,
               const Tensor& hi, uint64_t seed);

std::vector<MetricsRow> evaluate(const ModelBundle& bundle, const Dataset& test,
                                 const std::vector<EvalScenario>& scenarios,
                                 const EvalPipelineConfig& pipe = {});

}  // namespace zubov
