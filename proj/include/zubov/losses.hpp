#pragma once

#include <vector>

#include "zubov/nets.hpp"
#include "zubov/tape.hpp"

namespace zubov {

struct LossConfig {
  double lambda1 = 1.5;   // trajectory cross-entropy weight
  double lambda2 = 0.12;  // Zubov consistency weight
  double lambda3 = 0.9;   // separation weight
};

// field already bound to the tape x lives on
using TapeFieldFn = std::function<Value(Value)>;

// Squared Zubov residual per row of x: (dW_i/dh . f(h) + phi_i(h) (1 - W_i))^2
// with phi_i(h) = ||h - c_i||^2. The directional derivative is a forward
// tangent recorded on the reverse tape, so the result is differentiable with
// respect to head and field parameters, and with respect to x when x is a leaf.
Value consistency_residual(const BoundHead& head, const TapeFieldFn& field, Value x, int cls);
Value consistency_residual(const BoundHead& head, const BoundMlp& field, Value x, int cls);

// Inverse-Lyapunov class scores: rows of W per class are clamped to
// [eps_w, 1-eps_w], inverted, shifted by alpha and normalized to sum 1.
Value output_probs(const BoundHead& head, Value h_final);

// mean of -log p_y over the batch
Value cla_loss(Value probs, const std::vector<int64_t>& labels);

// mean cross-entropy of softmax(h_final . C^T) against labels; anchors frozen
Value fc_loss(const BoundHead& head, Value h_final, const std::vector<int64_t>& labels);

// sum over points of sum_{k != cls} -(1 - exp(-beta V_k)); points detached
Value sep_term(const BoundHead& head, Value pts_const, int cls);

}  // namespace zubov
