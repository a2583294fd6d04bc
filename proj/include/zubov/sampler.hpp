#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "zubov/nets.hpp"
#include "zubov/tensor.hpp"

namespace zubov {

struct SamplerError : TensorError {
  explicit SamplerError(const std::string& what) : TensorError(what) {}
};

// W evaluated at a batch of points, (m,d) -> (m,1); function evaluations only
using LevelFn = std::function<Tensor(const Tensor&)>;

// Unit directions for class cls: the normalized anchor differences plus, per
// pair, rand_per_pair perturbed copies normalize(primary + u*r) with r a random
// unit vector and u uniform in [0, scale_max].
Tensor make_directions(const Tensor& anchors, int cls, int rand_per_pair, double scale_max,
                       uint64_t seed);

struct BoundaryBatch {
  Tensor points;                    // (n, d): center + s_i * q_i
  std::vector<uint8_t> converged;   // per direction
  Tensor w_values;                  // (n, 1) W at the returned points
  int iterations = 0;
};

// Parallel bracketing along rays from the center: each direction keeps a signed
// step a, marches s += a, and rescales a <- |a| * Gamma * M with M the
// tri-level comparison of W against [rho-eps, rho+eps] and
// Gamma = (|M + sign(a)| + 2)/4 in {1/2, 3/4, 1}; converged rays (M = 0) drop
// out. raw_a_compat switches Gamma to the literal (|M + a| + 2)/4 reading.
BoundaryBatch boundary_sample(const LevelFn& w, const Tensor& center, const Tensor& dirs,
                              double rho, double eps, int n_max, double a_init = 1.0,
                              bool raw_a_compat = false);

// Pulls each row of h to a point on the segment toward the center with
// W <= rho (bisection on the crossing when h starts outside). Rows already
// inside the sublevel set are returned unchanged.
Tensor project_into_proa(const LevelFn& w, const Tensor& center, const Tensor& h, double rho,
                         double eps);

// convenience wrappers over the model head
BoundaryBatch boundary_sample(const LyapunovHead& head, int cls, const Tensor& dirs, double eps,
                              int n_max);
Tensor project_into_proa(const LyapunovHead& head, int cls, const Tensor& h, double eps);

}  // namespace zubov
