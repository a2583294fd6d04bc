#pragma once

// Shared fixtures. A head whose convex net has all-zero weights evaluates to
// g(x, c) = log 2 for every input, so g(x-c, c) - g(0, c) vanishes and
// V(x) = delta * ||x - c||^2 exactly. That makes W levels, residuals and
// boundary radii computable by hand.

#include <utility>
#include <vector>

#include "zubov/nets.hpp"
#include "zubov/rng.hpp"

namespace testutil {

using namespace zubov;

inline GatedConvexNet zero_convex(int64_t dim, std::vector<int64_t> zw = {4, 4, 1},
                                  std::vector<int64_t> uw = {3, 3, 0}) {
  Rng rng(1);
  GatedConvexNet net = make_gated_convex(dim, std::move(zw), std::move(uw), rng);
  for (auto& L : net.layers) {
    L.az = Tensor::zeros_like(L.az);
    L.azu = Tensor::zeros_like(L.azu);
    L.bz = Tensor::zeros_like(L.bz);
    L.ax = Tensor::zeros_like(L.ax);
    L.axu = Tensor::zeros_like(L.axu);
    L.bx = Tensor::zeros_like(L.bx);
    L.au = Tensor::zeros_like(L.au);
    L.b = Tensor::zeros_like(L.b);
  }
  for (auto& U : net.upath) {
    U.w = Tensor::zeros_like(U.w);
    U.b = Tensor::zeros_like(U.b);
  }
  return net;
}

// head with V(x) = delta * ||x - anchor_i||^2
inline LyapunovHead quad_head(Tensor anchors, double delta, double rho = 0.9) {
  LyapunovHead h;
  h.net = zero_convex(anchors.cols());
  h.anchors = AnchorSet{std::move(anchors), 0.0};
  h.delta = delta;
  h.rho = rho;
  return h;
}

inline MlpParams zero_mlp(int64_t in, int64_t hidden, int64_t out) {
  Rng rng(1);
  MlpParams m = make_mlp(in, hidden, out, rng);
  for (auto& L : m.layers) {
    L.w = Tensor::zeros_like(L.w);
    L.b = Tensor::zeros_like(L.b);
  }
  return m;
}

}  // namespace testutil
