#pragma once

#include <string>
#include <vector>

#include "zubov/dataset.hpp"
#include "zubov/nets.hpp"
#include "zubov/ode.hpp"
#include "zubov/sampler.hpp"

namespace zubov {

struct VerifyError : TensorError {
  explicit VerifyError(const std::string& what) : TensorError(what) {}
};

struct AxisSpec {
  double lo = -2.0, hi = 2.0;
  int n = 101;  // node count, endpoints included
};

struct SeparabilityTrial {
  int64_t N = 0, M = 0, d = 0, trials = 0;
  double empirical = 0.0;
  double bound = 0.0;
};

struct PropositionReport {
  std::string tag;
  bool pass = false;
  double statistic = 0.0;
  double tolerance = 0.0;
};

struct RoaGrid {
  std::vector<AxisSpec> axes;
  std::vector<int> oracle;   // flattened node labels, -1 = none
  std::vector<int> learned;  // -1 = none
  std::vector<double> iou;   // per class
  double disagreement = 0.0;
};

// Euclidean distance from query to the convex hull of the point rows, via
// Wolfe's minimum-norm-point procedure (function evaluations only, finite
// termination up to float tolerance).
double hull_distance(const Tensor& pts, const Tensor& query);
bool hull_membership(const Tensor& pts, const Tensor& query, double tol = 1e-9);

double separability_bound(int64_t N, int64_t M, int64_t d);

// Monte Carlo estimate of the convex-separability probability: each of the M
// query points gets a fresh uniform design set of N points on [-1,1]^d, so the
// per-point exclusion events are independent and the d=1 probability matches
// the closed form (2/(N+1))^M exactly.
SeparabilityTrial separability_mc(int64_t N, int64_t M, int64_t d, int64_t trials,
                                  uint64_t seed);

// per-class level evaluators, one (m,1)-valued W function per class
RoaGrid roa_compare(const Field& f, const std::vector<LevelFn>& w_fns, const Tensor& anchors,
                    const std::vector<AxisSpec>& axes, double rho, double t_max,
                    double eps_conv = 0.05, const AdaptiveSolverConfig& ode = {});
RoaGrid roa_compare(const Field& f, const LyapunovHead& head,
                    const std::vector<AxisSpec>& axes, double rho, double t_max,
                    double eps_conv = 0.05, const AdaptiveSolverConfig& ode = {});

// fraction of grid nodes claimed by two or more classes at level rho; pass <= tol
PropositionReport overlap_check(const LyapunovHead& head, const std::vector<AxisSpec>& axes,
                                double rho, double tol = 0.01);

// over correctly classified test points whose final state lies in the
// rho-sublevel set of their class: fraction whose dopri5 trajectory satisfies
// W_y <= rho at all 4*gamma_t sample times; pass >= tol
PropositionReport containment_check(const ModelBundle& bundle, const Dataset& test, double rho,
                                    int gamma_t, double horizon = 10.0, double tol = 0.95);

// midpoint-convexity probe of the raw convex net output g(x, c) over random
// triples; statistic is the worst violation, pass <= tol. Evaluates g directly
// (no nonnegativity gate) so injected violations are measurable.
PropositionReport convexity_suite(const GatedConvexNet& net, const Tensor& anchors,
                                  int64_t samples, uint64_t seed, double box = 3.0,
                                  double tol = 1e-9);

}  // namespace zubov
