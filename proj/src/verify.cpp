#include "zubov/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zubov/rng.hpp"

namespace zubov {

namespace {

// solve the affine minimum-norm system [G 1; 1^T 0] [w; mu] = [0; 1]
bool solve_affine(const std::vector<std::vector<double>>& G, std::vector<double>& w) {
  const size_t k = G.size();
  const size_t n = k + 1;
  std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = 0; j < k; ++j) A[i][j] = G[i][j];
    A[i][k] = 1.0;
  }
  for (size_t j = 0; j < k; ++j) A[k][j] = 1.0;
  A[k][n] = 1.0;
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    if (std::abs(A[piv][col]) < 1e-13) return false;
    std::swap(A[col], A[piv]);
    for (size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = A[r][col] / A[col][col];
      if (f == 0.0) continue;
      for (size_t cc = col; cc <= n; ++cc) A[r][cc] -= f * A[col][cc];
    }
  }
  w.resize(k);
  for (size_t i = 0; i < k; ++i) w[i] = A[i][n] / A[i][i];
  return true;
}

int64_t node_count(const std::vector<AxisSpec>& axes) {
  int64_t total = 1;
  for (const auto& a : axes) {
    if (a.n < 2 || !(a.lo < a.hi)) throw VerifyError("axis needs n >= 2 and lo < hi");
    total *= a.n;
  }
  return total;
}

Tensor grid_nodes(const std::vector<AxisSpec>& axes) {
  const int64_t d = static_cast<int64_t>(axes.size());
  const int64_t total = node_count(axes);
  Tensor pts(total, d, 0.0);
  std::vector<int64_t> idx(axes.size(), 0);
  for (int64_t r = 0; r < total; ++r) {
    for (int64_t k = 0; k < d; ++k) {
      const auto& a = axes[static_cast<size_t>(k)];
      pts(r, k) = a.lo + (a.hi - a.lo) * static_cast<double>(idx[static_cast<size_t>(k)]) /
                             static_cast<double>(a.n - 1);
    }
    for (int64_t k = d - 1; k >= 0; --k) {
      auto& i = idx[static_cast<size_t>(k)];
      if (++i < axes[static_cast<size_t>(k)].n) break;
      i = 0;
    }
  }
  return pts;
}

// plain forward of the gated convex net, no tape and no nonnegativity gate
Tensor g_plain(const GatedConvexNet& net, const Tensor& x, const Tensor& c_row) {
  const int64_t m = x.rows();
  auto softmax_row = [](Tensor t) {
    double mx = t(0, 0);
    for (int64_t k = 1; k < t.cols(); ++k) mx = std::max(mx, t(0, k));
    double sum = 0.0;
    for (int64_t k = 0; k < t.cols(); ++k) {
      t(0, k) = std::exp(t(0, k) - mx);
      sum += t(0, k);
    }
    for (int64_t k = 0; k < t.cols(); ++k) t(0, k) /= sum;
    return t;
  };
  auto splus = [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); };

  Tensor u = c_row;
  Tensor z = x;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const auto& L = net.layers[i];
    Tensor gz = softmax_row(t_add(t_matmul(u, L.azu), L.bz));
    Tensor gx = softmax_row(t_add(t_matmul(u, L.axu), L.bx));
    Tensor zg = z;
    for (int64_t r = 0; r < m; ++r)
      for (int64_t k = 0; k < z.cols(); ++k) zg(r, k) *= gz(0, k);
    Tensor xg = x;
    for (int64_t r = 0; r < m; ++r)
      for (int64_t k = 0; k < x.cols(); ++k) xg(r, k) *= gx(0, k);
    Tensor lin = t_add(t_matmul(zg, L.az), t_matmul(xg, L.ax));
    Tensor tu = t_add(t_matmul(u, L.au), L.b);
    Tensor nz(m, lin.cols(), 0.0);
    for (int64_t r = 0; r < m; ++r)
      for (int64_t k = 0; k < lin.cols(); ++k) nz(r, k) = splus(lin(r, k) + tu(0, k));
    z = std::move(nz);
    if (i < net.upath.size()) {
      Tensor nu = t_add(t_matmul(u, net.upath[i].w), net.upath[i].b);
      for (int64_t k = 0; k < nu.cols(); ++k) nu(0, k) = std::tanh(nu(0, k));
      u = std::move(nu);
    }
  }
  return z;
}

}  // namespace

double hull_distance(const Tensor& pts, const Tensor& query) {
  const int64_t N = pts.rows(), d = pts.cols();
  if (N < 1) throw VerifyError("hull_distance: need at least one point");
  if (query.rows() != 1 || query.cols() != d)
    throw VerifyError("hull_distance: query must be (1,d)");

  std::vector<std::vector<double>> P(static_cast<size_t>(N), std::vector<double>(static_cast<size_t>(d)));
  for (int64_t i = 0; i < N; ++i)
    for (int64_t k = 0; k < d; ++k) P[static_cast<size_t>(i)][static_cast<size_t>(k)] = pts(i, k) - query(0, k);
  auto dot = [d](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (int64_t k = 0; k < d; ++k) s += a[static_cast<size_t>(k)] * b[static_cast<size_t>(k)];
    return s;
  };

  size_t best = 0;
  double bn = dot(P[0], P[0]);
  for (size_t j = 1; j < P.size(); ++j) {
    const double v = dot(P[j], P[j]);
    if (v < bn) {
      bn = v;
      best = j;
    }
  }
  std::vector<size_t> S{best};
  std::vector<double> lam{1.0};
  std::vector<double> x = P[best];

  const int major_cap = 8 * static_cast<int>(N + d) + 64;
  for (int major = 0; major < major_cap; ++major) {
    const double xx = dot(x, x);
    if (xx <= 1e-24) break;  // at the origin: query inside the hull
    size_t q = 0;
    double qv = dot(x, P[0]);
    for (size_t j = 1; j < P.size(); ++j) {
      const double v = dot(x, P[j]);
      if (v < qv) {
        qv = v;
        q = j;
      }
    }
    if (qv >= xx - 1e-12 * std::max(1.0, xx)) break;  // Wolfe optimality
    if (std::find(S.begin(), S.end(), q) != S.end()) break;
    S.push_back(q);
    lam.push_back(0.0);

    for (int minor = 0; minor < static_cast<int>(N + d) + 16; ++minor) {
      const size_t k = S.size();
      std::vector<std::vector<double>> G(k, std::vector<double>(k, 0.0));
      for (size_t i = 0; i < k; ++i)
        for (size_t j = i; j < k; ++j) G[i][j] = G[j][i] = dot(P[S[i]], P[S[j]]);
      std::vector<double> w;
      if (!solve_affine(G, w)) {
        S.pop_back();
        lam.pop_back();
        break;
      }
      bool interior = true;
      for (double wi : w)
        if (wi <= 1e-11) interior = false;
      if (interior) {
        lam = w;
        break;
      }
      double theta = 1.0;
      for (size_t i = 0; i < k; ++i) {
        if (w[i] > 1e-11) continue;
        const double denom = lam[i] - w[i];
        if (denom > 1e-300) theta = std::min(theta, lam[i] / denom);
      }
      for (size_t i = 0; i < k; ++i) lam[i] += theta * (w[i] - lam[i]);
      std::vector<size_t> s2;
      std::vector<double> l2;
      for (size_t i = 0; i < k; ++i)
        if (lam[i] > 1e-11) {
          s2.push_back(S[i]);
          l2.push_back(lam[i]);
        }
      if (s2.empty()) {
        s2.push_back(S[0]);
        l2.push_back(1.0);
      }
      double sum = std::accumulate(l2.begin(), l2.end(), 0.0);
      for (auto& v : l2) v /= sum;
      S = std::move(s2);
      lam = std::move(l2);
    }
    x.assign(static_cast<size_t>(d), 0.0);
    for (size_t i = 0; i < S.size(); ++i)
      for (int64_t kk = 0; kk < d; ++kk)
        x[static_cast<size_t>(kk)] += lam[i] * P[S[i]][static_cast<size_t>(kk)];
  }
  return std::sqrt(std::max(0.0, dot(x, x)));
}

bool hull_membership(const Tensor& pts, const Tensor& query, double tol) {
  return hull_distance(pts, query) <= tol;
}

double separability_bound(int64_t N, int64_t M, int64_t d) {
  if (N < 2 || M < 1 || d < 1) throw VerifyError("separability_bound: need N >= 2, M >= 1, d >= 1");
  if (d >= N + 1) return 1.0;
  const double ratio = static_cast<double>(N - 1) / static_cast<double>(N + 1);
  return std::pow(1.0 - std::pow(ratio, static_cast<double>(d)), static_cast<double>(M));
}

SeparabilityTrial separability_mc(int64_t N, int64_t M, int64_t d, int64_t trials,
                                  uint64_t seed) {
  if (trials < 1) throw VerifyError("separability_mc: trials must be >= 1");
  SeparabilityTrial out;
  out.N = N;
  out.M = M;
  out.d = d;
  out.trials = trials;
  out.bound = separability_bound(N, M, d);
  Rng rng(mix_seed(seed, 0x5e9a4au));
  int64_t ok = 0;
  Tensor x1(N, d, 0.0), y(1, d, 0.0);
  for (int64_t t = 0; t < trials; ++t) {
    bool separable = true;
    for (int64_t j = 0; j < M && separable; ++j) {
      for (int64_t k = 0; k < x1.numel(); ++k) x1[k] = rng.uniform(-1.0, 1.0);
      for (int64_t k = 0; k < d; ++k) y(0, k) = rng.uniform(-1.0, 1.0);
      if (hull_membership(x1, y)) separable = false;
    }
    if (separable) ++ok;
  }
  out.empirical = static_cast<double>(ok) / static_cast<double>(trials);
  return out;
}

RoaGrid roa_compare(const Field& f, const std::vector<LevelFn>& w_fns, const Tensor& anchors,
                    const std::vector<AxisSpec>& axes, double rho, double t_max,
                    double eps_conv, const AdaptiveSolverConfig& ode) {
  const int64_t L = static_cast<int64_t>(w_fns.size());
  if (L < 1) throw VerifyError("roa_compare: need at least one level function");
  if (anchors.rows() != L) throw VerifyError("roa_compare: anchor count must match level functions");
  if (static_cast<int64_t>(axes.size()) != anchors.cols())
    throw VerifyError("roa_compare: axes dimension must match anchors");

  RoaGrid grid;
  grid.axes = axes;
  Tensor nodes = grid_nodes(axes);
  const int64_t total = nodes.rows(), d = nodes.cols();

  Tensor w_all(total, L, 0.0);
  for (int64_t c = 0; c < L; ++c) {
    Tensor wc = w_fns[static_cast<size_t>(c)](nodes);
    if (wc.rows() != total || wc.cols() != 1)
      throw VerifyError("roa_compare: level function must return (m,1)");
    for (int64_t i = 0; i < total; ++i) w_all(i, c) = wc(i, 0);
  }

  grid.oracle.resize(static_cast<size_t>(total), -1);
  grid.learned.resize(static_cast<size_t>(total), -1);
  Tensor h0(1, d, 0.0);
  for (int64_t i = 0; i < total; ++i) {
    int64_t bc = 0;
    for (int64_t c = 1; c < L; ++c)
      if (w_all(i, c) < w_all(i, bc)) bc = c;
    grid.learned[static_cast<size_t>(i)] = w_all(i, bc) < rho ? static_cast<int>(bc) : -1;
    for (int64_t k = 0; k < d; ++k) h0(0, k) = nodes(i, k);
    grid.oracle[static_cast<size_t>(i)] = flow_to_convergence(f, h0, anchors, eps_conv, t_max, ode);
  }

  int64_t disagree = 0;
  for (int64_t i = 0; i < total; ++i)
    if (grid.oracle[static_cast<size_t>(i)] != grid.learned[static_cast<size_t>(i)]) ++disagree;
  grid.disagreement = static_cast<double>(disagree) / static_cast<double>(total);
  for (int64_t c = 0; c < L; ++c) {
    int64_t inter = 0, uni = 0;
    for (int64_t i = 0; i < total; ++i) {
      const bool a = grid.oracle[static_cast<size_t>(i)] == c;
      const bool b = grid.learned[static_cast<size_t>(i)] == c;
      inter += (a && b);
      uni += (a || b);
    }
    grid.iou.push_back(uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0);
  }
  return grid;
}

RoaGrid roa_compare(const Field& f, const LyapunovHead& head, const std::vector<AxisSpec>& axes,
                    double rho, double t_max, double eps_conv,
                    const AdaptiveSolverConfig& ode) {
  std::vector<LevelFn> fns;
  for (int64_t c = 0; c < head.classes(); ++c) fns.push_back(make_w_eval(head, static_cast<int>(c)));
  return roa_compare(f, fns, head.anchors.c, axes, rho, t_max, eps_conv, ode);
}

PropositionReport overlap_check(const LyapunovHead& head, const std::vector<AxisSpec>& axes,
                                double rho, double tol) {
  if (static_cast<int64_t>(axes.size()) != head.dim())
    throw VerifyError("overlap_check: axes dimension must match the head");
  Tensor nodes = grid_nodes(axes);
  const int64_t total = nodes.rows(), L = head.classes();
  int64_t overlapped = 0;
  std::vector<Tensor> w(static_cast<size_t>(L));
  for (int64_t c = 0; c < L; ++c) w[static_cast<size_t>(c)] = w_eval(head, nodes, static_cast<int>(c));
  for (int64_t i = 0; i < total; ++i) {
    int claims = 0;
    for (int64_t c = 0; c < L; ++c)
      if (w[static_cast<size_t>(c)](i, 0) < rho) ++claims;
    if (claims >= 2) ++overlapped;
  }
  PropositionReport rep;
  rep.tag = "non-overlap";
  rep.statistic = static_cast<double>(overlapped) / static_cast<double>(total);
  rep.tolerance = tol;
  rep.pass = rep.statistic <= tol;
  return rep;
}

PropositionReport containment_check(const ModelBundle& bundle, const Dataset& test, double rho,
                                    int gamma_t, double horizon, double tol) {
  if (gamma_t < 1) throw VerifyError("containment_check: gamma_t must be >= 1");
  const int64_t n = test.X.rows();
  if (n == 0) throw VerifyError("containment_check: empty test set");

  Field dyn = make_field_eval(bundle.dynamics);
  Tensor h0_all = bundle.lift ? make_field_eval(*bundle.lift)(test.X) : test.X;

  const int samples = 4 * gamma_t;
  std::vector<double> times;
  for (int s = 1; s <= samples; ++s)
    times.push_back(horizon * static_cast<double>(s) / static_cast<double>(samples));

  AdaptiveSolverConfig ode;  // evaluation-grade tolerances
  const int64_t L = bundle.classes();
  int64_t denom = 0, contained = 0;
  Tensor h0(1, bundle.d_h(), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t k = 0; k < bundle.d_h(); ++k) h0(0, k) = h0_all(i, k);
    PlainTrajectory traj = dopri5_integrate(dyn, h0, horizon, ode, times);
    const Tensor& hT = traj.states.back();
    const int64_t yi = test.y[static_cast<size_t>(i)];

    double w_best = 2.0, w_true_T = 2.0;
    int64_t best = -1;
    for (int64_t c = 0; c < L; ++c) {
      const double wv = w_eval(bundle.head, hT, static_cast<int>(c))(0, 0);
      if (wv < w_best) {
        w_best = wv;
        best = c;
      }
      if (c == yi) w_true_T = wv;
    }
    if (best != yi || w_true_T > rho) continue;  // wrong class or endpoint outside
    ++denom;
    bool inside = true;
    for (const Tensor& h : traj.states)
      if (w_eval(bundle.head, h, static_cast<int>(yi))(0, 0) > rho) inside = false;
    if (inside) ++contained;
  }

  PropositionReport rep;
  rep.tag = "containment";
  rep.statistic = denom > 0 ? static_cast<double>(contained) / static_cast<double>(denom) : 0.0;
  rep.tolerance = tol;
  rep.pass = rep.statistic >= tol;
  return rep;
}

PropositionReport convexity_suite(const GatedConvexNet& net, const Tensor& anchors,
                                  int64_t samples, uint64_t seed, double box, double tol) {
  if (samples < 1) throw VerifyError("convexity_suite: samples must be >= 1");
  if (anchors.cols() != net.dim) throw VerifyError("convexity_suite: anchor dimension mismatch");
  Rng rng(mix_seed(seed, 0xc07e8u));
  const int64_t L = anchors.rows(), d = net.dim;
  double worst = 0.0;
  Tensor c_row(1, d, 0.0);
  const int64_t chunk = 512;
  for (int64_t done = 0; done < samples;) {
    const int64_t m = std::min(chunk, samples - done);
    const int64_t cls = rng.index(L);
    for (int64_t k = 0; k < d; ++k) c_row(0, k) = anchors(cls, k);
    Tensor x1(m, d, 0.0), x2(m, d, 0.0), mid(m, d, 0.0);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t k = 0; k < d; ++k) {
        x1(i, k) = rng.uniform(-box, box);
        x2(i, k) = rng.uniform(-box, box);
        mid(i, k) = 0.5 * (x1(i, k) + x2(i, k));
      }
    Tensor g1 = g_plain(net, x1, c_row);
    Tensor g2 = g_plain(net, x2, c_row);
    Tensor gm = g_plain(net, mid, c_row);
    for (int64_t i = 0; i < m; ++i)
      worst = std::max(worst, gm(i, 0) - 0.5 * (g1(i, 0) + g2(i, 0)));
    done += m;
  }
  PropositionReport rep;
  rep.tag = "convexity";
  rep.statistic = worst;
  rep.tolerance = tol;
  rep.pass = worst <= tol;
  return rep;
}

}  // namespace zubov
