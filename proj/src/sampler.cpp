#include "zubov/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "zubov/rng.hpp"

namespace zubov {

Tensor make_directions(const Tensor& anchors, int cls, int rand_per_pair, double scale_max,
                       uint64_t seed) {
  const int64_t L = anchors.rows(), d = anchors.cols();
  if (cls < 0 || cls >= L) throw SamplerError("make_directions: class index out of range");
  if (L < 2) throw SamplerError("make_directions: need at least two anchors");
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  for (int64_t j = 0; j < L; ++j) {
    if (j == cls) continue;
    std::vector<double> prim(static_cast<size_t>(d));
    double nrm = 0.0;
    for (int64_t k = 0; k < d; ++k) {
      prim[static_cast<size_t>(k)] = anchors(j, k) - anchors(cls, k);
      nrm += prim[static_cast<size_t>(k)] * prim[static_cast<size_t>(k)];
    }
    nrm = std::sqrt(nrm);
    if (nrm < 1e-10) throw SamplerError("make_directions: coincident anchors give no direction");
    for (auto& v : prim) v /= nrm;
    rows.push_back(prim);
    for (int r = 0; r < rand_per_pair; ++r) {
      std::vector<double> noise(static_cast<size_t>(d));
      double nn = 0.0;
      do {
        nn = 0.0;
        for (int64_t k = 0; k < d; ++k) {
          noise[static_cast<size_t>(k)] = rng.normal();
          nn += noise[static_cast<size_t>(k)] * noise[static_cast<size_t>(k)];
        }
        nn = std::sqrt(nn);
      } while (nn < 1e-12);
      const double u = rng.uniform(0.0, scale_max);
      std::vector<double> v(static_cast<size_t>(d));
      double vn = 0.0;
      for (int64_t k = 0; k < d; ++k) {
        v[static_cast<size_t>(k)] = prim[static_cast<size_t>(k)] + u * noise[static_cast<size_t>(k)] / nn;
        vn += v[static_cast<size_t>(k)] * v[static_cast<size_t>(k)];
      }
      vn = std::sqrt(vn);
      if (vn < 1e-10) throw SamplerError("make_directions: degenerate perturbed direction");
      for (auto& x : v) x /= vn;
      rows.push_back(std::move(v));
    }
  }
  Tensor out(static_cast<int64_t>(rows.size()), d, 0.0);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int64_t k = 0; k < d; ++k) out(static_cast<int64_t>(i), k) = rows[i][static_cast<size_t>(k)];
  return out;
}

BoundaryBatch boundary_sample(const LevelFn& w, const Tensor& center, const Tensor& dirs,
                              double rho, double eps, int n_max, double a_init,
                              bool raw_a_compat) {
  const int64_t n = dirs.rows(), d = dirs.cols();
  if (center.rows() != 1 || center.cols() != d)
    throw SamplerError("boundary_sample: center must be (1,d) matching directions");
  if (!(rho > 0.0 && rho < 1.0)) throw SamplerError("boundary_sample: rho must be in (0,1)");
  if (eps <= 0.0 || n_max < 1) throw SamplerError("boundary_sample: need eps > 0 and n_max >= 1");

  std::vector<double> s(static_cast<size_t>(n), 0.0);
  std::vector<double> a(static_cast<size_t>(n), a_init);
  std::vector<uint8_t> done(static_cast<size_t>(n), 0);
  std::vector<int64_t> active(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) active[static_cast<size_t>(i)] = i;

  int iter = 0;
  for (; iter < n_max && !active.empty(); ++iter) {
    Tensor pts(static_cast<int64_t>(active.size()), d, 0.0);
    for (size_t r = 0; r < active.size(); ++r) {
      const int64_t i = active[r];
      s[static_cast<size_t>(i)] += a[static_cast<size_t>(i)];
      for (int64_t k = 0; k < d; ++k)
        pts(static_cast<int64_t>(r), k) = center(0, k) + s[static_cast<size_t>(i)] * dirs(i, k);
    }
    Tensor vals = w(pts);
    if (vals.rows() != static_cast<int64_t>(active.size()) || vals.cols() != 1)
      throw SamplerError("boundary_sample: level function must return (m,1)");
    std::vector<int64_t> still;
    for (size_t r = 0; r < active.size(); ++r) {
      const int64_t i = active[r];
      const double v = vals(static_cast<int64_t>(r), 0);
      int m = 0;
      if (v < rho - eps) m = 1;
      else if (v > rho + eps) m = -1;
      const double ai = a[static_cast<size_t>(i)];
      const double dir_sig = raw_a_compat ? ai : (ai >= 0.0 ? 1.0 : -1.0);
      const double gamma = (std::abs(static_cast<double>(m) + dir_sig) + 2.0) / 4.0;
      a[static_cast<size_t>(i)] = std::abs(ai) * gamma * static_cast<double>(m);
      if (m == 0)
        done[static_cast<size_t>(i)] = 1;
      else
        still.push_back(i);
    }
    active = std::move(still);
  }

  BoundaryBatch out;
  out.iterations = iter;
  out.points = Tensor(n, d, 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < d; ++k) out.points(i, k) = center(0, k) + s[static_cast<size_t>(i)] * dirs(i, k);
  out.converged = std::move(done);
  out.w_values = w(out.points);
  bool any = false;
  for (uint8_t c : out.converged) any = any || c;
  if (!any) {
    double worst = 0.0;
    for (int64_t i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(out.w_values(i, 0) - rho));
    throw SamplerError("boundary_sample: no direction converged within " + std::to_string(n_max) +
                       " iterations; worst |W-rho| = " + std::to_string(worst));
  }
  return out;
}

Tensor project_into_proa(const LevelFn& w, const Tensor& center, const Tensor& h, double rho,
                         double eps) {
  const int64_t m = h.rows(), d = h.cols();
  if (center.rows() != 1 || center.cols() != d)
    throw SamplerError("project_into_proa: center must be (1,d)");
  Tensor out = h;
  Tensor wh = w(h);
  std::vector<int64_t> rows;
  for (int64_t i = 0; i < m; ++i)
    if (wh(i, 0) > rho) rows.push_back(i);
  if (rows.empty()) return out;

  const double w_center = w(center)(0, 0);
  if (w_center > rho)
    throw SamplerError("project_into_proa: center is not inside the sublevel set");

  // bisect t in [0,1] along center -> h for the rho crossing, all rows per
  // probe batch; keeping the inside endpoint guarantees W <= rho on return
  std::vector<double> lo(rows.size(), 0.0), hi(rows.size(), 1.0), v_lo(rows.size(), w_center);
  std::vector<size_t> active(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) active[r] = r;
  for (int it = 0; it < 200 && !active.empty(); ++it) {
    Tensor probe(static_cast<int64_t>(active.size()), d, 0.0);
    for (size_t p = 0; p < active.size(); ++p) {
      const size_t r = active[p];
      const int64_t i = rows[r];
      const double mid = 0.5 * (lo[r] + hi[r]);
      for (int64_t k = 0; k < d; ++k)
        probe(static_cast<int64_t>(p), k) = center(0, k) + mid * (h(i, k) - center(0, k));
    }
    Tensor vals = w(probe);
    std::vector<size_t> still;
    for (size_t p = 0; p < active.size(); ++p) {
      const size_t r = active[p];
      const double mid = 0.5 * (lo[r] + hi[r]);
      const double v_mid = vals(static_cast<int64_t>(p), 0);
      if (v_mid <= rho) {
        lo[r] = mid;
        v_lo[r] = v_mid;
      } else {
        hi[r] = mid;
      }
      if (rho - v_lo[r] > eps && hi[r] - lo[r] > 1e-12) still.push_back(r);
    }
    active = std::move(still);
  }
  for (size_t r = 0; r < rows.size(); ++r) {
    const int64_t i = rows[r];
    for (int64_t k = 0; k < d; ++k) out(i, k) = center(0, k) + lo[r] * (h(i, k) - center(0, k));
  }
  return out;
}

BoundaryBatch boundary_sample(const LyapunovHead& head, int cls, const Tensor& dirs, double eps,
                              int n_max) {
  Tensor c(1, head.dim(), 0.0);
  for (int64_t k = 0; k < head.dim(); ++k) c(0, k) = head.anchors.c(cls, k);
  return boundary_sample(make_w_eval(head, cls), c, dirs, head.rho, eps, n_max);
}

Tensor project_into_proa(const LyapunovHead& head, int cls, const Tensor& h, double eps) {
  Tensor c(1, head.dim(), 0.0);
  for (int64_t k = 0; k < head.dim(); ++k) c(0, k) = head.anchors.c(cls, k);
  return project_into_proa(make_w_eval(head, cls), c, h, head.rho, eps);
}

}  // namespace zubov
