#include "zubov/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "zubov/rng.hpp"

namespace zubov {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Raw {
  std::vector<std::vector<double>> pts;
  std::vector<int64_t> labels;
  int64_t classes;
};

Raw gen_moons(int64_t count, double noise, Rng& rng) {
  // two unit half-circle arcs, then a similarity map centering the pair on the
  // origin at scale 0.6 so every point sits well inside the unit-anchor
  // sublevel radius sqrt(2 ln 10 / (2 delta))
  Raw r;
  r.classes = 2;
  const double scale = 0.6, cx = 0.5, cy = 0.25;
  const int64_t per = count / 2;
  for (int64_t c = 0; c < 2; ++c) {
    const int64_t n = (c == 0) ? count - per : per;
    for (int64_t i = 0; i < n; ++i) {
      const double t = kPi * static_cast<double>(i) / static_cast<double>(std::max<int64_t>(n - 1, 1));
      double x, y;
      if (c == 0) {
        x = std::cos(t);
        y = std::sin(t);
      } else {
        x = 1.0 - std::cos(t);
        y = 0.5 - std::sin(t);
      }
      x += noise * rng.normal();
      y += noise * rng.normal();
      r.pts.push_back({scale * (x - cx), scale * (y - cy)});
      r.labels.push_back(c);
    }
  }
  return r;
}

Raw gen_circles(int64_t count, double noise, Rng& rng) {
  Raw r;
  r.classes = 2;
  const int64_t per = count / 2;
  const double radii[2] = {0.5, 1.0};
  for (int64_t c = 0; c < 2; ++c) {
    const int64_t n = (c == 0) ? count - per : per;
    for (int64_t i = 0; i < n; ++i) {
      const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      r.pts.push_back({radii[c] * std::cos(t) + noise * rng.normal(),
                       radii[c] * std::sin(t) + noise * rng.normal()});
      r.labels.push_back(c);
    }
  }
  return r;
}

Raw gen_blobs(int64_t count, double noise, int64_t classes, Rng& rng) {
  Raw r;
  r.classes = classes;
  const double spread = (noise > 0.0) ? noise : 0.2;
  for (int64_t c = 0; c < classes; ++c) {
    const double ang = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(classes);
    const double cx = 1.5 * std::cos(ang), cy = 1.5 * std::sin(ang);
    const int64_t n = count / classes + ((c < count % classes) ? 1 : 0);
    for (int64_t i = 0; i < n; ++i) {
      r.pts.push_back({cx + spread * rng.normal(), cy + spread * rng.normal()});
      r.labels.push_back(c);
    }
  }
  return r;
}

Raw gen_spirals(int64_t count, double noise, Rng& rng) {
  Raw r;
  r.classes = 2;
  const int64_t per = count / 2;
  for (int64_t c = 0; c < 2; ++c) {
    const int64_t n = (c == 0) ? count - per : per;
    for (int64_t i = 0; i < n; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(std::max<int64_t>(n - 1, 1));
      const double t = 1.25 * 2.0 * kPi * u;
      const double rad = 0.2 + 1.3 * u;
      const double phase = (c == 0) ? 0.0 : kPi;
      r.pts.push_back({rad * std::cos(t + phase) + noise * rng.normal(),
                       rad * std::sin(t + phase) + noise * rng.normal()});
      r.labels.push_back(c);
    }
  }
  return r;
}

Raw gen_system_1d(int64_t count, Rng& rng) {
  // initial conditions of dh/dt = h^3 - h on [-2, 2]; label 0 inside the
  // attractor basin (-1, 1) of the origin, 1 outside
  Raw r;
  r.classes = 2;
  std::vector<double> inside, outside;
  while (static_cast<int64_t>(inside.size()) < (count + 1) / 2) inside.push_back(rng.uniform(-0.999, 0.999));
  while (static_cast<int64_t>(outside.size()) < count / 2) {
    const double h = rng.uniform(-2.0, 2.0);
    if (std::abs(h) > 1.001) outside.push_back(h);
  }
  for (double h : inside) {
    r.pts.push_back({h});
    r.labels.push_back(0);
  }
  for (double h : outside) {
    r.pts.push_back({h});
    r.labels.push_back(1);
  }
  return r;
}

}  // namespace

Tensor cubic_field(const Tensor& h) {
  Tensor out = h;
  for (int64_t k = 0; k < out.numel(); ++k) out[k] = h[k] * h[k] * h[k] - h[k];
  return out;
}

Tensor vdp_reversed_field(const Tensor& h) {
  if (h.cols() != 2) throw DatasetError("vdp_reversed_field: expects rows in R^2");
  Tensor out = h;
  for (int64_t i = 0; i < h.rows(); ++i) {
    const double x = h(i, 0), y = h(i, 1);
    out(i, 0) = -y;
    out(i, 1) = x - (1.0 - x * x) * y;
  }
  return out;
}

namespace {

Raw gen_system_vdp(int64_t count, Rng& rng);

Dataset pack(const Raw& r, const std::vector<int64_t>& take, const Tensor& lo, const Tensor& hi) {
  const int64_t d = static_cast<int64_t>(r.pts.front().size());
  Dataset out;
  out.X = Tensor(static_cast<int64_t>(take.size()), d, 0.0);
  out.classes = r.classes;
  for (size_t i = 0; i < take.size(); ++i) {
    for (int64_t k = 0; k < d; ++k) out.X(static_cast<int64_t>(i), k) = r.pts[static_cast<size_t>(take[i])][static_cast<size_t>(k)];
    out.y.push_back(r.labels[static_cast<size_t>(take[i])]);
  }
  out.lo = lo;
  out.hi = hi;
  return out;
}

}  // namespace

SplitDataset generate_dataset(const DatasetSpec& spec) {
  if (spec.count < 8) throw DatasetError("generate_dataset: count too small");
  if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
    throw DatasetError("generate_dataset: train_fraction must be in (0,1)");
  Rng rng(mix_seed(spec.seed, 0xda7a5e7ULL));

  Raw r;
  if (spec.tag == "moons") r = gen_moons(spec.count, spec.noise_std, rng);
  else if (spec.tag == "circles") r = gen_circles(spec.count, spec.noise_std, rng);
  else if (spec.tag == "blobs") r = gen_blobs(spec.count, spec.noise_std, spec.blob_classes, rng);
  else if (spec.tag == "spirals") r = gen_spirals(spec.count, spec.noise_std, rng);
  else if (spec.tag == "system-1d") r = gen_system_1d(spec.count, rng);
  else if (spec.tag == "system-vdp") r = gen_system_vdp(spec.count, rng);
  else throw DatasetError("generate_dataset: unknown tag '" + spec.tag + "'");

  const int64_t n = static_cast<int64_t>(r.pts.size());
  const int64_t d = static_cast<int64_t>(r.pts.front().size());
  Tensor lo(1, d, 0.0), hi(1, d, 0.0);
  for (int64_t k = 0; k < d; ++k) {
    double mn = r.pts[0][static_cast<size_t>(k)], mx = mn;
    for (int64_t i = 1; i < n; ++i) {
      mn = std::min(mn, r.pts[static_cast<size_t>(i)][static_cast<size_t>(k)]);
      mx = std::max(mx, r.pts[static_cast<size_t>(i)][static_cast<size_t>(k)]);
    }
    lo(0, k) = mn;
    hi(0, k) = mx;
  }

  // stratified deterministic split: shuffle indices per class, then cut
  std::vector<int64_t> train_idx, test_idx;
  for (int64_t c = 0; c < r.classes; ++c) {
    std::vector<int64_t> idx;
    for (int64_t i = 0; i < n; ++i)
      if (r.labels[static_cast<size_t>(i)] == c) idx.push_back(i);
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[static_cast<size_t>(rng.index(static_cast<int64_t>(i)))]);
    const auto cut = static_cast<size_t>(std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    for (size_t i = 0; i < idx.size(); ++i)
      (i < cut ? train_idx : test_idx).push_back(idx[i]);
  }

  SplitDataset out{pack(r, train_idx, lo, hi), pack(r, test_idx, lo, hi)};
  return out;
}

namespace {

Raw gen_system_vdp(int64_t count, Rng& rng) {
  // points in the plane labeled by whether the time-reversed Van der Pol flow
  // returns them to the origin (0 inside the periodic orbit, 1 outside)
  Raw r;
  r.classes = 2;
  // the mu=1 periodic orbit is detected cheaply by radius heuristics, but the
  // labels must be exact: integrate a coarse fixed-step RK4 until either the
  // origin ball or the escape radius is hit
  auto converges = [&](double x, double y) {
    double px = x, py = y;
    const double dt = 0.02;
    for (int s = 0; s < 20000; ++s) {
      auto f = [](double ax, double ay, double& ox, double& oy) {
        ox = -ay;
        oy = ax - (1.0 - ax * ax) * ay;
      };
      double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y;
      f(px, py, k1x, k1y);
      f(px + 0.5 * dt * k1x, py + 0.5 * dt * k1y, k2x, k2y);
      f(px + 0.5 * dt * k2x, py + 0.5 * dt * k2y, k3x, k3y);
      f(px + dt * k3x, py + dt * k3y, k4x, k4y);
      px += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      py += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
      const double rr = px * px + py * py;
      if (rr < 0.0025) return true;
      if (rr > 64.0) return false;
    }
    return false;
  };
  int64_t n_in = 0, n_out = 0;
  const int64_t half = count / 2;
  while (n_in + n_out < count) {
    const double x = rng.uniform(-3.0, 3.0), y = rng.uniform(-3.0, 3.0);
    const bool inside = converges(x, y);
    if (inside && n_in < count - half) {
      r.pts.push_back({x, y});
      r.labels.push_back(0);
      ++n_in;
    } else if (!inside && n_out < half) {
      r.pts.push_back({x, y});
      r.labels.push_back(1);
      ++n_out;
    }
  }
  return r;
}

}  // namespace

}  // namespace zubov
