#include "zubov/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace zubov {

TapeTrajectory rk4_integrate(const TapeField& f, Value h0, const FixedSolverConfig& cfg,
                             int n_samples) {
  if (cfg.steps < 1 || cfg.horizon <= 0.0)
    throw SolverError("rk4_integrate: need positive horizon and step count");
  if (n_samples < 1 || cfg.steps % n_samples != 0)
    throw SolverError("rk4_integrate: steps must be divisible by sample count");
  const double dt = cfg.horizon / cfg.steps;
  const int per_sample = cfg.steps / n_samples;

  TapeTrajectory out;
  out.times.push_back(0.0);
  out.states.push_back(h0);
  Value h = h0;
  for (int s = 0; s < cfg.steps; ++s) {
    Value k1 = f(h);
    Value k2 = f(add(h, scale(k1, dt / 2.0)));
    Value k3 = f(add(h, scale(k2, dt / 2.0)));
    Value k4 = f(add(h, scale(k3, dt)));
    Value incr = add(add(k1, scale(add(k2, k3), 2.0)), k4);
    h = add(h, scale(incr, dt / 6.0));
    if (fro_norm(h.val()) > cfg.divergence_norm)
      throw DivergenceError("rk4_integrate: state norm exceeded " +
                            std::to_string(cfg.divergence_norm) + " at step " +
                            std::to_string(s + 1));
    if ((s + 1) % per_sample == 0) {
      out.times.push_back(dt * (s + 1));
      out.states.push_back(h);
    }
  }
  return out;
}

namespace {

// Dormand-Prince 5(4) tableau
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 35.0 / 384 - 5179.0 / 57600, E3 = 500.0 / 1113 - 7571.0 / 16695,
                 E4 = 125.0 / 192 - 393.0 / 640, E5 = -2187.0 / 6784 + 92097.0 / 339200,
                 E6 = 11.0 / 84 - 187.0 / 2100, E7 = -1.0 / 40;

Tensor lerp(const Tensor& a, const Tensor& b, double u) {
  Tensor out = a;
  for (int64_t k = 0; k < out.numel(); ++k) out[k] = a[k] + u * (b[k] - a[k]);
  return out;
}

struct StepCallback {
  // called with (t_prev, y_prev, t_new, y_new); returns true to stop early
  std::function<bool(double, const Tensor&, double, const Tensor&)> on_step;
};

PlainTrajectory dopri5_core(const Field& f, Tensor y, double t_end,
                            const AdaptiveSolverConfig& cfg,
                            const std::vector<double>& sample_times,
                            const StepCallback* cb) {
  for (size_t i = 0; i + 1 < sample_times.size(); ++i)
    if (sample_times[i + 1] <= sample_times[i])
      throw SolverError("dopri5: sample times must be strictly increasing");
  if (!sample_times.empty() && (sample_times.front() < 0.0 || sample_times.back() > t_end))
    throw SolverError("dopri5: sample times outside [0, t_end]");

  PlainTrajectory out;
  size_t next_sample = 0;
  auto record_up_to = [&](double t0, const Tensor& y0, double t1, const Tensor& y1) {
    while (next_sample < sample_times.size() && sample_times[next_sample] <= t1 + 1e-14) {
      const double ts = sample_times[next_sample];
      const double u = (t1 > t0) ? (ts - t0) / (t1 - t0) : 0.0;
      out.times.push_back(ts);
      out.states.push_back(lerp(y0, y1, std::clamp(u, 0.0, 1.0)));
      ++next_sample;
    }
  };

  double t = 0.0;
  if (!sample_times.empty() && sample_times.front() <= 1e-14) record_up_to(0.0, y, 0.0, y);

  Tensor k1 = f(y);
  // conventional cheap initial step guess, then let the controller take over
  double h = 0.01 * (cfg.abs_tol + cfg.rel_tol * fro_norm(y)) /
             std::max(1e-10, fro_norm(k1));
  h = std::clamp(h, 1e-6, t_end);
  double err_prev = 1.0;
  int steps = 0;

  while (t < t_end) {
    if (++steps > cfg.max_steps) throw StiffnessError("dopri5: step budget exhausted");
    if (h < cfg.h_min) throw StiffnessError("dopri5: step size underflow at t=" + std::to_string(t));
    if (t + h > t_end) h = t_end - t;
    // land on the next requested time exactly; the recorded state then carries
    // full step accuracy instead of interpolation error
    if (next_sample < sample_times.size()) {
      const double ts = sample_times[next_sample];
      if (ts > t + 1e-14 && t + h > ts) h = ts - t;
    }

    auto stage = [&](double c1, double c2, double c3, double c4, double c5, const Tensor* k2,
                     const Tensor* k3, const Tensor* k4, const Tensor* k5) {
      Tensor arg = y;
      t_axpy(arg, h * c1, k1);
      if (k2) t_axpy(arg, h * c2, *k2);
      if (k3) t_axpy(arg, h * c3, *k3);
      if (k4) t_axpy(arg, h * c4, *k4);
      if (k5) t_axpy(arg, h * c5, *k5);
      return f(arg);
    };
    Tensor k2 = stage(A21, 0, 0, 0, 0, nullptr, nullptr, nullptr, nullptr);
    Tensor k3 = stage(A31, A32, 0, 0, 0, &k2, nullptr, nullptr, nullptr);
    Tensor k4 = stage(A41, A42, A43, 0, 0, &k2, &k3, nullptr, nullptr);
    Tensor k5 = stage(A51, A52, A53, A54, 0, &k2, &k3, &k4, nullptr);
    Tensor k6 = stage(A61, A62, A63, A64, A65, &k2, &k3, &k4, &k5);

    Tensor y_new = y;
    t_axpy(y_new, h * B1, k1);
    t_axpy(y_new, h * B3, k3);
    t_axpy(y_new, h * B4, k4);
    t_axpy(y_new, h * B5, k5);
    t_axpy(y_new, h * B6, k6);
    Tensor k7 = f(y_new);

    double err_sq = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
      const double e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] +
                            E7 * k7[i]);
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      err_sq += (e / sc) * (e / sc);
    }
    const double err = std::sqrt(err_sq / static_cast<double>(y.numel()));

    if (!std::isfinite(err)) {
      if (fro_norm(y) > cfg.divergence_norm)
        throw DivergenceError("dopri5: state norm exceeded bound at t=" + std::to_string(t));
      h *= 0.2;  // overshot into non-finite territory; retry smaller
      continue;
    }
    if (err <= 1.0) {
      const double t_new = t + h;
      record_up_to(t, y, t_new, y_new);
      if (fro_norm(y_new) > cfg.divergence_norm)
        throw DivergenceError("dopri5: state norm exceeded bound at t=" + std::to_string(t_new));
      if (cb && cb->on_step && cb->on_step(t, y, t_new, y_new)) {
        out.steps_taken = steps;
        return out;
      }
      // PI controller (Hairer): fac = safety * err^-alpha * err_prev^beta
      const double alpha = 0.7 / 5.0, beta = 0.4 / 5.0;
      double fac = cfg.safety * std::pow(std::max(err, 1e-10), -alpha) *
                   std::pow(std::max(err_prev, 1e-10), beta);
      fac = std::clamp(fac, cfg.fac_min, cfg.fac_max);
      err_prev = std::max(err, 1e-10);
      t = t_new;
      y = std::move(y_new);
      k1 = std::move(k7);  // FSAL
      h *= fac;
    } else {
      double fac = cfg.safety * std::pow(err, -0.2);
      h *= std::clamp(fac, cfg.fac_min, 1.0);
    }
  }
  out.steps_taken = steps;
  return out;
}

}  // namespace

PlainTrajectory dopri5_integrate(const Field& f, Tensor h0, double t_end,
                                 const AdaptiveSolverConfig& cfg,
                                 const std::vector<double>& sample_times) {
  if (t_end <= 0.0) throw SolverError("dopri5: t_end must be positive");
  return dopri5_core(f, std::move(h0), t_end, cfg, sample_times, nullptr);
}

int flow_to_convergence(const Field& f, const Tensor& h0, const Tensor& anchors,
                        double eps_conv, double t_max, const AdaptiveSolverConfig& cfg) {
  if (h0.rows() != 1 || h0.cols() != anchors.cols())
    throw SolverError("flow_to_convergence: state must be a single row matching anchor dim");
  auto near_anchor = [&](const Tensor& y) {
    int best = -1;
    double best_d = eps_conv;
    for (int64_t i = 0; i < anchors.rows(); ++i) {
      double d2 = 0.0;
      for (int64_t k = 0; k < anchors.cols(); ++k) {
        const double dk = y(0, k) - anchors(i, k);
        d2 += dk * dk;
      }
      const double d = std::sqrt(d2);
      if (d <= best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  };

  int hit = near_anchor(h0);
  if (hit >= 0) return hit;

  int result = -1;
  StepCallback cb;
  cb.on_step = [&](double, const Tensor&, double, const Tensor& y_new) {
    const int i = near_anchor(y_new);
    if (i >= 0) {
      result = i;
      return true;
    }
    return false;
  };
  try {
    dopri5_core(f, h0, t_max, cfg, {}, &cb);
  } catch (const DivergenceError&) {
    return -1;  // escaped every bounded neighborhood; no anchor is reachable
  } catch (const StiffnessError&) {
    // step collapse: finite-time escape shrinks the step below the floor
    // before the norm bound trips; either way no anchor was reached
    return -1;
  }
  return result;
}

}  // namespace zubov
