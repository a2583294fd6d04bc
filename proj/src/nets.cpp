#include "zubov/nets.hpp"

#include <algorithm>
#include <cmath>

namespace zubov {

namespace {

inline int64_t rows_of(const Value& v) { return v.val().rows(); }
inline int64_t rows_of(const Dual& d) { return d.p.val().rows(); }

Tensor xavier(Rng& rng, int64_t in, int64_t out) {
  const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
  return rng.uniform_tensor(in, out, -lim, lim);
}

}  // namespace

MlpParams make_mlp(int64_t in, int64_t hidden, int64_t out, Rng& rng) {
  if (in < 1 || hidden < 1 || out < 1) throw ModelError("make_mlp: dimensions must be positive");
  MlpParams m;
  m.layers.push_back({xavier(rng, in, hidden), Tensor(1, hidden, 0.0), true});
  m.layers.push_back({xavier(rng, hidden, out), Tensor(1, out, 0.0), false});
  return m;
}

GatedConvexNet make_gated_convex(int64_t dim, std::vector<int64_t> zw,
                                 std::vector<int64_t> uw, Rng& rng) {
  if (dim < 1) throw ModelError("make_gated_convex: dim must be positive");
  if (zw.empty() || zw.size() != uw.size())
    throw ModelError("make_gated_convex: z and u width lists must be nonempty and equal length");
  if (zw.back() != 1) throw ModelError("make_gated_convex: final z width must be 1");
  if (uw.back() != 0) throw ModelError("make_gated_convex: final u width must be 0");
  const size_t k = zw.size();
  for (size_t i = 0; i + 1 < k; ++i)
    if (zw[i] < 1 || uw[i] < 1) throw ModelError("make_gated_convex: interior widths must be positive");

  GatedConvexNet net;
  net.dim = dim;
  net.zw = zw;
  net.uw = uw;
  std::vector<int64_t> n(k);  // class-path width feeding layer i
  n[0] = dim;
  for (size_t i = 1; i < k; ++i) n[i] = uw[i - 1];
  std::vector<int64_t> mwidth(k + 1);  // z width entering layer i
  mwidth[0] = dim;
  for (size_t i = 0; i < k; ++i) mwidth[i + 1] = zw[i];

  // The rectifier around g - g(0) is exactly flat below zero, so any ray on
  // which g descends from the anchor never receives gradient. Start g as a
  // sum of even convex bumps centered on the anchor: layer 0 injects x only
  // through mirrored +/- column pairs (with tied class-path offsets), and
  // layer 1 treats each pair identically. Every direction then ascends at
  // init; training is free to break the symmetry afterward.
  const int64_t half0 = mwidth[1] / 2;
  for (size_t i = 0; i < k; ++i) {
    ConvexLayer L;
    const double lim = std::sqrt(6.0 / static_cast<double>(mwidth[i] + mwidth[i + 1]));
    if (i == 0) {
      L.az = Tensor(mwidth[0], mwidth[1], 0.0);
      L.ax = Tensor(dim, mwidth[1], 0.0);
      L.au = Tensor(n[0], mwidth[1], 0.0);
      if (half0 >= 1) {
        const Tensor ax_half = xavier(rng, dim, half0);
        const Tensor au_half = xavier(rng, n[0], half0);
        for (int64_t j = 0; j < half0; ++j) {
          for (int64_t r = 0; r < dim; ++r) {
            L.ax(r, j) = ax_half(r, j);
            L.ax(r, j + half0) = -ax_half(r, j);
          }
          for (int64_t r = 0; r < n[0]; ++r) {
            L.au(r, j) = au_half(r, j);
            L.au(r, j + half0) = au_half(r, j);
          }
        }
      }
      if (mwidth[1] % 2 == 1) {
        const Tensor ax_odd = xavier(rng, dim, 1);
        for (int64_t r = 0; r < dim; ++r) L.ax(r, mwidth[1] - 1) = ax_odd(r, 0);
      }
      L.azu = xavier(rng, n[i], mwidth[i]);
    } else if (i == 1 && half0 >= 1) {
      L.az = Tensor(mwidth[1], mwidth[2], 0.0);
      const Tensor az_half = rng.uniform_tensor(half0, mwidth[2], 0.0, lim);
      for (int64_t j = 0; j < half0; ++j)
        for (int64_t c = 0; c < mwidth[2]; ++c) {
          L.az(j, c) = az_half(j, c);
          L.az(j + half0, c) = az_half(j, c);
        }
      if (mwidth[1] % 2 == 1) {
        const Tensor az_odd = rng.uniform_tensor(1, mwidth[2], 0.0, lim);
        for (int64_t c = 0; c < mwidth[2]; ++c) L.az(mwidth[1] - 1, c) = az_odd(0, c);
      }
      L.azu = Tensor(n[i], mwidth[i], 0.0);
      const Tensor azu_half = xavier(rng, n[i], half0);
      for (int64_t j = 0; j < half0; ++j)
        for (int64_t r = 0; r < n[i]; ++r) {
          L.azu(r, j) = azu_half(r, j);
          L.azu(r, j + half0) = azu_half(r, j);
        }
      L.ax = Tensor(dim, mwidth[i + 1], 0.0);
      L.au = xavier(rng, n[i], mwidth[i + 1]);
    } else {
      L.az = rng.uniform_tensor(mwidth[i], mwidth[i + 1], 0.0, lim);
      L.azu = xavier(rng, n[i], mwidth[i]);
      L.ax = Tensor(dim, mwidth[i + 1], 0.0);
      L.au = xavier(rng, n[i], mwidth[i + 1]);
    }
    L.bz = Tensor(1, mwidth[i], 0.0);
    L.axu = xavier(rng, n[i], dim);
    L.bx = Tensor(1, dim, 0.0);
    L.b = Tensor(1, mwidth[i + 1], 0.0);
    net.layers.push_back(std::move(L));
  }
  for (size_t i = 0; i + 1 < k; ++i) {
    UPathLayer U;
    U.w = xavier(rng, n[i], n[i + 1]);
    U.b = Tensor(1, n[i + 1], 0.0);
    net.upath.push_back(std::move(U));
  }
  return net;
}

void project_nonneg(GatedConvexNet& net) {
  for (auto& L : net.layers)
    for (int64_t k = 0; k < L.az.numel(); ++k)
      if (L.az[k] < 0.0) L.az[k] = 0.0;
}

bool nonneg_ok(const GatedConvexNet& net) {
  for (const auto& L : net.layers)
    for (int64_t k = 0; k < L.az.numel(); ++k)
      if (L.az[k] < 0.0) return false;
  return true;
}

namespace {

double max_abs_cos_of(const Tensor& C) {
  double worst = 0.0;
  for (int64_t i = 0; i < C.rows(); ++i)
    for (int64_t j = i + 1; j < C.rows(); ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < C.cols(); ++k) s += C(i, k) * C(j, k);
      worst = std::max(worst, std::abs(s));
    }
  return worst;
}

void renormalize_rows(Tensor& C) {
  for (int64_t i = 0; i < C.rows(); ++i) {
    double nrm = 0.0;
    for (int64_t k = 0; k < C.cols(); ++k) nrm += C(i, k) * C(i, k);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-12) throw ModelError("build_anchors: degenerate anchor row");
    for (int64_t k = 0; k < C.cols(); ++k) C(i, k) /= nrm;
  }
}

}  // namespace

AnchorSet build_anchors(int64_t L, int64_t d, uint64_t seed, int steps, double temp, double lr) {
  if (L < 2 || d < 2) throw ModelError("build_anchors: needs L >= 2 and d >= 2");
  Rng rng(seed);
  Tensor C = rng.normal_tensor(L, d, 1.0);
  if (L <= d) {
    // Gram-Schmidt start: already optimal, the descent below preserves it
    for (int64_t i = 0; i < L; ++i) {
      for (int64_t j = 0; j < i; ++j) {
        double s = 0.0;
        for (int64_t k = 0; k < d; ++k) s += C(i, k) * C(j, k);
        for (int64_t k = 0; k < d; ++k) C(i, k) -= s * C(j, k);
      }
      double nrm = 0.0;
      for (int64_t k = 0; k < d; ++k) nrm += C(i, k) * C(i, k);
      nrm = std::sqrt(nrm);
      if (nrm < 1e-8) {
        for (int64_t k = 0; k < d; ++k) C(i, k) = rng.normal();
        --i;
        continue;
      }
      for (int64_t k = 0; k < d; ++k) C(i, k) /= nrm;
    }
  } else {
    renormalize_rows(C);
  }

  Tensor best = C;
  double best_cos = max_abs_cos_of(C);
  const double decay = (steps > 1) ? std::pow(0.005, 1.0 / (steps - 1)) : 1.0;
  double lr_t = lr;
  for (int step = 0; step < steps; ++step) {
    // softmax weights over pairs of temp * cos^2, max-subtracted
    std::vector<double> s(static_cast<size_t>(L * L), 0.0);
    double mx = -1e300;
    for (int64_t i = 0; i < L; ++i)
      for (int64_t j = i + 1; j < L; ++j) {
        double cij = 0.0;
        for (int64_t k = 0; k < d; ++k) cij += C(i, k) * C(j, k);
        s[static_cast<size_t>(i * L + j)] = cij;
        mx = std::max(mx, temp * cij * cij);
      }
    double zsum = 0.0;
    for (int64_t i = 0; i < L; ++i)
      for (int64_t j = i + 1; j < L; ++j) {
        const double cij = s[static_cast<size_t>(i * L + j)];
        zsum += std::exp(temp * cij * cij - mx);
      }
    Tensor grad(L, d, 0.0);
    for (int64_t i = 0; i < L; ++i)
      for (int64_t j = i + 1; j < L; ++j) {
        const double cij = s[static_cast<size_t>(i * L + j)];
        const double w = std::exp(temp * cij * cij - mx) / zsum;
        for (int64_t k = 0; k < d; ++k) {
          grad(i, k) += w * 2.0 * cij * C(j, k);
          grad(j, k) += w * 2.0 * cij * C(i, k);
        }
      }
    for (int64_t k = 0; k < C.numel(); ++k) C[k] -= lr_t * grad[k];
    lr_t *= decay;
    renormalize_rows(C);
    const double cur = max_abs_cos_of(C);
    if (cur < best_cos) {
      best_cos = cur;
      best = C;
    }
  }
  return AnchorSet{std::move(best), best_cos};
}

std::vector<ParamRef> collect_params(MlpParams& m, const std::string& prefix) {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < m.layers.size(); ++i) {
    out.push_back({prefix + ".w" + std::to_string(i), &m.layers[i].w, false});
    out.push_back({prefix + ".b" + std::to_string(i), &m.layers[i].b, false});
  }
  return out;
}

std::vector<ParamRef> collect_params(GatedConvexNet& n, const std::string& prefix) {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < n.layers.size(); ++i) {
    auto& L = n.layers[i];
    const std::string p = prefix + ".layer" + std::to_string(i);
    out.push_back({p + ".az", &L.az, true});
    out.push_back({p + ".azu", &L.azu, false});
    out.push_back({p + ".bz", &L.bz, false});
    out.push_back({p + ".ax", &L.ax, false});
    out.push_back({p + ".axu", &L.axu, false});
    out.push_back({p + ".bx", &L.bx, false});
    out.push_back({p + ".au", &L.au, false});
    out.push_back({p + ".b", &L.b, false});
  }
  for (size_t i = 0; i < n.upath.size(); ++i) {
    const std::string p = prefix + ".upath" + std::to_string(i);
    out.push_back({p + ".w", &n.upath[i].w, false});
    out.push_back({p + ".b", &n.upath[i].b, false});
  }
  return out;
}

std::vector<ParamRef> collect_params(ModelBundle& b) {
  std::vector<ParamRef> out = collect_params(b.dynamics, "dynamics");
  if (b.lift) {
    auto lp = collect_params(*b.lift, "lift");
    out.insert(out.end(), lp.begin(), lp.end());
  }
  auto hp = collect_params(b.head.net, "head");
  out.insert(out.end(), hp.begin(), hp.end());
  return out;
}

BoundMlp bind_mlp(Tape& tape, const MlpParams& m, bool trainable) {
  BoundMlp out;
  for (const auto& L : m.layers) {
    Value w = trainable ? tape.leaf(L.w) : tape.constant(L.w);
    Value b = trainable ? tape.leaf(L.b) : tape.constant(L.b);
    out.layers.push_back({w, b, L.tanh_act});
  }
  return out;
}

BoundConvex bind_convex(Tape& tape, const GatedConvexNet& n, bool trainable) {
  if (!nonneg_ok(n))
    throw ModelError("convex net has negative az entries; run project_nonneg before use");
  BoundConvex out;
  out.dim = n.dim;
  auto put = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  for (const auto& L : n.layers)
    out.layers.push_back({put(L.az), put(L.azu), put(L.bz), put(L.ax), put(L.axu), put(L.bx),
                          put(L.au), put(L.b)});
  for (const auto& U : n.upath) out.upath.push_back({put(U.w), put(U.b)});
  return out;
}

std::vector<Value> bound_param_values(const BoundMlp& m) {
  std::vector<Value> out;
  for (const auto& L : m.layers) {
    out.push_back(L.w);
    out.push_back(L.b);
  }
  return out;
}

std::vector<Value> bound_param_values(const BoundConvex& n) {
  std::vector<Value> out;
  for (const auto& L : n.layers)
    for (Value v : {L.az, L.azu, L.bz, L.ax, L.axu, L.bx, L.au, L.b}) out.push_back(v);
  for (const auto& U : n.upath) {
    out.push_back(U.w);
    out.push_back(U.b);
  }
  return out;
}

template <class XT>
XT mlp_forward(const BoundMlp& m, XT x) {
  XT h = x;
  for (const auto& L : m.layers) {
    const int64_t rows = rows_of(h);
    auto lin = add(matmul(h, L.w), repeat_rows(L.b, rows));
    h = L.tanh_act ? tanh(lin) : lin;
  }
  return h;
}

template <class XT>
XT convex_forward(const BoundConvex& net, XT x, Value c) {
  const int64_t m = rows_of(x);
  Value u = c;
  XT z = x;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const auto& L = net.layers[i];
    Value gz = softmax_rows(add(matmul(u, L.azu), L.bz));
    Value gx = softmax_rows(add(matmul(u, L.axu), L.bx));
    auto term_z = matmul(hadamard(z, repeat_rows(gz, m)), L.az);
    auto term_x = matmul(hadamard(x, repeat_rows(gx, m)), L.ax);
    Value term_u = repeat_rows(add(matmul(u, L.au), L.b), m);
    z = softplus(add(add(term_z, term_x), term_u));
    if (i < net.upath.size()) u = tanh(add(matmul(u, net.upath[i].w), net.upath[i].b));
  }
  return z;
}

BoundHead bind_head(Tape& tape, const LyapunovHead& h, bool trainable) {
  BoundHead out{bind_convex(tape, h.net, trainable), {}, {}, h.delta, h.knee,
                h.beta,   h.rho, h.alpha, h.eps_w, h.classes(), h.dim()};
  for (int64_t i = 0; i < h.classes(); ++i) {
    Tensor row(1, h.dim(), 0.0);
    for (int64_t k = 0; k < h.dim(); ++k) row(0, k) = h.anchors.c(i, k);
    out.anchor_rows.push_back(tape.constant(std::move(row)));
  }
  Value zero = tape.constant(Tensor(1, h.dim(), 0.0));
  for (int64_t i = 0; i < h.classes(); ++i)
    out.g_at_zero.push_back(convex_forward<Value>(out.net, zero, out.anchor_rows[i]));
  return out;
}

template <class XT>
XT v_value(const BoundHead& h, XT x, int cls) {
  if (cls < 0 || cls >= h.classes) throw ModelError("v_value: class index out of range");
  const int64_t m = rows_of(x);
  Value crow = h.anchor_rows[static_cast<size_t>(cls)];
  auto diff = sub(x, repeat_rows(crow, m));
  auto g = convex_forward(h.net, diff, crow);
  auto shifted = sub(g, repeat_rows(h.g_at_zero[static_cast<size_t>(cls)], m));
  auto core = smoothed_relu(shifted, h.knee);
  auto quad = affine(rowsum(square(diff)), h.delta, 0.0);
  return add(core, quad);
}

template <class XT>
WExp<XT> w_value(const BoundHead& h, XT x, int cls) {
  auto v = v_value(h, x, cls);
  auto e = exp(affine(v, -1.0, 0.0));
  auto w = affine(e, -1.0, 1.0);
  return {e, w};
}

template <class XT>
XT wbeta_value(const BoundHead& h, XT x, int cls) {
  auto v = v_value(h, x, cls);
  return affine(exp(affine(v, -h.beta, 0.0)), -1.0, 1.0);
}

Tensor v_eval(const LyapunovHead& h, const Tensor& pts, int cls) {
  Tape tape;
  BoundHead bh = bind_head(tape, h, false);
  return v_value<Value>(bh, tape.constant(pts), cls).val();
}

Tensor w_eval(const LyapunovHead& h, const Tensor& pts, int cls) {
  Tape tape;
  BoundHead bh = bind_head(tape, h, false);
  return w_value<Value>(bh, tape.constant(pts), cls).w.val();
}

std::function<Tensor(const Tensor&)> make_w_eval(const LyapunovHead& h, int cls) {
  return [&h, cls](const Tensor& pts) { return w_eval(h, pts, cls); };
}

std::function<Tensor(const Tensor&)> make_field_eval(const MlpParams& dyn) {
  return [&dyn](const Tensor& pts) {
    Tape tape;
    BoundMlp bm = bind_mlp(tape, dyn, false);
    return mlp_forward<Value>(bm, tape.constant(pts)).val();
  };
}

template Value mlp_forward<Value>(const BoundMlp&, Value);
template Dual mlp_forward<Dual>(const BoundMlp&, Dual);
template Value convex_forward<Value>(const BoundConvex&, Value, Value);
template Dual convex_forward<Dual>(const BoundConvex&, Dual, Value);
template Value v_value<Value>(const BoundHead&, Value, int);
template Dual v_value<Dual>(const BoundHead&, Dual, int);
template WExp<Value> w_value<Value>(const BoundHead&, Value, int);
template WExp<Dual> w_value<Dual>(const BoundHead&, Dual, int);
template Value wbeta_value<Value>(const BoundHead&, Value, int);
template Dual wbeta_value<Dual>(const BoundHead&, Dual, int);

}  // namespace zubov
