#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "zubov/rng.hpp"
#include "zubov/tape.hpp"
#include "zubov/tensor.hpp"

namespace zubov {

struct ModelError : TensorError {
  explicit ModelError(const std::string& what) : TensorError(what) {}
};

// --- plain MLP (dynamics field and optional input lift) ---------------------

struct MlpLayer {
  Tensor w;  // (in, out)
  Tensor b;  // (1, out)
  bool tanh_act = false;
};

struct MlpParams {
  std::vector<MlpLayer> layers;
  int64_t in_dim() const { return layers.front().w.rows(); }
  int64_t out_dim() const { return layers.back().w.cols(); }
};

MlpParams make_mlp(int64_t in, int64_t hidden, int64_t out, Rng& rng);

// --- softmax-gated input-convex network --------------------------------------
// z_{i+1} = softplus( (gate_z . z_i) Az + (gate_x . x) Ax + u_i Au + b ),
// gates are softmax over attention projections of the class path u_i,
// u_{i+1} = tanh(u_i Wu + bu). All Az are kept entrywise nonnegative, which
// together with convex nondecreasing softplus makes the scalar output convex
// in x for any fixed class path input.

struct ConvexLayer {
  Tensor az;   // (m_i, m_{i+1}), entrywise >= 0
  Tensor azu;  // (n_i, m_i)
  Tensor bz;   // (1, m_i)
  Tensor ax;   // (d, m_{i+1})
  Tensor axu;  // (n_i, d)
  Tensor bx;   // (1, d)
  Tensor au;   // (n_i, m_{i+1})
  Tensor b;    // (1, m_{i+1})
};

struct UPathLayer {
  Tensor w;  // (n_i, n_{i+1})
  Tensor b;  // (1, n_{i+1})
};

struct GatedConvexNet {
  int64_t dim = 0;              // d: dimension of x and of the class input
  std::vector<int64_t> zw;      // z widths, last entry must be 1
  std::vector<int64_t> uw;      // u widths, same length, last entry must be 0
  std::vector<ConvexLayer> layers;
  std::vector<UPathLayer> upath;  // zw.size()-1 layers
};

GatedConvexNet make_gated_convex(int64_t dim, std::vector<int64_t> zw,
                                 std::vector<int64_t> uw, Rng& rng);
void project_nonneg(GatedConvexNet& net);   // clamp every az entry at 0
bool nonneg_ok(const GatedConvexNet& net);

// --- anchors -----------------------------------------------------------------

struct AnchorSet {
  Tensor c;                 // (L, d), one anchor per row
  double max_abs_cos = 0.0; // value achieved by the construction
};

// Unit-norm rows minimizing the largest pairwise |cos|: gradient descent on a
// log-sum-exp softening (temperature temp) with per-step renormalization.
AnchorSet build_anchors(int64_t L, int64_t d, uint64_t seed, int steps = 500,
                        double temp = 50.0, double lr = 0.5);

// --- Lyapunov head -----------------------------------------------------------

struct LyapunovHead {
  GatedConvexNet net;
  AnchorSet anchors;       // frozen after construction
  double delta = 0.5;      // strong-convexity weight on ||x-c||^2
  double knee = 0.1;       // smoothed rectifier knee
  double beta = 0.85;      // separation sharpening exponent
  double rho = 0.9;        // certified sublevel
  double alpha = 0.0;      // probability shift
  double eps_w = 1e-6;     // W clamp band for the inverse head
  int64_t classes() const { return anchors.c.rows(); }
  int64_t dim() const { return anchors.c.cols(); }
};

struct ModelBundle {
  MlpParams dynamics;              // flow field on the latent space
  std::optional<MlpParams> lift;   // input lift when data dim != latent dim
  LyapunovHead head;
  Tensor domain_lo, domain_hi;     // (1, d_in) data domain box
  int64_t d_in = 0;
  int64_t d_h() const { return head.dim(); }
  int64_t classes() const { return head.classes(); }
};

struct ParamRef {
  std::string name;
  Tensor* t;
  bool nonneg = false;
};

// Stable-ordered trainable parameters; anchors are frozen and excluded.
std::vector<ParamRef> collect_params(ModelBundle& b);
std::vector<ParamRef> collect_params(MlpParams& m, const std::string& prefix);
std::vector<ParamRef> collect_params(GatedConvexNet& n, const std::string& prefix);

// --- tape bindings ------------------------------------------------------------

struct BoundMlp {
  struct Layer {
    Value w, b;
    bool tanh_act;
  };
  std::vector<Layer> layers;
};
BoundMlp bind_mlp(Tape& tape, const MlpParams& m, bool trainable);

struct BoundConvex {
  struct Layer {
    Value az, azu, bz, ax, axu, bx, au, b;
  };
  std::vector<Layer> layers;
  struct U {
    Value w, b;
  };
  std::vector<U> upath;
  int64_t dim;
};
BoundConvex bind_convex(Tape& tape, const GatedConvexNet& n, bool trainable);

struct BoundHead {
  BoundConvex net;
  std::vector<Value> anchor_rows;  // constants, (1, d) each
  std::vector<Value> g_at_zero;    // g(0, c_i), on tape so head gradients flow
  double delta, knee, beta, rho, alpha, eps_w;
  int64_t classes, dim;
};
BoundHead bind_head(Tape& tape, const LyapunovHead& h, bool trainable);

// leaf Values of a binding, in the same order as collect_params
std::vector<Value> bound_param_values(const BoundMlp& m);
std::vector<Value> bound_param_values(const BoundConvex& n);

template <class XT>
XT mlp_forward(const BoundMlp& m, XT x);

// g(x, c): batch rows of x against one class path input c (1, d) -> (m, 1)
template <class XT>
XT convex_forward(const BoundConvex& n, XT x, Value c);

// V(x, c_i) = smoothed_relu(g(x - c_i, c_i) - g(0, c_i)) + delta ||x - c_i||^2
template <class XT>
XT v_value(const BoundHead& h, XT x, int cls);

// W = 1 - exp(-V); returned via E = exp(-V) so callers can reuse 1 - W exactly
template <class XT>
struct WExp {
  XT e;  // exp(-V) = 1 - W
  XT w;  // 1 - exp(-V)
};
template <class XT>
WExp<XT> w_value(const BoundHead& h, XT x, int cls);
template <class XT>
XT wbeta_value(const BoundHead& h, XT x, int cls);  // 1 - exp(-beta V)

// plain evaluators (fresh constant tape inside; function evaluation only)
Tensor v_eval(const LyapunovHead& h, const Tensor& pts, int cls);
Tensor w_eval(const LyapunovHead& h, const Tensor& pts, int cls);
std::function<Tensor(const Tensor&)> make_w_eval(const LyapunovHead& h, int cls);
std::function<Tensor(const Tensor&)> make_field_eval(const MlpParams& dyn);

}  // namespace zubov
