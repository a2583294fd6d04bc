#include "zubov/tape.hpp"

#include <algorithm>
#include <cmath>

namespace zubov {

const Tensor& Value::val() const { return tape->val(*this); }

namespace {

Tape* same_tape(Value a, Value b, const char* op) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape)
    throw GradientError(std::string(op) + ": operands on different tapes");
  return a.tape;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// a * b^T without materializing the transpose
Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw TensorError("matmul_nt: inner dims disagree");
  Tensor out(a.rows(), b.rows(), 0.0);
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  return out;
}

// a^T * b
Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw TensorError("matmul_tn: inner dims disagree");
  Tensor out(a.cols(), b.cols(), 0.0);
  for (int64_t k = 0; k < a.rows(); ++k)
    for (int64_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (int64_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  return out;
}

Tensor colbroadcast_raw(const Tensor& a, int64_t n) {
  Tensor out(a.rows(), n, 0.0);
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < n; ++j) out(i, j) = a(i, 0);
  return out;
}

Tensor rowsum_raw(const Tensor& a) {
  Tensor out(a.rows(), 1, 0.0);
  for (int64_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < a.cols(); ++j) s += a(i, j);
    out(i, 0) = s;
  }
  return out;
}

}  // namespace

double smoothed_relu_scalar(double t, double knee) {
  if (t <= 0.0) return 0.0;
  if (t < knee) return t * t / (2.0 * knee);
  return t - knee / 2.0;
}

Value Tape::emplace(Node n) {
  if (swept_) throw GradientError("tape already swept; build a fresh tape");
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int32_t>(nodes_.size() - 1)};
}

Value Tape::leaf(Tensor t) {
  t.check_finite("leaf tensor");
  Node n;
  n.value = std::move(t);
  n.op = Op::Leaf;
  return emplace(std::move(n));
}

Value Tape::constant(Tensor t) {
  t.check_finite("constant tensor");
  Node n;
  n.value = std::move(t);
  n.op = Op::Const;
  return emplace(std::move(n));
}

const Tensor& Tape::val(Value v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int32_t>(nodes_.size()))
    throw GradientError("value does not belong to this tape");
  return nodes_[static_cast<size_t>(v.id)].value;
}

Tensor Tape::grad(Value v) const {
  if (v.tape != this) throw GradientError("gradient queried on the wrong tape");
  if (!swept_) throw GradientError("backward has not run");
  const Tensor& g = grads_[static_cast<size_t>(v.id)];
  if (g.empty()) return Tensor::zeros_like(nodes_[static_cast<size_t>(v.id)].value);
  return g;
}

void Tape::backward(Value root) {
  if (root.tape != this) throw GradientError("backward root on the wrong tape");
  const Tensor& rv = val(root);
  if (rv.numel() != 1) throw GradientError("backward root must be 1x1, got " + rv.shape_str());
  grads_.assign(nodes_.size(), Tensor());
  grads_[static_cast<size_t>(root.id)] = Tensor::scalar(1.0);
  swept_ = true;

  auto acc = [&](int32_t pid, Tensor&& g) {
    const Node& p = nodes_[static_cast<size_t>(pid)];
    if (p.op == Op::Const) return;
    Tensor& slot = grads_[static_cast<size_t>(pid)];
    if (slot.empty())
      slot = std::move(g);
    else
      for (int64_t k = 0; k < slot.numel(); ++k) slot[k] += g[k];
  };

  for (int32_t i = root.id; i >= 0; --i) {
    const Tensor& g = grads_[static_cast<size_t>(i)];
    if (g.empty()) continue;
    const Node& n = nodes_[static_cast<size_t>(i)];
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        break;
      case Op::Add: {
        acc(n.p0, Tensor(g));
        acc(n.p1, Tensor(g));
        break;
      }
      case Op::Sub: {
        acc(n.p0, Tensor(g));
        acc(n.p1, t_scale(g, -1.0));
        break;
      }
      case Op::Hadamard: {
        acc(n.p0, t_mul(g, nodes_[static_cast<size_t>(n.p1)].value));
        acc(n.p1, t_mul(g, nodes_[static_cast<size_t>(n.p0)].value));
        break;
      }
      case Op::Affine: {
        acc(n.p0, t_scale(g, n.a0));
        break;
      }
      case Op::MatMul: {
        acc(n.p0, matmul_nt(g, nodes_[static_cast<size_t>(n.p1)].value));
        acc(n.p1, matmul_tn(nodes_[static_cast<size_t>(n.p0)].value, g));
        break;
      }
      case Op::Exp: {
        acc(n.p0, t_mul(g, n.value));
        break;
      }
      case Op::Log: {
        const Tensor& x = nodes_[static_cast<size_t>(n.p0)].value;
        Tensor gx = g;
        for (int64_t k = 0; k < gx.numel(); ++k) gx[k] /= x[k];
        acc(n.p0, std::move(gx));
        break;
      }
      case Op::Recip: {
        Tensor gx = t_mul(g, t_mul(n.value, n.value));
        acc(n.p0, t_scale(gx, -1.0));
        break;
      }
      case Op::Tanh: {
        Tensor gx = g;
        for (int64_t k = 0; k < gx.numel(); ++k) gx[k] *= 1.0 - n.value[k] * n.value[k];
        acc(n.p0, std::move(gx));
        break;
      }
      case Op::Softplus: {
        const Tensor& x = nodes_[static_cast<size_t>(n.p0)].value;
        Tensor gx = g;
        for (int64_t k = 0; k < gx.numel(); ++k) gx[k] *= sigmoid_scalar(x[k]);
        acc(n.p0, std::move(gx));
        break;
      }
      case Op::Sigmoid: {
        Tensor gx = g;
        for (int64_t k = 0; k < gx.numel(); ++k) gx[k] *= n.value[k] * (1.0 - n.value[k]);
        acc(n.p0, std::move(gx));
        break;
      }
      case Op::Square: {
        Tensor gx = t_mul(g, nodes_[static_cast<size_t>(n.p0)].value);
        acc(n.p0, t_scale(gx, 2.0));
        break;
      }
      case Op::SmoothRelu: {
        const Tensor& x = nodes_[static_cast<size_t>(n.p0)].value;
        Tensor gx = g;
        for (int64_t k = 0; k < gx.numel(); ++k) {
          const double t = x[k];
          gx[k] *= (t <= 0.0) ? 0.0 : (t < n.a0 ? t / n.a0 : 1.0);
        }
        acc(n.p0, std::move(gx));
        break;
      }
      case Op::SmoothReluGrad: {
        const Tensor& x = nodes_[static_cast<size_t>(n.p0)].value;
        Tensor gx = g;
        for (int64_t k = 0; k < gx.numel(); ++k) {
          const double t = x[k];
          gx[k] *= (t > 0.0 && t < n.a0) ? 1.0 / n.a0 : 0.0;
        }
        acc(n.p0, std::move(gx));
        break;
      }
      case Op::Clamp: {
        const Tensor& x = nodes_[static_cast<size_t>(n.p0)].value;
        Tensor gx = g;
        for (int64_t k = 0; k < gx.numel(); ++k)
          if (x[k] < n.a0 || x[k] > n.a1) gx[k] = 0.0;
        acc(n.p0, std::move(gx));
        break;
      }
      case Op::RowSum: {
        const Tensor& x = nodes_[static_cast<size_t>(n.p0)].value;
        acc(n.p0, colbroadcast_raw(g, x.cols()));
        break;
      }
      case Op::ColBroadcast: {
        acc(n.p0, rowsum_raw(g));
        break;
      }
      case Op::RepeatRows: {
        acc(n.p0, colsum(g));
        break;
      }
      case Op::ConcatCols: {
        int64_t off = 0;
        for (int32_t pid : n.extra) {
          const Tensor& p = nodes_[static_cast<size_t>(pid)].value;
          Tensor gp(p.rows(), p.cols(), 0.0);
          for (int64_t r = 0; r < p.rows(); ++r)
            for (int64_t c = 0; c < p.cols(); ++c) gp(r, c) = g(r, off + c);
          off += p.cols();
          acc(pid, std::move(gp));
        }
        break;
      }
      case Op::GatherPerRow: {
        const Tensor& x = nodes_[static_cast<size_t>(n.p0)].value;
        Tensor gp(x.rows(), x.cols(), 0.0);
        for (int64_t r = 0; r < x.rows(); ++r) gp(r, n.idx[static_cast<size_t>(r)]) = g(r, 0);
        acc(n.p0, std::move(gp));
        break;
      }
      case Op::SumAll: {
        const Tensor& x = nodes_[static_cast<size_t>(n.p0)].value;
        acc(n.p0, Tensor(x.rows(), x.cols(), g.item()));
        break;
      }
    }
  }
}

// --- op constructors --------------------------------------------------------

namespace {

Value unary(Value a, Op op, Tensor out, double a0 = 0.0, double a1 = 0.0) {
  Tape::Node n;
  n.value = std::move(out);
  n.op = op;
  n.p0 = a.id;
  n.a0 = a0;
  n.a1 = a1;
  return a.tape->emplace(std::move(n));
}

Value binary(Value a, Value b, Op op, Tensor out) {
  Tape::Node n;
  n.value = std::move(out);
  n.op = op;
  n.p0 = a.id;
  n.p1 = b.id;
  return a.tape->emplace(std::move(n));
}

Tensor map_unary(const Tensor& x, double (*f)(double)) {
  Tensor out = x;
  for (int64_t k = 0; k < out.numel(); ++k) out[k] = f(out[k]);
  return out;
}

}  // namespace

Value add(Value a, Value b) {
  same_tape(a, b, "add");
  return binary(a, b, Op::Add, t_add(a.val(), b.val()));
}

Value sub(Value a, Value b) {
  same_tape(a, b, "sub");
  return binary(a, b, Op::Sub, t_sub(a.val(), b.val()));
}

Value hadamard(Value a, Value b) {
  same_tape(a, b, "hadamard");
  return binary(a, b, Op::Hadamard, t_mul(a.val(), b.val()));
}

Value affine(Value a, double k, double c) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = k * out[i] + c;
  return unary(a, Op::Affine, std::move(out), k, c);
}

Value matmul(Value a, Value b) {
  same_tape(a, b, "matmul");
  return binary(a, b, Op::MatMul, t_matmul(a.val(), b.val()));
}

Value exp(Value a) {
  return unary(a, Op::Exp, map_unary(a.val(), [](double x) { return std::exp(x); }));
}

Value log(Value a) {
  const Tensor& x = a.val();
  Tensor out = x;
  for (int64_t k = 0; k < out.numel(); ++k) {
    if (std::abs(out[k]) < kGuardBand)
      throw GuardBandError("log: magnitude below guard band");
    if (out[k] < 0.0) throw GuardBandError("log: negative argument");
    out[k] = std::log(out[k]);
  }
  return unary(a, Op::Log, std::move(out));
}

Value reciprocal(Value a) {
  Tensor out = a.val();
  for (int64_t k = 0; k < out.numel(); ++k) {
    if (std::abs(out[k]) < kGuardBand)
      throw GuardBandError("reciprocal: magnitude below guard band");
    out[k] = 1.0 / out[k];
  }
  return unary(a, Op::Recip, std::move(out));
}

Value tanh(Value a) {
  return unary(a, Op::Tanh, map_unary(a.val(), [](double x) { return std::tanh(x); }));
}

Value softplus(Value a) {
  return unary(a, Op::Softplus, map_unary(a.val(), [](double x) { return softplus_scalar(x); }));
}

Value sigmoid(Value a) {
  return unary(a, Op::Sigmoid, map_unary(a.val(), [](double x) { return sigmoid_scalar(x); }));
}

Value square(Value a) {
  return unary(a, Op::Square, map_unary(a.val(), [](double x) { return x * x; }));
}

Value smoothed_relu(Value a, double knee) {
  if (knee <= 0.0) throw TensorError("smoothed_relu: knee must be positive");
  Tensor out = a.val();
  for (int64_t k = 0; k < out.numel(); ++k) out[k] = smoothed_relu_scalar(out[k], knee);
  return unary(a, Op::SmoothRelu, std::move(out), knee);
}

Value smoothed_relu_grad(Value a, double knee) {
  if (knee <= 0.0) throw TensorError("smoothed_relu_grad: knee must be positive");
  Tensor out = a.val();
  for (int64_t k = 0; k < out.numel(); ++k) {
    const double t = out[k];
    out[k] = (t <= 0.0) ? 0.0 : (t < knee ? t / knee : 1.0);
  }
  return unary(a, Op::SmoothReluGrad, std::move(out), knee);
}

Value clamp(Value a, double lo, double hi) {
  if (!(lo < hi)) throw TensorError("clamp: lo must be < hi");
  Tensor out = a.val();
  for (int64_t k = 0; k < out.numel(); ++k) out[k] = std::min(hi, std::max(lo, out[k]));
  return unary(a, Op::Clamp, std::move(out), lo, hi);
}

Value rowsum(Value a) { return unary(a, Op::RowSum, rowsum_raw(a.val())); }

Value colbroadcast(Value a, int64_t n) {
  if (a.val().cols() != 1) throw TensorError("colbroadcast expects a column vector");
  Value v = unary(a, Op::ColBroadcast, colbroadcast_raw(a.val(), n));
  return v;
}

Value repeat_rows(Value a, int64_t m) {
  const Tensor& x = a.val();
  if (x.rows() != 1) throw TensorError("repeat_rows expects a row vector");
  Tensor out(m, x.cols(), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < x.cols(); ++j) out(i, j) = x(0, j);
  Tape::Node n;
  n.value = std::move(out);
  n.op = Op::RepeatRows;
  n.p0 = a.id;
  n.iaux = m;
  return a.tape->emplace(std::move(n));
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw TensorError("concat_cols: no parts");
  Tape* tp = parts[0].tape;
  int64_t rows = parts[0].val().rows(), cols = 0;
  for (const Value& p : parts) {
    same_tape(parts[0], p, "concat_cols");
    if (p.val().rows() != rows) throw TensorError("concat_cols: row counts disagree");
    cols += p.val().cols();
  }
  Tensor out(rows, cols, 0.0);
  int64_t off = 0;
  for (const Value& p : parts) {
    const Tensor& x = p.val();
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < x.cols(); ++j) out(i, off + j) = x(i, j);
    off += x.cols();
  }
  Tape::Node n;
  n.value = std::move(out);
  n.op = Op::ConcatCols;
  for (const Value& p : parts) n.extra.push_back(p.id);
  return tp->emplace(std::move(n));
}

Value gather_per_row(Value a, const std::vector<int64_t>& idx) {
  const Tensor& x = a.val();
  if (static_cast<int64_t>(idx.size()) != x.rows())
    throw TensorError("gather_per_row: one index per row required");
  Tensor out(x.rows(), 1, 0.0);
  for (int64_t i = 0; i < x.rows(); ++i) {
    int64_t j = idx[static_cast<size_t>(i)];
    if (j < 0 || j >= x.cols()) throw TensorError("gather_per_row: index out of range");
    out(i, 0) = x(i, j);
  }
  Tape::Node n;
  n.value = std::move(out);
  n.op = Op::GatherPerRow;
  n.p0 = a.id;
  n.idx = idx;
  return a.tape->emplace(std::move(n));
}

Value sum_all(Value a) {
  double s = 0.0;
  const Tensor& x = a.val();
  for (int64_t k = 0; k < x.numel(); ++k) s += x[k];
  return unary(a, Op::SumAll, Tensor::scalar(s));
}

Value softmax_rows(Value a) {
  // copy shape first: node creation may reallocate the tape's storage
  const int64_t ncols = a.val().cols();
  Value mx = a.tape->constant(rowmax(a.val()));
  Value z = sub(a, colbroadcast(mx, ncols));
  Value e = exp(z);
  Value s = rowsum(e);
  return hadamard(e, colbroadcast(reciprocal(s), ncols));
}

// --- dual mirrors ------------------------------------------------------------

Dual dual(Value primal_leaf, Value tangent) {
  same_tape(primal_leaf, tangent, "dual");
  if (!primal_leaf.val().same_shape(tangent.val()))
    throw TensorError("dual: primal and tangent shapes disagree");
  return Dual{primal_leaf, tangent};
}

Dual add(Dual a, Dual b) { return {add(a.p, b.p), add(a.t, b.t)}; }
Dual add(Dual a, Value b) { return {add(a.p, b), a.t}; }
Dual sub(Dual a, Dual b) { return {sub(a.p, b.p), sub(a.t, b.t)}; }
Dual sub(Dual a, Value b) { return {sub(a.p, b), a.t}; }
Dual sub(Value a, Dual b) { return {sub(a, b.p), neg(b.t)}; }

Dual hadamard(Dual a, Dual b) {
  return {hadamard(a.p, b.p), add(hadamard(a.t, b.p), hadamard(a.p, b.t))};
}
Dual hadamard(Dual a, Value b) { return {hadamard(a.p, b), hadamard(a.t, b)}; }

Dual affine(Dual a, double k, double c) { return {affine(a.p, k, c), scale(a.t, k)}; }

Dual matmul(Dual a, Value b) { return {matmul(a.p, b), matmul(a.t, b)}; }
Dual matmul(Value a, Dual b) { return {matmul(a, b.p), matmul(a, b.t)}; }
Dual matmul(Dual a, Dual b) {
  return {matmul(a.p, b.p), add(matmul(a.t, b.p), matmul(a.p, b.t))};
}

Dual exp(Dual a) {
  Value p = exp(a.p);
  return {p, hadamard(a.t, p)};
}

Dual tanh(Dual a) {
  Value p = tanh(a.p);
  return {p, hadamard(a.t, affine(square(p), -1.0, 1.0))};
}

Dual softplus(Dual a) { return {softplus(a.p), hadamard(a.t, sigmoid(a.p))}; }

Dual square(Dual a) { return {square(a.p), scale(hadamard(a.p, a.t), 2.0)}; }

Dual smoothed_relu(Dual a, double knee) {
  return {smoothed_relu(a.p, knee), hadamard(a.t, smoothed_relu_grad(a.p, knee))};
}

Dual clamp(Dual a, double lo, double hi) {
  const Tensor& x = a.p.val();
  Tensor mask = x;
  for (int64_t k = 0; k < mask.numel(); ++k) mask[k] = (x[k] < lo || x[k] > hi) ? 0.0 : 1.0;
  Value m = a.p.tape->constant(std::move(mask));
  return {clamp(a.p, lo, hi), hadamard(a.t, m)};
}

Dual rowsum(Dual a) { return {rowsum(a.p), rowsum(a.t)}; }
Dual colbroadcast(Dual a, int64_t n) { return {colbroadcast(a.p, n), colbroadcast(a.t, n)}; }
Dual repeat_rows(Dual a, int64_t m) { return {repeat_rows(a.p, m), repeat_rows(a.t, m)}; }
Dual gather_per_row(Dual a, const std::vector<int64_t>& idx) {
  return {gather_per_row(a.p, idx), gather_per_row(a.t, idx)};
}
Dual sum_all(Dual a) { return {sum_all(a.p), sum_all(a.t)}; }

Dual reciprocal(Dual a) {
  Value p = reciprocal(a.p);
  return {p, neg(hadamard(a.t, square(p)))};
}

Dual softmax_rows(Dual a) {
  const int64_t ncols = a.p.val().cols();
  Value mx = a.p.tape->constant(rowmax(a.p.val()));
  Dual z = {sub(a.p, colbroadcast(mx, ncols)), a.t};
  Dual e = exp(z);
  Dual s = rowsum(e);
  Dual r = reciprocal(s);
  return hadamard(e, colbroadcast(r, ncols));
}

}  // namespace zubov
