#pragma once

#include <cstdint>
#include <vector>

#include "zubov/tensor.hpp"

namespace zubov {

struct GuardBandError : TensorError {
  explicit GuardBandError(const std::string& what) : TensorError(what) {}
};
struct GradientError : TensorError {
  explicit GradientError(const std::string& what) : TensorError(what) {}
};

// reciprocal / log reject magnitudes below this instead of amplifying noise
inline constexpr double kGuardBand = 1e-12;

class Tape;

// Handle to a node on a tape. Cheap to copy; owns nothing.
struct Value {
  Tape* tape = nullptr;
  int32_t id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& val() const;
};

// Primal/tangent pair for directional derivatives recorded on the same tape,
// so the tangent output stays differentiable with respect to every leaf.
struct Dual {
  Value p;
  Value t;
};

enum class Op : uint8_t {
  Leaf, Const,
  Add, Sub, Hadamard, Affine, MatMul,
  Exp, Log, Recip, Tanh, Softplus, Sigmoid, Square,
  SmoothRelu, SmoothReluGrad, Clamp,
  RowSum, ColBroadcast, RepeatRows, ConcatCols, GatherPerRow, SumAll,
};

class Tape {
 public:
  Value leaf(Tensor t);       // trainable input; gradient is retained
  Value constant(Tensor t);   // data; gradient not propagated past it

  const Tensor& val(Value v) const;

  // Reverse sweep from a 1x1 root. Visits nodes in reverse creation order
  // (a topological order) exactly once; accumulation order is fixed.
  void backward(Value root);

  // Gradient of the last backward root w.r.t. v; zeros if v was unreached.
  Tensor grad(Value v) const;

  size_t size() const { return nodes_.size(); }

  struct Node {
    Tensor value;
    Op op = Op::Leaf;
    int32_t p0 = -1, p1 = -1;        // common-case parents
    std::vector<int32_t> extra;      // ConcatCols only
    double a0 = 0.0, a1 = 0.0;       // op constants (affine coefs, clamp bounds, knee)
    int64_t iaux = 0;                // broadcast width / repeat count
    std::vector<int64_t> idx;        // GatherPerRow row indices
  };

  Value emplace(Node n);
  const Node& node(int32_t id) const { return nodes_[static_cast<size_t>(id)]; }

 private:
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool swept_ = false;
};

// --- primitive operations -------------------------------------------------

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value hadamard(Value a, Value b);
Value affine(Value a, double k, double c);  // k*a + c elementwise
inline Value neg(Value a) { return affine(a, -1.0, 0.0); }
inline Value scale(Value a, double k) { return affine(a, k, 0.0); }
Value matmul(Value a, Value b);
Value exp(Value a);
Value log(Value a);
Value reciprocal(Value a);
Value tanh(Value a);
Value softplus(Value a);
Value sigmoid(Value a);
Value square(Value a);
Value smoothed_relu(Value a, double knee);
Value smoothed_relu_grad(Value a, double knee);
Value clamp(Value a, double lo, double hi);
Value rowsum(Value a);                   // (m,n) -> (m,1)
Value colbroadcast(Value a, int64_t n);  // (m,1) -> (m,n)
Value repeat_rows(Value a, int64_t m);   // (1,n) -> (m,n)
Value concat_cols(const std::vector<Value>& parts);
Value gather_per_row(Value a, const std::vector<int64_t>& idx);
Value sum_all(Value a);

// Row-wise softmax with detached per-row max subtraction; composite of the
// primitives above, so gradients and tangents need no dedicated rule.
Value softmax_rows(Value a);

// --- dual (forward tangent) mirrors ----------------------------------------
// A plain Value argument is treated as tangent-free.

Dual dual(Value primal_leaf, Value tangent);
Dual add(Dual a, Dual b);
Dual add(Dual a, Value b);
Dual sub(Dual a, Dual b);
Dual sub(Dual a, Value b);
Dual sub(Value a, Dual b);
Dual hadamard(Dual a, Dual b);
Dual hadamard(Dual a, Value b);
Dual affine(Dual a, double k, double c);
Dual matmul(Dual a, Value b);
Dual matmul(Value a, Dual b);
Dual matmul(Dual a, Dual b);
Dual exp(Dual a);
Dual tanh(Dual a);
Dual softplus(Dual a);
Dual square(Dual a);
Dual smoothed_relu(Dual a, double knee);
Dual clamp(Dual a, double lo, double hi);
Dual rowsum(Dual a);
Dual colbroadcast(Dual a, int64_t n);
Dual repeat_rows(Dual a, int64_t m);
Dual gather_per_row(Dual a, const std::vector<int64_t>& idx);
Dual sum_all(Dual a);
Dual reciprocal(Dual a);
Dual softmax_rows(Dual a);

// elementwise smoothed rectifier used outside the tape as well
double smoothed_relu_scalar(double t, double knee);

}  // namespace zubov
