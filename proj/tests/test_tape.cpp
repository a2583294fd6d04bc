#include <doctest.h>

#include <cmath>
#include <functional>

#include "zubov/rng.hpp"
#include "zubov/tape.hpp"

using namespace zubov;

namespace {

// central difference of a scalar-valued rebuild at one coordinate of one input
double fd_at(const std::function<double(const std::vector<Tensor>&)>& f,
             std::vector<Tensor> inputs, size_t which, int64_t k, double h = 1e-6) {
  inputs[which][k] += h;
  const double up = f(inputs);
  inputs[which][k] -= 2 * h;
  const double dn = f(inputs);
  return (up - dn) / (2 * h);
}

void check_grads(const std::function<double(const std::vector<Tensor>&)>& f,
                 const std::vector<Tensor>& inputs, const std::vector<Tensor>& grads,
                 double tol = 1e-5) {
  for (size_t i = 0; i < inputs.size(); ++i)
    for (int64_t k = 0; k < inputs[i].numel(); ++k) {
      const double fd = fd_at(f, inputs, i, k);
      CHECK(grads[i][k] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
}

}  // namespace

TEST_CASE("backward matches finite differences through a composite chain") {
  Rng rng(11);
  const Tensor x0 = rng.uniform_tensor(3, 2, -1.0, 1.0);
  const Tensor w0 = rng.uniform_tensor(2, 4, -1.0, 1.0);

  const auto f = [](const std::vector<Tensor>& in) {
    Tape t;
    Value x = t.leaf(in[0]), w = t.leaf(in[1]);
    Value y = sum_all(square(tanh(matmul(x, w))));
    return t.val(y).item();
  };

  Tape t;
  Value x = t.leaf(x0), w = t.leaf(w0);
  Value y = sum_all(square(tanh(matmul(x, w))));
  t.backward(y);
  check_grads(f, {x0, w0}, {t.grad(x), t.grad(w)});
}

TEST_CASE("elementwise op gradients match finite differences") {
  Rng rng(12);
  const Tensor x0 = rng.uniform_tensor(2, 3, 0.3, 1.2);  // positive, clear of guard bands

  const auto make = [](Tape& t, Value x) {
    Value a = exp(scale(x, 0.3));
    Value b = log(add(a, softplus(x)));
    Value c = hadamard(sigmoid(x), reciprocal(affine(x, 1.0, 2.0)));
    return sum_all(add(b, square(c)));
  };
  const auto f = [&](const std::vector<Tensor>& in) {
    Tape t;
    Value x = t.leaf(in[0]);
    return t.val(make(t, x)).item();
  };

  Tape t;
  Value x = t.leaf(x0);
  Value y = make(t, x);
  t.backward(y);
  check_grads(f, {x0}, {t.grad(x)});
}

TEST_CASE("structural op gradients match finite differences") {
  Rng rng(13);
  const Tensor x0 = rng.uniform_tensor(1, 3, -1.0, 1.0);
  const Tensor m0 = rng.uniform_tensor(4, 2, -1.0, 1.0);

  const auto make = [](Tape& t, Value x, Value m) {
    Value rep = repeat_rows(x, 4);                       // (4,3)
    Value cat = concat_cols({rep, m});                   // (4,5)
    Value rs = rowsum(square(cat));                      // (4,1)
    Value cb = colbroadcast(rs, 3);                      // (4,3)
    Value g = gather_per_row(tanh(cb), {0, 2, 1, 0});    // (4,1)
    return sum_all(g);
  };
  const auto f = [&](const std::vector<Tensor>& in) {
    Tape t;
    Value x = t.leaf(in[0]), m = t.leaf(in[1]);
    return t.val(make(t, x, m)).item();
  };

  Tape t;
  Value x = t.leaf(x0), m = t.leaf(m0);
  t.backward(make(t, x, m));
  check_grads(f, {x0, m0}, {t.grad(x), t.grad(m)});
}

TEST_CASE("softmax rows on known logits") {
  Tape t;
  Tensor in(1, 2, std::vector<double>{std::log(1.0), std::log(3.0)});
  Value s = softmax_rows(t.leaf(in));
  CHECK(t.val(s)(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(t.val(s)(0, 1) == doctest::Approx(0.75).epsilon(1e-14));

  // rows sum to one even for extreme logits
  Tensor big(1, 3, std::vector<double>{1000.0, 999.0, -1000.0});
  Value sb = softmax_rows(t.leaf(big));
  const Tensor out = t.val(sb);
  CHECK(out(0, 0) + out(0, 1) + out(0, 2) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(out(0, 0) > out(0, 1));
}

TEST_CASE("smoothed rectifier: values, knee band, gradient") {
  const double d = 0.1;
  CHECK(smoothed_relu_scalar(-1.0, d) == 0.0);
  CHECK(smoothed_relu_scalar(0.0, d) == 0.0);
  CHECK(smoothed_relu_scalar(0.05, d) == doctest::Approx(0.0125).epsilon(1e-15));
  CHECK(smoothed_relu_scalar(0.1, d) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(smoothed_relu_scalar(2.0, d) == doctest::Approx(1.95).epsilon(1e-15));

  Tape t;
  Tensor in(1, 4, std::vector<double>{-0.5, 0.05, 0.1, 2.0});
  Value x = t.leaf(in);
  Value y = smoothed_relu(x, d);
  const Tensor v = t.val(y);
  CHECK(v(0, 0) == 0.0);
  CHECK(v(0, 1) == doctest::Approx(0.0125).epsilon(1e-15));
  t.backward(sum_all(y));
  const Tensor g = t.grad(x);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == doctest::Approx(0.5).epsilon(1e-12));   // t/d inside the band
  CHECK(g(0, 3) == doctest::Approx(1.0).epsilon(1e-12));

  Tape t2;
  Value yg = smoothed_relu_grad(t2.leaf(in), d);
  CHECK(t2.val(yg)(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("clamp gradient is a pass-through indicator") {
  Tape t;
  Tensor in(1, 3, std::vector<double>{-2.0, 0.3, 5.0});
  Value x = t.leaf(in);
  Value y = clamp(x, 0.0, 1.0);
  const Tensor v = t.val(y);
  CHECK(v(0, 0) == 0.0);
  CHECK(v(0, 1) == 0.3);
  CHECK(v(0, 2) == 1.0);
  t.backward(sum_all(y));
  const Tensor g = t.grad(x);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 1.0);
  CHECK(g(0, 2) == 0.0);
}

TEST_CASE("forward tangent: directional derivative of the squared norm") {
  // fn(h) = sum h^2 at h = [1, 2] along v = [1, 0]: dfn = 2 h . v = 2
  Tape t;
  Value h = t.leaf(Tensor(1, 2, std::vector<double>{1, 2}));
  Value v = t.constant(Tensor(1, 2, std::vector<double>{1, 0}));
  Dual hd = dual(h, v);
  Dual y = sum_all(square(hd));
  CHECK(t.val(y.p).item() == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(t.val(y.t).item() == doctest::Approx(2.0).epsilon(1e-15));

  // the tangent is itself on the tape: d(2 h.v)/dh = 2 v
  t.backward(y.t);
  const Tensor g = t.grad(h);
  CHECK(g(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(g(0, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}

TEST_CASE("forward tangent through nonlinear composites matches finite differences") {
  Rng rng(14);
  const Tensor x0 = rng.uniform_tensor(2, 3, -0.8, 0.8);
  const Tensor v0 = rng.uniform_tensor(2, 3, -1.0, 1.0);
  const Tensor w0 = rng.uniform_tensor(3, 2, -1.0, 1.0);

  const auto eval = [&](const Tensor& xin) {
    Tape t;
    Value x = t.leaf(xin), w = t.constant(w0);
    Value y = sum_all(softplus(matmul(tanh(x), w)));
    return t.val(y).item();
  };

  Tape t;
  Value x = t.leaf(x0), v = t.constant(v0), w = t.constant(w0);
  Dual y = sum_all(softplus(matmul(tanh(dual(x, v)), w)));

  const double h = 1e-6;
  Tensor up = x0, dn = x0;
  t_axpy(up, h, v0);
  t_axpy(dn, -h, v0);
  const double fd = (eval(up) - eval(dn)) / (2 * h);
  CHECK(t.val(y.t).item() == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("guard band rejects near-zero log and reciprocal") {
  Tape t;
  Value tiny = t.leaf(Tensor::scalar(1e-13));
  CHECK_THROWS_AS(log(tiny), GuardBandError);
  CHECK_THROWS_AS(reciprocal(tiny), GuardBandError);
  Value fine = t.leaf(Tensor::scalar(1e-11));
  CHECK_NOTHROW(log(fine));
}

TEST_CASE("constants block gradient flow") {
  Tape t;
  Value x = t.leaf(Tensor::scalar(2.0));
  Value c = t.constant(Tensor::scalar(3.0));
  Value y = sum_all(hadamard(x, c));
  t.backward(y);
  CHECK(t.grad(x).item() == 3.0);
  CHECK(t.grad(c).item() == 0.0);
}

TEST_CASE("shape mismatches in primitives throw") {
  Tape t;
  Value a = t.leaf(Tensor(2, 3, 1.0));
  Value b = t.leaf(Tensor(3, 2, 1.0));
  CHECK_THROWS_AS(add(a, b), TensorError);
  CHECK_THROWS_AS(hadamard(a, b), TensorError);
  CHECK_THROWS_AS(matmul(a, a), TensorError);
  CHECK_THROWS_AS(t.backward(a), GradientError);  // root must be 1x1
}
