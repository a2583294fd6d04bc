#include "zubov/tensor.hpp"

#include <sstream>

namespace zubov {

namespace {
size_t checked_numel(int64_t rows, int64_t cols) {
  if (rows < 1 || cols < 1) throw TensorError("tensor dimensions must be positive");
  return static_cast<size_t>(rows) * static_cast<size_t>(cols);
}
}  // namespace

Tensor::Tensor(int64_t rows, int64_t cols, double fill)
    : rows_(rows), cols_(cols), d_(checked_numel(rows, cols), fill) {}

Tensor::Tensor(int64_t rows, int64_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), d_(std::move(data)) {
  if (checked_numel(rows, cols) != d_.size())
    throw TensorError("tensor data size does not match shape");
}

Tensor Tensor::row(std::vector<double> v) {
  auto n = static_cast<int64_t>(v.size());
  return Tensor(1, n, std::move(v));
}

Tensor Tensor::col(std::vector<double> v) {
  auto n = static_cast<int64_t>(v.size());
  return Tensor(n, 1, std::move(v));
}

double Tensor::item() const {
  if (numel() != 1) throw TensorError("item() requires a 1x1 tensor, got " + shape_str());
  return d_[0];
}

void Tensor::check_finite(const char* where) const {
  for (double v : d_)
    if (!std::isfinite(v)) throw TensorError(std::string("non-finite value in ") + where);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(" << rows_ << "," << cols_ << ")";
  return os.str();
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw TensorError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}
}  // namespace

Tensor t_add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "t_add");
  Tensor out = a;
  for (int64_t k = 0; k < out.numel(); ++k) out[k] += b[k];
  return out;
}

Tensor t_sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "t_sub");
  Tensor out = a;
  for (int64_t k = 0; k < out.numel(); ++k) out[k] -= b[k];
  return out;
}

Tensor t_mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "t_mul");
  Tensor out = a;
  for (int64_t k = 0; k < out.numel(); ++k) out[k] *= b[k];
  return out;
}

Tensor t_scale(const Tensor& a, double s) {
  Tensor out = a;
  for (int64_t k = 0; k < out.numel(); ++k) out[k] *= s;
  return out;
}

Tensor t_matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw TensorError("t_matmul: inner dimensions disagree " + a.shape_str() + " x " + b.shape_str());
  Tensor out(a.rows(), b.cols(), 0.0);
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int64_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

void t_axpy(Tensor& acc, double s, const Tensor& x) {
  require_same_shape(acc, x, "t_axpy");
  for (int64_t k = 0; k < acc.numel(); ++k) acc[k] += s * x[k];
}

double t_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "t_dot");
  double s = 0.0;
  for (int64_t k = 0; k < a.numel(); ++k) s += a[k] * b[k];
  return s;
}

double fro_norm(const Tensor& a) {
  double s = 0.0;
  for (int64_t k = 0; k < a.numel(); ++k) s += a[k] * a[k];
  return std::sqrt(s);
}

double linf_norm(const Tensor& a) {
  double s = 0.0;
  for (int64_t k = 0; k < a.numel(); ++k) s = std::max(s, std::abs(a[k]));
  return s;
}

Tensor rowmax(const Tensor& a) {
  Tensor out(a.rows(), 1, 0.0);
  for (int64_t i = 0; i < a.rows(); ++i) {
    double m = a(i, 0);
    for (int64_t j = 1; j < a.cols(); ++j) m = std::max(m, a(i, j));
    out(i, 0) = m;
  }
  return out;
}

Tensor colsum(const Tensor& a) {
  Tensor out(1, a.cols(), 0.0);
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  return out;
}

}  // namespace zubov
