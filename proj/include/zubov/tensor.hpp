#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace zubov {

struct TensorError : std::runtime_error {
  explicit TensorError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major matrix of doubles. Rank is always 2; scalars are 1x1,
// row vectors 1xn, column vectors nx1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int64_t rows, int64_t cols, double fill = 0.0);
  Tensor(int64_t rows, int64_t cols, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(1, 1, std::vector<double>{v}); }
  static Tensor row(std::vector<double> v);
  static Tensor col(std::vector<double> v);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.rows_, t.cols_, 0.0); }

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  int64_t numel() const { return rows_ * cols_; }
  bool empty() const { return rows_ == 0; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(int64_t i, int64_t j) { return d_[static_cast<size_t>(i * cols_ + j)]; }
  double operator()(int64_t i, int64_t j) const { return d_[static_cast<size_t>(i * cols_ + j)]; }
  double& operator[](int64_t k) { return d_[static_cast<size_t>(k)]; }
  double operator[](int64_t k) const { return d_[static_cast<size_t>(k)]; }
  double item() const;

  std::vector<double>& data() { return d_; }
  const std::vector<double>& data() const { return d_; }

  void check_finite(const char* where) const;
  std::string shape_str() const;

 private:
  int64_t rows_ = 0, cols_ = 0;
  std::vector<double> d_;
};

// Plain (untracked) arithmetic used by the adaptive solver, the optimizer and
// gradient bookkeeping. All shape mismatches throw.
Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_sub(const Tensor& a, const Tensor& b);
Tensor t_mul(const Tensor& a, const Tensor& b);
Tensor t_scale(const Tensor& a, double s);
Tensor t_matmul(const Tensor& a, const Tensor& b);
void t_axpy(Tensor& acc, double s, const Tensor& x);  // acc += s*x
double t_dot(const Tensor& a, const Tensor& b);
double fro_norm(const Tensor& a);
double linf_norm(const Tensor& a);
Tensor rowmax(const Tensor& a);   // (m,n) -> (m,1)
Tensor colsum(const Tensor& a);   // (m,n) -> (1,n)

}  // namespace zubov
