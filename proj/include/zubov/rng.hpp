#pragma once

#include <cstdint>
#include <random>

#include "zubov/tensor.hpp"

namespace zubov {

// splitmix64 finalizer; stable way to derive independent stream seeds
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 is bit-stable across platforms; the std:: distributions are not,
// so sampling is done by hand here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  int64_t index(int64_t n) {
    return static_cast<int64_t>(static_cast<unsigned __int128>(eng_()) * static_cast<uint64_t>(n) >> 64);
  }

  Tensor uniform_tensor(int64_t r, int64_t c, double lo, double hi) {
    Tensor t(r, c, 0.0);
    for (int64_t k = 0; k < t.numel(); ++k) t[k] = uniform(lo, hi);
    return t;
  }

  Tensor normal_tensor(int64_t r, int64_t c, double std_dev) {
    Tensor t(r, c, 0.0);
    for (int64_t k = 0; k < t.numel(); ++k) t[k] = std_dev * normal();
    return t;
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace zubov
