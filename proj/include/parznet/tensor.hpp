#pragma once

#include <cstddef>
#include <vector>

namespace parznet {

/// Dense row-major (batch, channels, length) buffer of 64-bit reals.
/// Per-sample vectors are represented as (n, units, 1).
struct Tensor {
  int n = 0, c = 0, t = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int t_) : n(n_), c(c_), t(t_), v(std::size_t(n_) * c_ * t_, 0.0) {}

  void resize(int n_, int c_, int t_) {
    n = n_;
    c = c_;
    t = t_;
    v.assign(std::size_t(n_) * c_ * t_, 0.0);
  }

  double* row(int i, int j) { return v.data() + (std::size_t(i) * c + j) * t; }
  const double* row(int i, int j) const { return v.data() + (std::size_t(i) * c + j) * t; }

  double& at(int i, int j, int k) { return v[(std::size_t(i) * c + j) * t + k]; }
  double at(int i, int j, int k) const { return v[(std::size_t(i) * c + j) * t + k]; }

  std::size_t size() const { return v.size(); }
  std::size_t per_sample() const { return std::size_t(c) * t; }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

}  // namespace parznet
