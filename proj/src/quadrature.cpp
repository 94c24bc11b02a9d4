#include "parznet/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace parznet {

namespace {

// Implicit-shift QL on a symmetric tridiagonal matrix. Diagonal d and
// off-diagonal e are overwritten with eigenvalues; z starts as the first
// unit vector and ends as the first row of the eigenvector matrix.
void tridiag_ql(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z) {
  const int n = static_cast<int>(d.size());
  e.push_back(0.0);
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= 1e-16 * dd) break;
      }
      if (m != l) {
        if (++iter > 64) throw std::runtime_error("tridiagonal QL failed to converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (int i = m - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          f = z[i + 1];
          z[i + 1] = s * z[i] + c * f;
          z[i] = c * z[i] - s * f;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace

QuadratureRule hermite_rule(int s) {
  if (s < 1 || s > 128) throw std::invalid_argument("hermite_rule: order must be in [1, 128]");

  std::vector<double> d(static_cast<std::size_t>(s), 0.0);
  std::vector<double> e(static_cast<std::size_t>(s) - 1);
  for (int i = 1; i < s; ++i) e[static_cast<std::size_t>(i) - 1] = std::sqrt(0.5 * i);
  std::vector<double> z(static_cast<std::size_t>(s), 0.0);
  z[0] = 1.0;

  tridiag_ql(d, e, z);

  std::vector<int> idx(static_cast<std::size_t>(s));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return d[a] < d[b]; });

  const double sqrt_pi = std::sqrt(3.14159265358979323846264338328);
  QuadratureRule rule;
  rule.order = s;
  rule.nodes.resize(static_cast<std::size_t>(s));
  rule.weights.resize(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) {
    rule.nodes[i] = d[idx[i]];
    rule.weights[i] = sqrt_pi * z[idx[i]] * z[idx[i]];
  }

  // Enforce the symmetry invariants exactly: pair i with s-1-i.
  for (int i = 0; i < s / 2; ++i) {
    const int j = s - 1 - i;
    const double u = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -u;
    rule.nodes[j] = u;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (s % 2 == 1) rule.nodes[s / 2] = 0.0;
  return rule;
}

double integrate(const QuadratureRule& rule, const std::function<double(double)>& h) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * h(rule.nodes[i]);
  return acc;
}

double gaussian_expectation(const QuadratureRule& rule, double mean, double std_dev,
                            const std::function<double(double)>& f) {
  const double sqrt2 = 1.41421356237309504880168872421;
  const double inv_sqrt_pi = 0.564189583547756286948079451561;
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(sqrt2 * std_dev * rule.nodes[i] + mean);
  return inv_sqrt_pi * acc;
}

double hermite_value(int n, double x) {
  double h0 = 1.0;
  if (n == 0) return h0;
  double h1 = 2.0 * x;
  for (int k = 1; k < n; ++k) {
    const double h2 = 2.0 * x * h1 - 2.0 * k * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

}  // namespace parznet
