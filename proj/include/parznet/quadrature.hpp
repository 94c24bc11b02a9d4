#pragma once

#include <functional>
#include <vector>

namespace parznet {

/// Physicist's Gauss-Hermite rule: nodes are the roots of H_s, weights are
/// positive and sum to sqrt(pi). Nodes ascend and are symmetric about zero.
struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Builds the order-s rule via the Golub-Welsch eigenproblem of the Jacobi
/// matrix (off-diagonal sqrt(i/2)), then symmetrizes node/weight pairs.
/// Stable up to s = 128 where the factorial weight formula would overflow.
/// Throws std::invalid_argument unless 1 <= s <= 128.
QuadratureRule hermite_rule(int s);

/// Sum of w_i * h(u_i), approximating the integral of h(u) exp(-u^2) over R.
/// Exact for polynomials of degree <= 2s-1. Non-finite h values propagate.
double integrate(const QuadratureRule& rule, const std::function<double(double)>& h);

/// E_{N(mean, std^2)}[f] via the change of variables x = sqrt(2)*std*u + mean.
double gaussian_expectation(const QuadratureRule& rule, double mean, double std_dev,
                            const std::function<double(double)>& f);

/// H_n(x) by the three-term recurrence H_{n+1} = 2x H_n - 2n H_{n-1}.
double hermite_value(int n, double x);

}  // namespace parznet
