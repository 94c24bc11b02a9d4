#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parznet/quadrature.hpp"

namespace parznet {

// Clip bounds for the dropout scale alpha and the variational-mean floor
// that keeps sigma = sqrt(alpha)*|mu| away from zero.
inline constexpr double kAlphaMin = 1e-4;
inline constexpr double kAlphaMax = 16.0;
inline constexpr double kMuFloor = 1e-8;

/// One learnable scalar of the probabilistic network: mean mu and dropout
/// scale alpha stored in log form, giving variance sigma^2 = alpha * mu^2.
struct VariationalParam {
  double mu = 0.0;
  double log_alpha = -3.0;
};

double clip_log_alpha(double log_alpha);

/// |mu| floored away from zero, sign preserved (sign(0) treated as +).
double effective_mu(double mu);

/// Posterior std sqrt(alpha) * |mu_eff|.
double posterior_std(double mu, double log_alpha);

/// Reparameterized draw mu + eps * sigma; eps = 0 returns the mean.
double sample_param(const VariationalParam& vp, double eps);

/// Two-component Gaussian mixture sharing mean xi, one narrow (eta1) and one
/// wide (eta2) scale. Requires 0 <= lambda <= 1 and eta1 < eta2.
struct ScaleMixturePrior {
  double lambda = 0.25;
  double xi = 0.0;
  double eta1 = 0.0005;
  double eta2 = 1.0;

  void validate() const;
};

/// log(lambda*N(x|xi,eta1^2) + (1-lambda)*N(x|xi,eta2^2)) via log-sum-exp.
double sm_log_density(const ScaleMixturePrior& prior, double x);

/// d/dx of sm_log_density.
double sm_log_density_dx(const ScaleMixturePrior& prior, double x);

/// KL(q || log-scale-uniform) up to the paper's additive constant (fixed to
/// zero here): -1/2 log(alpha) + 1/sqrt(pi) * sum_i w_i log|sqrt(2a)u_i + 1|.
/// Depends on alpha only.
double kl_lsu_gh(double log_alpha, const QuadratureRule& rule);

/// d kl_lsu_gh / d log_alpha, exact for the quadrature expression.
double kl_lsu_gh_grad(double log_alpha, const QuadratureRule& rule);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo oracle E_{N(1,alpha)}[log|eps|] - 1/2 log(alpha).
/// Deterministic for a fixed seed.
McEstimate kl_lsu_mc(double log_alpha, std::int64_t n_samples, std::uint64_t seed);

/// Full KL(q || scale mixture): analytic Gaussian entropy plus the quadrature
/// cross term. If |mu| < kMuFloor the floored mean is used and *clamped (when
/// given) is set.
double kl_sm_gh(double mu, double log_alpha, const ScaleMixturePrior& prior,
                const QuadratureRule& rule, bool* clamped = nullptr);

struct KlSmGrad {
  double d_mu = 0.0;
  double d_log_alpha = 0.0;
};

KlSmGrad kl_sm_gh_grad(double mu, double log_alpha, const ScaleMixturePrior& prior,
                       const QuadratureRule& rule);

/// Monte-Carlo oracle -H(q) - E_q[log p_sm], x ~ N(mu, alpha*mu^2).
McEstimate kl_sm_mc(double mu, double log_alpha, const ScaleMixturePrior& prior,
                    std::int64_t n_samples, std::uint64_t seed);

enum class PriorKind { LogScaleUniform, ScaleMixture };

struct PriorConfig {
  PriorKind kind = PriorKind::LogScaleUniform;
  ScaleMixturePrior sm;
};

/// One named block of variational scalars (a layer's weights or biases).
/// prior_mean is empty for zero-centered groups; kl_frozen marks groups whose
/// log_alpha is pinned near zero (normalization and softmax blocks).
struct ParamGroup {
  std::string name;
  int role = 0;  // see model.hpp ParamRole
  std::vector<double> mu;
  std::vector<double> log_alpha;
  std::vector<double> prior_mean;
  std::vector<double> g_mu;
  std::vector<double> g_log_alpha;
  std::vector<double> eps;      // per-minibatch draws
  std::vector<double> sampled;  // values used by the current forward pass
  bool kl_frozen = false;

  std::size_t size() const { return mu.size(); }
  double prior_mean_at(std::size_t i) const { return prior_mean.empty() ? 0.0 : prior_mean[i]; }
  void zero_grad();
  void alloc();
};

/// Sum of per-parameter KL terms over all groups, fixed iteration order.
/// Scale-mixture groups are evaluated at the prior-mean-shifted posterior.
double total_kl(const std::vector<ParamGroup>& groups, const PriorConfig& prior,
                const QuadratureRule& rule);

/// Adds coef * d(total_kl)/d(mu, log_alpha) into the gradient stores.
/// Groups with kl_frozen contribute value but no log_alpha gradient.
void total_kl_backward(std::vector<ParamGroup>& groups, const PriorConfig& prior,
                       const QuadratureRule& rule, double coef);

/// One fused pass: returns total_kl and accumulates coef-scaled gradients.
/// Parallel over parameters with a fixed-order final reduction.
double total_kl_accumulate(std::vector<ParamGroup>& groups, const PriorConfig& prior,
                           const QuadratureRule& rule, double coef);

}  // namespace parznet
