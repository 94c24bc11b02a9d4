#include "parznet/variational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "parznet/common.hpp"
#include "parznet/rng.hpp"

namespace parznet {

namespace {
constexpr double kLogAbsFloor = 1e-300;  // measure-zero node on the singularity
constexpr double kInvSqrtPi = 0.564189583547756286948079451561;
constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

double mc_mean_stderr(const std::vector<double>& xs, McEstimate* out) {
  // Kahan-compensated mean, then two-pass variance.
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  const double n = static_cast<double>(xs.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    ss += d * d;
  }
  out->estimate = mean;
  out->std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return mean;
}
}  // namespace

double clip_log_alpha(double log_alpha) {
  return std::clamp(log_alpha, std::log(kAlphaMin), std::log(kAlphaMax));
}

double effective_mu(double mu) {
  const double a = std::max(std::abs(mu), kMuFloor);
  return mu < 0.0 ? -a : a;
}

double posterior_std(double mu, double log_alpha) {
  return std::exp(0.5 * log_alpha) * std::abs(effective_mu(mu));
}

double sample_param(const VariationalParam& vp, double eps) {
  return vp.mu + eps * posterior_std(vp.mu, vp.log_alpha);
}

void ScaleMixturePrior::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw config_error("scale-mixture lambda must be in [0, 1]");
  if (!(eta1 > 0.0 && eta2 > 0.0)) throw config_error("scale-mixture eta1, eta2 must be positive");
  if (!(eta1 < eta2)) throw config_error("scale-mixture requires eta1 < eta2");
}

double sm_log_density(const ScaleMixturePrior& prior, double x) {
  const double d = x - prior.xi;
  const double l1 = std::log(prior.lambda) - kLogSqrt2Pi - std::log(prior.eta1) -
                    0.5 * d * d / (prior.eta1 * prior.eta1);
  const double l2 = std::log1p(-prior.lambda) - kLogSqrt2Pi - std::log(prior.eta2) -
                    0.5 * d * d / (prior.eta2 * prior.eta2);
  if (prior.lambda <= 0.0) return l2;
  if (prior.lambda >= 1.0) return l1;
  const double m = std::max(l1, l2);
  return m + std::log(std::exp(l1 - m) + std::exp(l2 - m));
}

double sm_log_density_dx(const ScaleMixturePrior& prior, double x) {
  const double d = x - prior.xi;
  if (prior.lambda <= 0.0) return -d / (prior.eta2 * prior.eta2);
  if (prior.lambda >= 1.0) return -d / (prior.eta1 * prior.eta1);
  const double l1 = std::log(prior.lambda) - kLogSqrt2Pi - std::log(prior.eta1) -
                    0.5 * d * d / (prior.eta1 * prior.eta1);
  const double l2 = std::log1p(-prior.lambda) - kLogSqrt2Pi - std::log(prior.eta2) -
                    0.5 * d * d / (prior.eta2 * prior.eta2);
  const double m = std::max(l1, l2);
  const double e1 = std::exp(l1 - m), e2 = std::exp(l2 - m);
  const double r1 = e1 / (e1 + e2);  // narrow-component responsibility
  return r1 * (-d / (prior.eta1 * prior.eta1)) + (1.0 - r1) * (-d / (prior.eta2 * prior.eta2));
}

double kl_lsu_gh(double log_alpha, const QuadratureRule& rule) {
  const double la = clip_log_alpha(log_alpha);
  const double root2a = std::sqrt(2.0 * std::exp(la));
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = root2a * rule.nodes[i] + 1.0;
    acc += rule.weights[i] * std::log(std::max(std::abs(v), kLogAbsFloor));
  }
  return -0.5 * la + kInvSqrtPi * acc;
}

double kl_lsu_gh_grad(double log_alpha, const QuadratureRule& rule) {
  const double la = clip_log_alpha(log_alpha);
  const double alpha = std::exp(la);
  const double root2a = std::sqrt(2.0 * alpha);
  const double half_root = std::sqrt(0.5 * alpha);  // d v / d log_alpha per node
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    double v = root2a * rule.nodes[i] + 1.0;
    if (std::abs(v) < kLogAbsFloor) v = std::copysign(kLogAbsFloor, v == 0.0 ? 1.0 : v);
    acc += rule.weights[i] * (half_root * rule.nodes[i]) / v;
  }
  return -0.5 + kInvSqrtPi * acc;
}

McEstimate kl_lsu_mc(double log_alpha, std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw config_error("kl_lsu_mc: need at least 1000 samples");
  const double la = clip_log_alpha(log_alpha);
  const double sd = std::sqrt(std::exp(la));
  Rng rng(seed);
  std::vector<double> xs(static_cast<std::size_t>(n_samples));
  for (auto& x : xs) {
    const double e = 1.0 + sd * rng.gaussian();
    x = std::log(std::max(std::abs(e), kLogAbsFloor));
  }
  McEstimate mc;
  mc_mean_stderr(xs, &mc);
  mc.estimate -= 0.5 * la;
  return mc;
}

double kl_sm_gh(double mu, double log_alpha, const ScaleMixturePrior& prior,
                const QuadratureRule& rule, bool* clamped) {
  prior.validate();
  const double la = clip_log_alpha(log_alpha);
  const double alpha = std::exp(la);
  const double mu_eff = effective_mu(mu);
  if (clamped) *clamped = std::abs(mu) < kMuFloor;
  const double root2a = std::sqrt(2.0 * alpha);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = (root2a * rule.nodes[i] + 1.0) * mu_eff;
    acc += rule.weights[i] * sm_log_density(prior, v);
  }
  const double log_sigma = 0.5 * (la + std::log(mu_eff * mu_eff));
  return -(kLogSqrt2Pi + log_sigma) - kInvSqrtPi * acc - 0.5;
}

KlSmGrad kl_sm_gh_grad(double mu, double log_alpha, const ScaleMixturePrior& prior,
                       const QuadratureRule& rule) {
  prior.validate();
  const double la = clip_log_alpha(log_alpha);
  const double alpha = std::exp(la);
  const double mu_eff = effective_mu(mu);
  const double root2a = std::sqrt(2.0 * alpha);
  const double half_root = std::sqrt(0.5 * alpha);
  double acc_mu = 0.0, acc_la = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double scale = root2a * rule.nodes[i] + 1.0;
    const double v = scale * mu_eff;
    const double dlp = sm_log_density_dx(prior, v);
    acc_mu += rule.weights[i] * dlp * scale;
    acc_la += rule.weights[i] * dlp * mu_eff * half_root * rule.nodes[i];
  }
  KlSmGrad g;
  const bool floored = std::abs(mu) < kMuFloor;
  // entropy term -log|mu_eff| differentiates to -1/mu_eff; flat in the floor region
  g.d_mu = floored ? 0.0 : (-1.0 / mu_eff - kInvSqrtPi * acc_mu);
  g.d_log_alpha = -0.5 - kInvSqrtPi * acc_la;
  return g;
}

McEstimate kl_sm_mc(double mu, double log_alpha, const ScaleMixturePrior& prior,
                    std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw config_error("kl_sm_mc: need at least 1000 samples");
  prior.validate();
  const double la = clip_log_alpha(log_alpha);
  const double mu_eff = effective_mu(mu);
  const double sd = std::exp(0.5 * la) * std::abs(mu_eff);
  Rng rng(seed);
  std::vector<double> xs(static_cast<std::size_t>(n_samples));
  for (auto& x : xs) x = sm_log_density(prior, mu_eff + sd * rng.gaussian());
  McEstimate mc;
  mc_mean_stderr(xs, &mc);
  const double entropy = kLogSqrt2Pi + 0.5 * (la + std::log(mu_eff * mu_eff)) + 0.5;
  mc.estimate = -entropy - mc.estimate;
  return mc;
}

void ParamGroup::zero_grad() {
  std::fill(g_mu.begin(), g_mu.end(), 0.0);
  std::fill(g_log_alpha.begin(), g_log_alpha.end(), 0.0);
}

void ParamGroup::alloc() {
  log_alpha.resize(mu.size(), -3.0);
  g_mu.assign(mu.size(), 0.0);
  g_log_alpha.assign(mu.size(), 0.0);
  eps.assign(mu.size(), 0.0);
  sampled = mu;
}

namespace {

// Shared core for the total-KL entry points: per-parameter terms go into a
// scratch array (parallelizable), the reduction is a fixed-order sum.
double total_kl_core(std::vector<ParamGroup>& groups, const PriorConfig& prior,
                     const QuadratureRule& rule, double coef, bool want_grad) {
  double total = 0.0;
  std::vector<double> terms;
  for (auto& g : groups) {
    const std::int64_t n = std::int64_t(g.size());
    terms.assign(g.size(), 0.0);
    if (prior.kind == PriorKind::LogScaleUniform) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (std::int64_t i = 0; i < n; ++i) {
        terms[i] = kl_lsu_gh(g.log_alpha[i], rule);
        if (want_grad && !g.kl_frozen)
          g.g_log_alpha[i] += coef * kl_lsu_gh_grad(g.log_alpha[i], rule);
      }
    } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
      for (std::int64_t i = 0; i < n; ++i) {
        const double shifted = g.mu[i] - g.prior_mean_at(i);
        terms[i] = kl_sm_gh(shifted, g.log_alpha[i], prior.sm, rule);
        if (want_grad) {
          const KlSmGrad kg = kl_sm_gh_grad(shifted, g.log_alpha[i], prior.sm, rule);
          g.g_mu[i] += coef * kg.d_mu;
          if (!g.kl_frozen) g.g_log_alpha[i] += coef * kg.d_log_alpha;
        }
      }
    }
    for (double t : terms) total += t;
  }
  return total;
}

}  // namespace

double total_kl(const std::vector<ParamGroup>& groups, const PriorConfig& prior,
                const QuadratureRule& rule) {
  auto& mutable_groups = const_cast<std::vector<ParamGroup>&>(groups);
  return total_kl_core(mutable_groups, prior, rule, 0.0, false);
}

void total_kl_backward(std::vector<ParamGroup>& groups, const PriorConfig& prior,
                       const QuadratureRule& rule, double coef) {
  total_kl_core(groups, prior, rule, coef, true);
}

double total_kl_accumulate(std::vector<ParamGroup>& groups, const PriorConfig& prior,
                           const QuadratureRule& rule, double coef) {
  return total_kl_core(groups, prior, rule, coef, true);
}

}  // namespace parznet
