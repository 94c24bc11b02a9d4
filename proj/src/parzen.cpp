#include "parznet/parzen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "parznet/common.hpp"

namespace parznet {

namespace {
constexpr double kTwoPi = 6.28318530717958647692528676656;
}

double window(double t, double gamma, WindowKind kind) {
  if (kind == WindowKind::Gaussian) return std::exp(-gamma * t * t);
  const double s = 1.0 - gamma * t * t;
  return s > 0.0 ? s * s : 0.0;
}

double filter_value(double t, const ParzenFilterParams& p) {
  return std::cos(kTwoPi * p.eta * t) * window(t, p.gamma, p.window_kind);
}

std::vector<double> discretize(const ParzenFilterParams& p, double fs, int taps) {
  if (taps < 1 || taps % 2 == 0) throw std::invalid_argument("discretize: tap count must be odd");
  std::vector<double> out(static_cast<std::size_t>(taps));
  const int half = (taps - 1) / 2;
  for (int k = 0; k < taps; ++k) out[k] = filter_value((k - half) / fs, p);
  return out;
}

ParzenFilterParams clip_params(const ParzenFilterParams& p) {
  if (!std::isfinite(p.eta) || !std::isfinite(p.gamma))
    throw std::invalid_argument("clip_params: non-finite filter parameters");
  ParzenFilterParams q = p;
  q.eta = std::clamp(q.eta, kEtaMinHz, kEtaMaxHz);
  q.gamma = std::clamp(q.gamma, kGammaMin, kGammaMax);
  return q;
}

double mel_from_hz(double f) { return 1127.0 * std::log1p(f / 700.0); }
double hz_from_mel(double m) { return 700.0 * std::expm1(m / 1127.0); }

FilterBank mel_init(int count, double f_min, double f_max, double fs, WindowKind kind) {
  if (count < 2) throw config_error("mel_init: need at least 2 filters");
  if (!(f_min >= kEtaMinHz && f_min < f_max && f_max <= kEtaMaxHz))
    throw config_error("mel_init: frequency bounds must satisfy 50 <= f_min < f_max <= 7950");

  const double m0 = mel_from_hz(f_min), m1 = mel_from_hz(f_max);
  std::vector<double> centers(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    centers[i] = hz_from_mel(m0 + (m1 - m0) * i / static_cast<double>(count - 1));
  centers.front() = f_min;
  centers.back() = f_max;

  FilterBank bank;
  bank.sample_rate = fs;
  bank.tap_count = static_cast<int>(std::lround(0.025 * fs)) | 1;  // spans 25 ms, odd
  bank.filters.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // Bandwidth from the neighbor gap: support width 2/df, clamped to the
    // legal 1..25 ms range (endpoints use their single neighbor).
    double df;
    if (i == 0)
      df = centers[1] - centers[0];
    else if (i == count - 1)
      df = centers[count - 1] - centers[count - 2];
    else
      df = 0.5 * (centers[i + 1] - centers[i - 1]);
    const double width = std::clamp(2.0 / df, 0.001, 0.025);
    ParzenFilterParams p;
    p.eta = centers[i];
    p.gamma = 4.0 / (width * width);
    p.window_kind = kind;
    bank.filters[i] = clip_params(p);
  }
  return bank;
}

FreqResponse freq_response(const std::vector<double>& taps, int n_fft, double fs) {
  if (n_fft < static_cast<int>(taps.size()))
    throw std::invalid_argument("freq_response: n_fft must cover the taps");
  FreqResponse r;
  const int bins = n_fft / 2 + 1;
  r.magnitudes.assign(static_cast<std::size_t>(bins), 0.0);

  bool all_zero = true;
  for (double v : taps)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero) {
    r.degenerate = true;
    return r;
  }

  const bool pow2 = (n_fft & (n_fft - 1)) == 0;
  if (pow2) {
    // radix-2 FFT of the zero-padded taps
    std::vector<std::complex<double>> a(static_cast<std::size_t>(n_fft));
    for (std::size_t i = 0; i < taps.size(); ++i) a[i] = taps[i];
    for (int i = 1, j = 0; i < n_fft; ++i) {
      int bit = n_fft >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n_fft; len <<= 1) {
      const double ang = -kTwoPi / len;
      const std::complex<double> wl(std::cos(ang), std::sin(ang));
      for (int i = 0; i < n_fft; i += len) {
        std::complex<double> w(1.0);
        for (int j = 0; j < len / 2; ++j) {
          const std::complex<double> u = a[i + j];
          const std::complex<double> v = a[i + j + len / 2] * w;
          a[i + j] = u + v;
          a[i + j + len / 2] = u - v;
          w *= wl;
        }
      }
    }
    for (int b = 0; b < bins; ++b) r.magnitudes[b] = std::abs(a[b]);
  } else {
    for (int b = 0; b < bins; ++b) {
      double re = 0.0, im = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) {
        const double ang = -kTwoPi * b * static_cast<double>(k) / n_fft;
        re += taps[k] * std::cos(ang);
        im += taps[k] * std::sin(ang);
      }
      r.magnitudes[b] = std::hypot(re, im);
    }
  }

  int peak = 0;
  for (int b = 1; b < bins; ++b)
    if (r.magnitudes[b] > r.magnitudes[peak]) peak = b;
  r.peak_hz = peak * fs / n_fft;
  return r;
}

FilterGrads filter_param_grads(const std::vector<double>& t_grid, const ParzenFilterParams& p) {
  FilterGrads g;
  g.d_eta.resize(t_grid.size());
  g.d_gamma.resize(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const double c = std::cos(kTwoPi * p.eta * t);
    const double s = std::sin(kTwoPi * p.eta * t);
    if (p.window_kind == WindowKind::Gaussian) {
      const double w = std::exp(-p.gamma * t * t);
      g.d_eta[i] = -kTwoPi * t * s * w;
      g.d_gamma[i] = -t * t * c * w;
    } else {
      const double e = 1.0 - p.gamma * t * t;
      if (e > 0.0) {
        g.d_eta[i] = -kTwoPi * t * s * e * e;
        g.d_gamma[i] = -2.0 * t * t * c * e;
      } else {
        g.d_eta[i] = 0.0;
        g.d_gamma[i] = 0.0;
      }
    }
  }
  return g;
}

}  // namespace parznet
