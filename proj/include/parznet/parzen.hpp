#pragma once

#include <utility>
#include <vector>

namespace parznet {

enum class WindowKind { SquaredEpanechnikov, Gaussian };

// Clip bounds from the training recipe: center frequency in [50, 7950] Hz,
// full support width 2/sqrt(gamma) in [1, 25] ms.
inline constexpr double kEtaMinHz = 50.0;
inline constexpr double kEtaMaxHz = 7950.0;
inline constexpr double kGammaMin = 6400.0;    // 25 ms support
inline constexpr double kGammaMax = 4.0e6;     // 1 ms support

/// Band-pass filter parameters: modulation frequency eta (Hz) and window
/// width gamma (s^-2). The filter is cos(2*pi*eta*t) * k_gamma(t).
struct ParzenFilterParams {
  double eta = 1000.0;
  double gamma = 1.0e5;
  WindowKind window_kind = WindowKind::SquaredEpanechnikov;
};

struct FilterBank {
  std::vector<ParzenFilterParams> filters;
  double sample_rate = 16000.0;
  int tap_count = 401;
};

/// Window value at time t (seconds). Squared Epanechnikov max(0, 1-g*t^2)^2
/// has compact support |t| < 1/sqrt(g); the Gaussian variant exp(-g*t^2) is
/// truncated by the tap window instead.
double window(double t, double gamma, WindowKind kind);

/// cos(2*pi*eta*t) * window(t).
double filter_value(double t, const ParzenFilterParams& p);

/// L taps sampled at t = (k - (L-1)/2) / fs; L must be odd so the result is
/// exactly even-symmetric with a center tap at t = 0.
std::vector<double> discretize(const ParzenFilterParams& p, double fs, int taps);

/// Projection onto the clip box; idempotent. Non-finite input throws.
ParzenFilterParams clip_params(const ParzenFilterParams& p);

double mel_from_hz(double f);
double hz_from_mel(double m);

/// B filters with centers equidistant on the mel scale between f_min and
/// f_max; bandwidths follow the neighbor spacing (support 2/df clamped to
/// [1, 25] ms). Requires 50 <= f_min < f_max <= 7950 and B >= 2.
FilterBank mel_init(int count, double f_min, double f_max, double fs,
                    WindowKind kind = WindowKind::SquaredEpanechnikov);

struct FreqResponse {
  std::vector<double> magnitudes;  // bins 0 .. n_fft/2
  double peak_hz = 0.0;
  bool degenerate = false;  // all-zero taps
};

/// DFT magnitude of the zero-padded taps over non-negative frequencies and
/// the peak bin converted to Hz. n_fft >= taps.size().
FreqResponse freq_response(const std::vector<double>& taps, int n_fft, double fs);

struct FilterGrads {
  std::vector<double> d_eta;
  std::vector<double> d_gamma;
};

/// Per-tap partials with respect to (eta, gamma); exactly zero outside the
/// compact support, including the boundary where the one-sided derivative
/// vanishes.
FilterGrads filter_param_grads(const std::vector<double>& t_grid, const ParzenFilterParams& p);

}  // namespace parznet
