#include "parznet/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace parznet {

namespace {

// Fixed-order dot product with four accumulator chains; the same helper is
// used by the parallel and reference kernels so results match bitwise.
inline double dot4(const double* a, const double* b, int n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  int j = 0;
  for (; j + 3 < n; j += 4) {
    a0 += a[j] * b[j];
    a1 += a[j + 1] * b[j + 1];
    a2 += a[j + 2] * b[j + 2];
    a3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) a0 += a[j] * b[j];
  return (a0 + a1) + (a2 + a3);
}

inline void axpy(double alpha, const double* x, double* y, int n) {
  for (int j = 0; j < n; ++j) y[j] += alpha * x[j];
}

int pad_of(int kernel, PadMode pad) { return pad == PadMode::Same ? (kernel - 1) / 2 : 0; }

// Padded copy of the input when needed; valid mode aliases the original.
struct PaddedInput {
  Tensor storage;
  const Tensor* view = nullptr;
  const Tensor& get() const { return *view; }
};

PaddedInput make_padded(const Tensor& in, int pad) {
  PaddedInput p;
  if (pad == 0) {
    p.view = &in;
    return p;
  }
  p.storage.resize(in.n, in.c, in.t + 2 * pad);
  for (int s = 0; s < in.n; ++s)
    for (int ch = 0; ch < in.c; ++ch) {
      const double* src = in.row(s, ch);
      double* dst = p.storage.row(s, ch) + pad;
      std::copy(src, src + in.t, dst);
    }
  p.view = &p.storage;
  return p;
}

void conv1d_forward_impl(const Tensor& in, const Tensor& w, const std::vector<double>& bias,
                         int stride, PadMode pad, Tensor& out, bool parallel) {
  if (w.c != in.c) throw std::invalid_argument("conv1d: channel mismatch");
  if (stride < 1) throw std::invalid_argument("conv1d: stride must be >= 1");
  const int k = w.t;
  const int out_len = conv_out_len(in.t, k, stride, pad);
  if (out_len < 1) throw std::invalid_argument("conv1d: kernel longer than input");
  const PaddedInput pin = make_padded(in, pad_of(k, pad));
  const Tensor& x = pin.get();
  out.resize(in.n, w.n, out_len);

  const std::int64_t slices = std::int64_t(in.n) * w.n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::int64_t si = 0; si < slices; ++si) {
    const int s = int(si / w.n);
    const int oc = int(si % w.n);
    double* o = out.row(s, oc);
    std::fill(o, o + out_len, bias[oc]);
    for (int ic = 0; ic < in.c; ++ic) {
      const double* xr = x.row(s, ic);
      const double* wr = w.row(oc, ic);
      if (stride == 1) {
        for (int kk = 0; kk < k; ++kk) axpy(wr[kk], xr + kk, o, out_len);
      } else {
        for (int j = 0; j < out_len; ++j) o[j] += dot4(wr, xr + std::int64_t(j) * stride, k);
      }
    }
  }
}

void conv1d_backward_impl(const Tensor& in, const Tensor& w, const Tensor& g_out, int stride,
                          PadMode pad, Tensor* g_in, Tensor* g_w, std::vector<double>* g_bias,
                          bool parallel) {
  const int k = w.t;
  const int P = pad_of(k, pad);
  const int out_len = g_out.t;
  const PaddedInput pin = make_padded(in, P);
  const Tensor& x = pin.get();

  if (g_bias) {
    g_bias->assign(w.n, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int oc = 0; oc < w.n; ++oc) {
      double acc = 0.0;
      for (int s = 0; s < in.n; ++s) {
        const double* g = g_out.row(s, oc);
        for (int j = 0; j < out_len; ++j) acc += g[j];
      }
      (*g_bias)[oc] = acc;
    }
  }

  if (g_w) {
    g_w->resize(w.n, w.c, w.t);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int oc = 0; oc < w.n; ++oc) {
      for (int ic = 0; ic < w.c; ++ic) {
        double* gwr = g_w->row(oc, ic);
        for (int kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          for (int s = 0; s < in.n; ++s) {
            const double* g = g_out.row(s, oc);
            const double* xr = x.row(s, ic) + kk;
            if (stride == 1) {
              acc += dot4(g, xr, out_len);
            } else {
              for (int j = 0; j < out_len; ++j) acc += g[j] * xr[std::int64_t(j) * stride];
            }
          }
          gwr[kk] = acc;
        }
      }
    }
  }

  if (g_in) {
    g_in->resize(in.n, in.c, in.t);
    const std::int64_t slices = std::int64_t(in.n) * in.c;
    const int padded_len = in.t + 2 * P;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::int64_t si = 0; si < slices; ++si) {
      const int s = int(si / in.c);
      const int ic = int(si % in.c);
      std::vector<double> gp(std::size_t(padded_len), 0.0);
      for (int oc = 0; oc < w.n; ++oc) {
        const double* g = g_out.row(s, oc);
        const double* wr = w.row(oc, ic);
        for (int kk = 0; kk < k; ++kk) {
          if (stride == 1) {
            axpy(wr[kk], g, gp.data() + kk, out_len);
          } else {
            for (int j = 0; j < out_len; ++j) gp[std::int64_t(j) * stride + kk] += wr[kk] * g[j];
          }
        }
      }
      double* gi = g_in->row(s, ic);
      std::copy(gp.begin() + P, gp.begin() + P + in.t, gi);
    }
  }
}

void maxpool_forward_impl(const Tensor& in, int size, int stride, Tensor& out,
                          std::vector<int>& argmax, bool parallel) {
  if (in.t < size) throw std::invalid_argument("maxpool: input shorter than window");
  const int out_len = (in.t - size) / stride + 1;
  out.resize(in.n, in.c, out_len);
  argmax.assign(out.size(), 0);
  const std::int64_t rows = std::int64_t(in.n) * in.c;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = in.v.data() + r * in.t;
    double* o = out.v.data() + r * out_len;
    int* am = argmax.data() + r * out_len;
    for (int j = 0; j < out_len; ++j) {
      const int base = j * stride;
      int best = base;
      double bv = xr[base];
      for (int u = 1; u < size; ++u)
        if (xr[base + u] > bv) {
          bv = xr[base + u];
          best = base + u;
        }
      o[j] = bv;
      am[j] = best;
    }
  }
}

void layernorm_forward_impl(const Tensor& in, const std::vector<double>& scale,
                            const std::vector<double>& offset, double eps, Tensor& out,
                            LayerNormCache& cache, bool parallel) {
  out.resize(in.n, in.c, in.t);
  cache.mean.assign(in.n, 0.0);
  cache.inv_std.assign(in.n, 0.0);
  const std::int64_t m = std::int64_t(in.c) * in.t;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int s = 0; s < in.n; ++s) {
    const double* xr = in.v.data() + std::int64_t(s) * m;
    double sum = 0.0;
    for (std::int64_t i = 0; i < m; ++i) sum += xr[i];
    const double mean = sum / double(m);
    double ss = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double d = xr[i] - mean;
      ss += d * d;
    }
    const double inv = 1.0 / std::sqrt(ss / double(m) + eps);
    cache.mean[s] = mean;
    cache.inv_std[s] = inv;
    double* o = out.v.data() + std::int64_t(s) * m;
    for (int ch = 0; ch < in.c; ++ch) {
      const double g = scale[ch], b = offset[ch];
      for (int j = 0; j < in.t; ++j) {
        const std::int64_t i = std::int64_t(ch) * in.t + j;
        o[i] = (xr[i] - mean) * inv * g + b;
      }
    }
  }
}

void dense_forward_impl(const Tensor& in, const std::vector<double>& w,
                        const std::vector<double>& bias, int out_dim, Tensor& out,
                        bool parallel) {
  const int in_dim = int(in.per_sample());
  if (w.size() != std::size_t(out_dim) * in_dim) throw std::invalid_argument("dense: shape mismatch");
  out.resize(in.n, out_dim, 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int s = 0; s < in.n; ++s) {
    const double* xr = in.v.data() + std::size_t(s) * in_dim;
    double* o = out.v.data() + std::size_t(s) * out_dim;
    for (int od = 0; od < out_dim; ++od)
      o[od] = bias[od] + dot4(w.data() + std::size_t(od) * in_dim, xr, in_dim);
  }
}

}  // namespace

int conv_out_len(int in_len, int kernel, int stride, PadMode pad) {
  const int padded = in_len + 2 * pad_of(kernel, pad);
  return (padded - kernel) / stride + 1;
}

void conv1d_forward(const Tensor& in, const Tensor& w, const std::vector<double>& bias, int stride,
                    PadMode pad, Tensor& out) {
  conv1d_forward_impl(in, w, bias, stride, pad, out, true);
}

void conv1d_backward(const Tensor& in, const Tensor& w, const Tensor& g_out, int stride,
                     PadMode pad, Tensor* g_in, Tensor* g_w, std::vector<double>* g_bias) {
  conv1d_backward_impl(in, w, g_out, stride, pad, g_in, g_w, g_bias, true);
}

void maxpool_forward(const Tensor& in, int size, int stride, Tensor& out,
                     std::vector<int>& argmax) {
  maxpool_forward_impl(in, size, stride, out, argmax, true);
}

void maxpool_backward(const std::vector<int>& argmax, const Tensor& g_out, Tensor& g_in) {
  g_in.zero();
  const std::int64_t rows = std::int64_t(g_out.n) * g_out.c;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* g = g_out.v.data() + r * g_out.t;
    const int* am = argmax.data() + r * g_out.t;
    double* gi = g_in.v.data() + r * g_in.t;
    for (int j = 0; j < g_out.t; ++j) gi[am[j]] += g[j];
  }
}

void relu_forward(const Tensor& in, Tensor& out) {
  out.resize(in.n, in.c, in.t);
  const std::int64_t total = std::int64_t(in.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t i = 0; i < total; ++i) out.v[i] = in.v[i] > 0.0 ? in.v[i] : 0.0;
}

void relu_backward(const Tensor& out, const Tensor& g_out, Tensor& g_in) {
  g_in.resize(out.n, out.c, out.t);
  const std::int64_t total = std::int64_t(out.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t i = 0; i < total; ++i) g_in.v[i] = out.v[i] > 0.0 ? g_out.v[i] : 0.0;
}

void layernorm_forward(const Tensor& in, const std::vector<double>& scale,
                       const std::vector<double>& offset, double eps, Tensor& out,
                       LayerNormCache& cache) {
  layernorm_forward_impl(in, scale, offset, eps, out, cache, true);
}

void layernorm_backward(const Tensor& in, const std::vector<double>& scale,
                        const LayerNormCache& cache, const Tensor& g_out, Tensor& g_in,
                        std::vector<double>* g_scale, std::vector<double>* g_offset) {
  const std::int64_t m = std::int64_t(in.c) * in.t;
  g_in.resize(in.n, in.c, in.t);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int s = 0; s < in.n; ++s) {
    const double* xr = in.v.data() + std::int64_t(s) * m;
    const double* g = g_out.v.data() + std::int64_t(s) * m;
    double* gi = g_in.v.data() + std::int64_t(s) * m;
    const double mean = cache.mean[s], inv = cache.inv_std[s];
    // gh = g * scale onto the normalized coordinates
    double sum_gh = 0.0, sum_ghx = 0.0;
    for (int ch = 0; ch < in.c; ++ch) {
      const double sc = scale[ch];
      for (int j = 0; j < in.t; ++j) {
        const std::int64_t i = std::int64_t(ch) * in.t + j;
        const double xh = (xr[i] - mean) * inv;
        const double gh = g[i] * sc;
        sum_gh += gh;
        sum_ghx += gh * xh;
      }
    }
    const double inv_m = 1.0 / double(m);
    for (int ch = 0; ch < in.c; ++ch) {
      const double sc = scale[ch];
      for (int j = 0; j < in.t; ++j) {
        const std::int64_t i = std::int64_t(ch) * in.t + j;
        const double xh = (xr[i] - mean) * inv;
        const double gh = g[i] * sc;
        gi[i] = inv * (gh - inv_m * sum_gh - xh * inv_m * sum_ghx);
      }
    }
  }
  if (g_scale) {
    g_scale->assign(in.c, 0.0);
    g_offset->assign(in.c, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int ch = 0; ch < in.c; ++ch) {
      double as = 0.0, ao = 0.0;
      for (int s = 0; s < in.n; ++s) {
        const double* xr = in.row(s, ch);
        const double* g = g_out.row(s, ch);
        const double mean = cache.mean[s], inv = cache.inv_std[s];
        for (int j = 0; j < in.t; ++j) {
          as += g[j] * (xr[j] - mean) * inv;
          ao += g[j];
        }
      }
      (*g_scale)[ch] = as;
      (*g_offset)[ch] = ao;
    }
  }
}

void dense_forward(const Tensor& in, const std::vector<double>& w, const std::vector<double>& bias,
                   int out_dim, Tensor& out) {
  dense_forward_impl(in, w, bias, out_dim, out, true);
}

void dense_backward(const Tensor& in, const std::vector<double>& w, int out_dim,
                    const Tensor& g_out, Tensor* g_in, std::vector<double>* g_w,
                    std::vector<double>* g_bias) {
  const int in_dim = int(in.per_sample());
  if (g_in) {
    g_in->resize(in.n, in.c, in.t);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int s = 0; s < in.n; ++s) {
      double* gi = g_in->v.data() + std::size_t(s) * in_dim;
      const double* g = g_out.v.data() + std::size_t(s) * out_dim;
      for (int od = 0; od < out_dim; ++od) axpy(g[od], w.data() + std::size_t(od) * in_dim, gi, in_dim);
    }
  }
  if (g_w) {
    g_w->assign(std::size_t(out_dim) * in_dim, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int od = 0; od < out_dim; ++od) {
      double* gw = g_w->data() + std::size_t(od) * in_dim;
      for (int s = 0; s < in.n; ++s)
        axpy(g_out.v[std::size_t(s) * out_dim + od], in.v.data() + std::size_t(s) * in_dim, gw, in_dim);
    }
  }
  if (g_bias) {
    g_bias->assign(out_dim, 0.0);
    for (int s = 0; s < in.n; ++s)
      for (int od = 0; od < out_dim; ++od) (*g_bias)[od] += g_out.v[std::size_t(s) * out_dim + od];
  }
}

double softmax_xent_forward(const Tensor& logits, const std::vector<int>& labels, double kappa,
                            Tensor& probs, std::vector<double>& losses) {
  if (kappa < 0.0 || kappa > 0.1) throw std::invalid_argument("softmax_xent: kappa out of range");
  const int K = logits.c;
  for (int s = 0; s < logits.n; ++s)
    if (labels[s] < 0 || labels[s] >= K)
      throw std::invalid_argument("softmax_xent: label out of range");
  probs.resize(logits.n, K, 1);
  losses.assign(logits.n, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int s = 0; s < logits.n; ++s) {
    const double* z = logits.v.data() + std::size_t(s) * K;
    double* p = probs.v.data() + std::size_t(s) * K;
    double zmax = z[0];
    for (int j = 1; j < K; ++j) zmax = std::max(zmax, z[j]);
    double denom = 0.0;
    for (int j = 0; j < K; ++j) {
      p[j] = std::exp(z[j] - zmax);
      denom += p[j];
    }
    for (int j = 0; j < K; ++j) p[j] /= denom;
    losses[s] = -std::log((1.0 - 2.0 * kappa) * p[labels[s]] + kappa);
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total;
}

void softmax_xent_backward(const Tensor& probs, const std::vector<int>& labels, double kappa,
                           double loss_scale, Tensor& g_logits) {
  const int K = probs.c;
  g_logits.resize(probs.n, K, 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int s = 0; s < probs.n; ++s) {
    const double* p = probs.v.data() + std::size_t(s) * K;
    double* g = g_logits.v.data() + std::size_t(s) * K;
    const int y = labels[s];
    const double jp = (1.0 - 2.0 * kappa) * p[y] + kappa;
    const double coef = -loss_scale * (1.0 - 2.0 * kappa) * p[y] / jp;
    for (int j = 0; j < K; ++j) g[j] = coef * ((j == y ? 1.0 : 0.0) - p[j]);
  }
}

namespace ref {

void conv1d_forward(const Tensor& in, const Tensor& w, const std::vector<double>& bias, int stride,
                    PadMode pad, Tensor& out) {
  conv1d_forward_impl(in, w, bias, stride, pad, out, false);
}

void conv1d_backward(const Tensor& in, const Tensor& w, const Tensor& g_out, int stride,
                     PadMode pad, Tensor* g_in, Tensor* g_w, std::vector<double>* g_bias) {
  conv1d_backward_impl(in, w, g_out, stride, pad, g_in, g_w, g_bias, false);
}

void maxpool_forward(const Tensor& in, int size, int stride, Tensor& out,
                     std::vector<int>& argmax) {
  maxpool_forward_impl(in, size, stride, out, argmax, false);
}

void dense_forward(const Tensor& in, const std::vector<double>& w, const std::vector<double>& bias,
                   int out_dim, Tensor& out) {
  dense_forward_impl(in, w, bias, out_dim, out, false);
}

void layernorm_forward(const Tensor& in, const std::vector<double>& scale,
                       const std::vector<double>& offset, double eps, Tensor& out,
                       LayerNormCache& cache) {
  layernorm_forward_impl(in, scale, offset, eps, out, cache, false);
}

}  // namespace ref

}  // namespace parznet
