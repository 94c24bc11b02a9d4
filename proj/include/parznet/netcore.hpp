#pragma once

#include <vector>

#include "parznet/tensor.hpp"

namespace parznet {

enum class PadMode { Valid, Same };

/// Output length of a 1-d convolution. Same-padding keeps the input length
/// (stride 1) by padding (k-1)/2 zeros on each side; kernels are odd-length.
int conv_out_len(int in_len, int kernel, int stride, PadMode pad);

// Kernels are OpenMP-parallel over independent output slices; every reduced
// sum runs in a fixed order so results are bitwise identical for any thread
// count. The parznet::ref versions are the serial reference used by tests
// and the kernel benchmark.

/// Cross-correlation (no kernel flip): out[s,oc,j] = bias[oc] +
/// sum_{ic,k} w[oc,ic,k] * in[s,ic,j*stride+k], weights shaped (oc, ic, k).
void conv1d_forward(const Tensor& in, const Tensor& w, const std::vector<double>& bias,
                    int stride, PadMode pad, Tensor& out);

/// Gradients of conv1d_forward; any of g_in/g_w/g_bias may be null to skip.
void conv1d_backward(const Tensor& in, const Tensor& w, const Tensor& g_out, int stride,
                     PadMode pad, Tensor* g_in, Tensor* g_w, std::vector<double>* g_bias);

/// Per-window maximum; ties resolve to the lowest index. argmax stores the
/// chosen input offset along the time axis for each output element.
void maxpool_forward(const Tensor& in, int size, int stride, Tensor& out,
                     std::vector<int>& argmax);

void maxpool_backward(const std::vector<int>& argmax, const Tensor& g_out, Tensor& g_in);

void relu_forward(const Tensor& in, Tensor& out);

/// Backward from the cached forward output; the subgradient at 0 is 0.
void relu_backward(const Tensor& out, const Tensor& g_out, Tensor& g_in);

struct LayerNormCache {
  std::vector<double> mean;     // per sample
  std::vector<double> inv_std;  // per sample, 1/sqrt(var + eps)
};

/// Normalizes each sample jointly over its (channels x length) elements and
/// applies a per-channel affine map.
void layernorm_forward(const Tensor& in, const std::vector<double>& scale,
                       const std::vector<double>& offset, double eps, Tensor& out,
                       LayerNormCache& cache);

void layernorm_backward(const Tensor& in, const std::vector<double>& scale,
                        const LayerNormCache& cache, const Tensor& g_out, Tensor& g_in,
                        std::vector<double>* g_scale, std::vector<double>* g_offset);

/// Affine map of the flattened per-sample input; w is (out_dim, in_dim)
/// row-major, output shape (n, out_dim, 1).
void dense_forward(const Tensor& in, const std::vector<double>& w, const std::vector<double>& bias,
                   int out_dim, Tensor& out);

void dense_backward(const Tensor& in, const std::vector<double>& w, int out_dim,
                    const Tensor& g_out, Tensor* g_in, std::vector<double>* g_w,
                    std::vector<double>* g_bias);

/// Numerically stable softmax plus the jittered cross-entropy
/// loss = -log((1-2*kappa) * p_label + kappa). Returns the summed loss and
/// fills per-sample probabilities and losses.
double softmax_xent_forward(const Tensor& logits, const std::vector<int>& labels, double kappa,
                            Tensor& probs, std::vector<double>& losses);

/// Exact gradient of the jittered loss w.r.t. logits, scaled by loss_scale.
void softmax_xent_backward(const Tensor& probs, const std::vector<int>& labels, double kappa,
                           double loss_scale, Tensor& g_logits);

namespace ref {
// Serial reference kernels (identical arithmetic order, no OpenMP).
void conv1d_forward(const Tensor& in, const Tensor& w, const std::vector<double>& bias,
                    int stride, PadMode pad, Tensor& out);
void conv1d_backward(const Tensor& in, const Tensor& w, const Tensor& g_out, int stride,
                     PadMode pad, Tensor* g_in, Tensor* g_w, std::vector<double>* g_bias);
void maxpool_forward(const Tensor& in, int size, int stride, Tensor& out,
                     std::vector<int>& argmax);
void dense_forward(const Tensor& in, const std::vector<double>& w, const std::vector<double>& bias,
                   int out_dim, Tensor& out);
void layernorm_forward(const Tensor& in, const std::vector<double>& scale,
                       const std::vector<double>& offset, double eps, Tensor& out,
                       LayerNormCache& cache);
}  // namespace ref

}  // namespace parznet
