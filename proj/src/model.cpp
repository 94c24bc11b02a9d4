#include "parznet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "parznet/common.hpp"
#include "parznet/rng.hpp"

namespace parznet {

namespace {
constexpr char kCkptMagic[4] = {'P', 'Z', 'N', 'M'};
constexpr std::uint32_t kCkptVersion = 1;

double u64_to_double(std::uint64_t u) {
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

std::uint64_t double_to_u64(double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  return u;
}
}  // namespace

void ModelConfig::validate() const {
  if (input_len < 8) throw config_error("model: input_len too small");
  if (parzen_count < 2) throw config_error("model: parzen_count must be >= 2");
  if (conv_channels.empty() || conv_channels.size() % 2 != 0)
    throw config_error("model: conv_channels must list an even number of layers (paired blocks)");
  if (conv_kernel < 1 || conv_kernel % 2 == 0)
    throw config_error("model: conv_kernel must be odd");
  if (pool_size < 2) throw config_error("model: pool_size must be >= 2");
  if (mlp_hidden.empty()) throw config_error("model: mlp_hidden must not be empty");
  if (class_count < 2) throw config_error("model: class_count must be >= 2");
  if (!(dense_init_scale > 0.0 && conv_init_gain > 0.0))
    throw config_error("model: init scales must be positive");
}

ModelGraph ModelGraph::build(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelGraph m;
  m.cfg_ = cfg;
  Rng rng(seed);
  const double log_alpha_floor = std::log(kAlphaMin);

  FilterBank bank = mel_init(cfg.parzen_count, cfg.f_min, cfg.f_max, cfg.sample_rate,
                             cfg.window_kind);

  // group references stay valid across add_group calls
  m.groups_.reserve(4 + 2 * cfg.conv_channels.size() + 2 * (cfg.mlp_hidden.size() + 1));

  auto add_group = [&m](const std::string& name, ParamRole role, std::size_t count,
                        double init_la, bool frozen) -> ParamGroup& {
    ParamGroup g;
    g.name = name;
    g.role = static_cast<int>(role);
    g.mu.assign(count, 0.0);
    g.alloc();
    std::fill(g.log_alpha.begin(), g.log_alpha.end(), init_la);
    g.kl_frozen = frozen;
    m.groups_.push_back(std::move(g));
    return m.groups_.back();
  };

  const int B = cfg.parzen_count;
  auto& g_eta = add_group("parzen.eta", ParamRole::Parzen, B, cfg.init_log_alpha, false);
  auto& g_gamma = add_group("parzen.gamma", ParamRole::Parzen, B, cfg.init_log_alpha, false);
  for (int i = 0; i < B; ++i) {
    g_eta.mu[i] = bank.filters[i].eta / kEtaUnit;
    g_gamma.mu[i] = bank.filters[i].gamma / kGammaUnit;
  }
  // prior means pinned to the initial filter values
  g_eta.prior_mean = g_eta.mu;
  g_gamma.prior_mean = g_gamma.mu;

  auto& g_scale = add_group("norm.scale", ParamRole::Norm, B, log_alpha_floor, true);
  std::fill(g_scale.mu.begin(), g_scale.mu.end(), 1.0);
  add_group("norm.offset", ParamRole::Norm, B, log_alpha_floor, true);

  m.gi_conv0_ = static_cast<int>(m.groups_.size());
  int cin = B;
  for (std::size_t l = 0; l < cfg.conv_channels.size(); ++l) {
    const int cout = cfg.conv_channels[l];
    const int r = cin * cfg.conv_kernel;
    const double bound = cfg.conv_init_gain / std::sqrt(double(r));
    auto& gw = add_group("conv" + std::to_string(l) + ".weight", ParamRole::Conv,
                         std::size_t(cout) * cin * cfg.conv_kernel, cfg.init_log_alpha, false);
    for (auto& v : gw.mu) v = rng.uniform(-bound, bound);
    auto& gb = add_group("conv" + std::to_string(l) + ".bias", ParamRole::Conv, cout,
                         cfg.init_log_alpha, false);
    for (auto& v : gb.mu) v = rng.uniform(-bound, bound);
    cin = cout;
  }

  // flatten length after the conv stack
  int len = conv_out_len(cfg.input_len, bank.tap_count, 1, PadMode::Valid);
  len = (len - cfg.pool_size) / cfg.pool_size + 1;
  const int pairs = int(cfg.conv_channels.size()) / 2;
  for (int p = 0; p < pairs; ++p) {
    const PadMode pm = cfg.pair_uses_padding(p) ? PadMode::Same : PadMode::Valid;
    len = conv_out_len(len, cfg.conv_kernel, 1, pm);
    len = conv_out_len(len, cfg.conv_kernel, 1, pm);
    if (len < cfg.pool_size)
      throw config_error("model: representation collapsed before pair " + std::to_string(p));
    len = (len - cfg.pool_size) / cfg.pool_size + 1;
  }
  int in_dim = cfg.conv_channels.back() * len;

  m.gi_fc0_ = static_cast<int>(m.groups_.size());
  std::vector<int> fc_dims = cfg.mlp_hidden;
  fc_dims.push_back(cfg.class_count);
  for (std::size_t l = 0; l < fc_dims.size(); ++l) {
    const int out_dim = fc_dims[l];
    const double bound = cfg.dense_init_scale / std::sqrt(double(in_dim + out_dim));
    const bool softmax_block = (l + 1 == fc_dims.size());
    // the softmax block follows the normalization-layer treatment: alpha
    // pinned near zero, excluded from KL updates
    const double la = softmax_block ? log_alpha_floor : cfg.init_log_alpha;
    auto& gw = add_group("fc" + std::to_string(l) + ".weight", ParamRole::Dense,
                         std::size_t(out_dim) * in_dim, la, softmax_block);
    for (auto& v : gw.mu) v = rng.uniform(-bound, bound);
    add_group("fc" + std::to_string(l) + ".bias", ParamRole::Dense, out_dim, la, softmax_block);
    in_dim = out_dim;
  }

  m.conv_w_.resize(cfg.conv_channels.size());
  m.conv_b_.resize(cfg.conv_channels.size());
  m.conv_out_.resize(cfg.conv_channels.size());
  m.pool_out_.resize(pairs);
  m.pool_argmax_.resize(pairs);
  m.fc_out_.resize(fc_dims.size());
  m.clip_all();
  return m;
}

void ModelGraph::clip_all() {
  auto& eta = groups_[gi_eta_];
  for (auto& v : eta.mu) v = std::clamp(v, kEtaMinHz / kEtaUnit, kEtaMaxHz / kEtaUnit);
  auto& gamma = groups_[gi_gamma_];
  for (auto& v : gamma.mu) v = std::clamp(v, kGammaMin / kGammaUnit, kGammaMax / kGammaUnit);
  for (auto& g : groups_)
    for (auto& la : g.log_alpha) la = clip_log_alpha(la);
}

std::size_t ModelGraph::param_count() const {
  std::size_t total = 0;
  for (const auto& g : groups_) total += g.size();
  return total;
}

FilterBank ModelGraph::current_filters() const {
  FilterBank bank;
  bank.sample_rate = cfg_.sample_rate;
  bank.tap_count = static_cast<int>(std::lround(0.025 * cfg_.sample_rate)) | 1;
  const auto& eta = groups_[gi_eta_].mu;
  const auto& gamma = groups_[gi_gamma_].mu;
  bank.filters.resize(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) {
    bank.filters[i].eta = eta[i] * kEtaUnit;
    bank.filters[i].gamma = gamma[i] * kGammaUnit;
    bank.filters[i].window_kind = cfg_.window_kind;
  }
  return bank;
}

void ModelGraph::populate(ForwardMode mode, std::uint64_t sample_seed) {
  last_mode_ = mode;
  if (mode == ForwardMode::Sampled && cfg_.variational) {
    Rng rng(sample_seed);
    for (auto& g : groups_) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        g.eps[i] = rng.gaussian();
        VariationalParam vp{g.mu[i], g.log_alpha[i]};
        g.sampled[i] = sample_param(vp, g.eps[i]);
      }
    }
  } else {
    for (auto& g : groups_) {
      std::fill(g.eps.begin(), g.eps.end(), 0.0);
      g.sampled = g.mu;
    }
  }
  build_parzen_taps();
  const int K = cfg_.conv_kernel;
  int cin = cfg_.parzen_count;
  for (std::size_t l = 0; l < cfg_.conv_channels.size(); ++l) {
    const int cout = cfg_.conv_channels[l];
    auto& gw = groups_[gi_conv0_ + 2 * int(l)];
    auto& gb = groups_[gi_conv0_ + 2 * int(l) + 1];
    conv_w_[l].resize(cout, cin, K);
    conv_w_[l].v = gw.sampled;
    conv_b_[l] = gb.sampled;
    cin = cout;
  }
}

void ModelGraph::build_parzen_taps() {
  const int B = cfg_.parzen_count;
  const int L = static_cast<int>(std::lround(0.025 * cfg_.sample_rate)) | 1;
  parzen_taps_.resize(B, 1, L);
  parzen_eta_hz_.resize(B);
  parzen_gamma_.resize(B);
  const auto& eta = groups_[gi_eta_].sampled;
  const auto& gamma = groups_[gi_gamma_].sampled;
  const int half = (L - 1) / 2;
  for (int b = 0; b < B; ++b) {
    // sampled values are projected into the legal box before building taps;
    // the gradient passes straight through
    ParzenFilterParams p;
    p.eta = std::clamp(eta[b] * kEtaUnit, kEtaMinHz, kEtaMaxHz);
    p.gamma = std::clamp(gamma[b] * kGammaUnit, kGammaMin, kGammaMax);
    p.window_kind = cfg_.window_kind;
    parzen_eta_hz_[b] = p.eta;
    parzen_gamma_[b] = p.gamma;
    double* row = parzen_taps_.row(b, 0);
    for (int k = 0; k < L; ++k) row[k] = filter_value((k - half) / cfg_.sample_rate, p);
  }
}

const Tensor& ModelGraph::forward(const Tensor& batch, ForwardMode mode,
                                  std::uint64_t sample_seed) {
  if (batch.c != 1 || batch.t != cfg_.input_len)
    throw config_error("forward: batch must be (n, 1, input_len)");
  populate(mode, sample_seed);
  input_ = batch;

  Tensor conv;
  std::vector<double> no_bias(std::size_t(cfg_.parzen_count), 0.0);
  conv1d_forward(input_, parzen_taps_, no_bias, 1, PadMode::Valid, conv);
  parzen_conv_len_ = conv.t;
  maxpool_forward(conv, cfg_.pool_size, cfg_.pool_size, parzen_pooled_, parzen_argmax_);
  layernorm_forward(parzen_pooled_, groups_[gi_norm_scale_].sampled,
                    groups_[gi_norm_offset_].sampled, 1e-5, norm_out_, norm_cache_);

  const Tensor* x = &norm_out_;
  const int pairs = int(cfg_.conv_channels.size()) / 2;
  for (int p = 0; p < pairs; ++p) {
    const PadMode pm = cfg_.pair_uses_padding(p) ? PadMode::Same : PadMode::Valid;
    for (int half = 0; half < 2; ++half) {
      const int l = 2 * p + half;
      Tensor pre;
      conv1d_forward(*x, conv_w_[l], conv_b_[l], 1, pm, pre);
      relu_forward(pre, conv_out_[l]);
      x = &conv_out_[l];
    }
    maxpool_forward(*x, cfg_.pool_size, cfg_.pool_size, pool_out_[p], pool_argmax_[p]);
    x = &pool_out_[p];
  }

  const std::size_t fc_count = fc_out_.size();
  for (std::size_t l = 0; l < fc_count; ++l) {
    auto& gw = groups_[gi_fc0_ + 2 * int(l)];
    auto& gb = groups_[gi_fc0_ + 2 * int(l) + 1];
    const int out_dim = int(gb.size());
    Tensor pre;
    dense_forward(*x, gw.sampled, gb.sampled, out_dim, pre);
    if (l + 1 < fc_count) {
      relu_forward(pre, fc_out_[l]);
    } else {
      fc_out_[l] = pre;
    }
    x = &fc_out_[l];
  }
  logits_ = *x;
  forward_valid_ = true;
  return logits_;
}

void ModelGraph::backward(const Tensor& g_logits) {
  if (!forward_valid_) throw numeric_error("backward: stale forward cache");

  // reparameterization chain: dL/dmu and dL/dlog_alpha from dL/dDelta
  auto chain_into = [this](ParamGroup& g, const double* g_sampled) {
    const bool sampled_mode = last_mode_ == ForwardMode::Sampled && cfg_.variational;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gd = g_sampled[i];
      if (!sampled_mode) {
        g.g_mu[i] += gd;
        continue;
      }
      const double mu = g.mu[i];
      const double sa = std::exp(0.5 * g.log_alpha[i]);
      const bool floored = std::abs(mu) < kMuFloor;
      const double sign = mu < 0.0 ? -1.0 : 1.0;
      g.g_mu[i] += gd * (1.0 + (floored ? 0.0 : g.eps[i] * sa * sign));
      g.g_log_alpha[i] += gd * g.eps[i] * 0.5 * posterior_std(mu, g.log_alpha[i]);
    }
  };

  const std::size_t fc_count = fc_out_.size();
  Tensor grad = g_logits;
  for (int l = int(fc_count) - 1; l >= 0; --l) {
    auto& gw = groups_[gi_fc0_ + 2 * l];
    auto& gb = groups_[gi_fc0_ + 2 * l + 1];
    const int out_dim = int(gb.size());
    if (std::size_t(l) + 1 < fc_count) {
      Tensor masked;
      relu_backward(fc_out_[l], grad, masked);
      grad = std::move(masked);
    }
    const Tensor& in = (l == 0) ? pool_out_.back() : fc_out_[l - 1];
    std::vector<double> g_w, g_b;
    Tensor g_in;
    dense_backward(in, gw.sampled, out_dim, grad, &g_in, &g_w, &g_b);
    chain_into(gw, g_w.data());
    chain_into(gb, g_b.data());
    grad = std::move(g_in);
  }

  const int pairs = int(cfg_.conv_channels.size()) / 2;
  for (int p = pairs - 1; p >= 0; --p) {
    // grad carries pool_out_[p]'s shape here
    Tensor g_unpooled;
    g_unpooled.resize(conv_out_[2 * p + 1].n, conv_out_[2 * p + 1].c, conv_out_[2 * p + 1].t);
    maxpool_backward(pool_argmax_[p], grad, g_unpooled);
    grad = std::move(g_unpooled);
    const PadMode pm = cfg_.pair_uses_padding(p) ? PadMode::Same : PadMode::Valid;
    for (int half = 1; half >= 0; --half) {
      const int l = 2 * p + half;
      Tensor masked;
      relu_backward(conv_out_[l], grad, masked);
      const Tensor& in = (l == 0) ? norm_out_ : (half == 1 ? conv_out_[l - 1]
                                                           : (p == 0 ? norm_out_ : pool_out_[p - 1]));
      auto& gw = groups_[gi_conv0_ + 2 * l];
      auto& gb = groups_[gi_conv0_ + 2 * l + 1];
      Tensor g_in, g_w;
      std::vector<double> g_b;
      conv1d_backward(in, conv_w_[l], masked, 1, pm, &g_in, &g_w, &g_b);
      chain_into(gw, g_w.v.data());
      chain_into(gb, g_b.data());
      grad = std::move(g_in);
    }
  }

  Tensor g_norm_in;
  std::vector<double> g_scale, g_offset;
  layernorm_backward(parzen_pooled_, groups_[gi_norm_scale_].sampled, norm_cache_, grad,
                     g_norm_in, &g_scale, &g_offset);
  chain_into(groups_[gi_norm_scale_], g_scale.data());
  chain_into(groups_[gi_norm_offset_], g_offset.data());

  Tensor g_parzen_out;
  g_parzen_out.resize(input_.n, cfg_.parzen_count, parzen_conv_len_);
  maxpool_backward(parzen_argmax_, g_norm_in, g_parzen_out);

  Tensor g_taps;
  conv1d_backward(input_, parzen_taps_, g_parzen_out, 1, PadMode::Valid, nullptr, &g_taps,
                  nullptr);

  // taps -> (eta, gamma), evaluated at the clipped sampled values, then into
  // the internal kHz / ms^-2 units
  const int B = cfg_.parzen_count;
  const int L = parzen_taps_.t;
  const int half_tap = (L - 1) / 2;
  std::vector<double> t_grid(std::size_t(L));
  for (int k = 0; k < L; ++k) t_grid[k] = (k - half_tap) / cfg_.sample_rate;
  std::vector<double> g_eta(std::size_t(B), 0.0), g_gamma(std::size_t(B), 0.0);
  for (int b = 0; b < B; ++b) {
    ParzenFilterParams p;
    p.eta = parzen_eta_hz_[b];
    p.gamma = parzen_gamma_[b];
    p.window_kind = cfg_.window_kind;
    const FilterGrads fg = filter_param_grads(t_grid, p);
    const double* gt = g_taps.row(b, 0);
    double acc_e = 0.0, acc_g = 0.0;
    for (int k = 0; k < L; ++k) {
      acc_e += gt[k] * fg.d_eta[k];
      acc_g += gt[k] * fg.d_gamma[k];
    }
    g_eta[b] = acc_e * kEtaUnit;
    g_gamma[b] = acc_g * kGammaUnit;
  }
  chain_into(groups_[gi_eta_], g_eta.data());
  chain_into(groups_[gi_gamma_], g_gamma.data());
}

void ModelGraph::zero_grad() {
  for (auto& g : groups_) g.zero_grad();
}

std::vector<ShiftStabilityRow> ModelGraph::shift_stability(
    const std::vector<const float*>& frames, int frame_len, int max_shift, int batch_size) {
  if (frame_len != cfg_.input_len) throw config_error("shift_stability: frame length mismatch");
  const int n = int(frames.size());
  const int K = cfg_.class_count;

  std::vector<double> base_logits(std::size_t(n) * K);
  std::vector<int> base_argmax(n);
  std::vector<double> base_norm(n);

  auto run = [&](int shift, std::vector<double>* out_logits) {
    for (int lo = 0; lo < n; lo += batch_size) {
      const int m = std::min(batch_size, n - lo);
      Tensor batch(m, 1, frame_len);
      for (int i = 0; i < m; ++i) {
        double* dst = batch.row(i, 0);
        const float* src = frames[lo + i];
        for (int k = 0; k < frame_len; ++k) {
          int j = (k - shift) % frame_len;
          if (j < 0) j += frame_len;
          dst[k] = src[j];
        }
      }
      const Tensor& z = forward(batch, ForwardMode::Mean);
      std::copy(z.v.begin(), z.v.end(), out_logits->begin() + std::size_t(lo) * K);
    }
  };

  run(0, &base_logits);
  for (int i = 0; i < n; ++i) {
    const double* z = base_logits.data() + std::size_t(i) * K;
    base_argmax[i] = int(std::max_element(z, z + K) - z);
    double s = 0.0;
    for (int j = 0; j < K; ++j) s += z[j] * z[j];
    base_norm[i] = std::sqrt(s);
  }

  std::vector<ShiftStabilityRow> rows;
  std::vector<double> logits(std::size_t(n) * K);
  for (int shift = -max_shift; shift <= max_shift; ++shift) {
    ShiftStabilityRow row;
    row.shift = shift;
    if (shift == 0) {
      row.mean_rel_change = 0.0;
      row.argmax_stable_frac = 1.0;
      rows.push_back(row);
      continue;
    }
    run(shift, &logits);
    double rel = 0.0;
    int stable = 0;
    for (int i = 0; i < n; ++i) {
      const double* z = logits.data() + std::size_t(i) * K;
      const double* z0 = base_logits.data() + std::size_t(i) * K;
      double d = 0.0;
      for (int j = 0; j < K; ++j) d += (z[j] - z0[j]) * (z[j] - z0[j]);
      rel += std::sqrt(d) / (base_norm[i] > 0.0 ? base_norm[i] : 1.0);
      const int am = int(std::max_element(z, z + K) - z);
      if (am == base_argmax[i]) ++stable;
    }
    row.mean_rel_change = rel / n;
    row.argmax_stable_frac = double(stable) / n;
    rows.push_back(row);
  }
  return rows;
}

void ModelGraph::save_checkpoint(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw config_error("save_checkpoint: cannot open " + tmp);

  auto put_u32 = [f](std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)v, (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 24)};
    std::fwrite(b, 1, 4, f);
  };
  auto put_u64 = [f](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
    std::fwrite(b, 1, 8, f);
  };
  auto put_f64 = [&](double d) { put_u64(double_to_u64(d)); };
  auto put_str = [&](const std::string& s) {
    put_u32(std::uint32_t(s.size()));
    std::fwrite(s.data(), 1, s.size(), f);
  };

  std::fwrite(kCkptMagic, 1, 4, f);
  put_u32(kCkptVersion);
  // config block
  put_u32(std::uint32_t(cfg_.input_len));
  put_u32(std::uint32_t(cfg_.parzen_count));
  put_f64(cfg_.sample_rate);
  put_f64(cfg_.f_min);
  put_f64(cfg_.f_max);
  put_u32(std::uint32_t(cfg_.conv_channels.size()));
  for (int c : cfg_.conv_channels) put_u32(std::uint32_t(c));
  put_u32(std::uint32_t(cfg_.conv_kernel));
  put_u32(std::uint32_t(cfg_.pool_size));
  put_u32(std::uint32_t(cfg_.mlp_hidden.size()));
  for (int h : cfg_.mlp_hidden) put_u32(std::uint32_t(h));
  put_u32(std::uint32_t(cfg_.class_count));
  put_u32(cfg_.variational ? 1u : 0u);
  put_u32(cfg_.window_kind == WindowKind::Gaussian ? 1u : 0u);
  put_f64(cfg_.init_log_alpha);
  put_f64(cfg_.dense_init_scale);
  put_f64(cfg_.conv_init_gain);

  // manifest: per group name, role, flags, count, offset into the data area
  put_u32(std::uint32_t(groups_.size()));
  std::uint64_t offset = 0;
  for (const auto& g : groups_) {
    put_str(g.name);
    put_u32(std::uint32_t(g.role));
    put_u32(g.kl_frozen ? 1u : 0u);
    put_u32(g.prior_mean.empty() ? 0u : 1u);
    put_u64(g.size());
    put_u64(offset);
    offset += std::uint64_t(g.size()) * 8u * (g.prior_mean.empty() ? 2u : 3u);
  }
  for (const auto& g : groups_) {
    for (double v : g.mu) put_f64(v);
    for (double v : g.log_alpha) put_f64(v);
    for (double v : g.prior_mean) put_f64(v);
  }
  if (std::fclose(f) != 0) throw config_error("save_checkpoint: close failed");
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw config_error("save_checkpoint: rename failed for " + path);
}

ModelGraph ModelGraph::load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw parse_error(0, "load_checkpoint: cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  const long fsize = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<unsigned char> buf(std::size_t(std::max(0L, fsize)));
  if (!buf.empty() && std::fread(buf.data(), 1, buf.size(), f) != buf.size()) {
    std::fclose(f);
    throw parse_error(0, "load_checkpoint: short read");
  }
  std::fclose(f);

  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (off + n > buf.size()) throw parse_error(off, "load_checkpoint: truncated file");
  };
  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v = std::uint32_t(buf[off]) | (std::uint32_t(buf[off + 1]) << 8) |
                      (std::uint32_t(buf[off + 2]) << 16) | (std::uint32_t(buf[off + 3]) << 24);
    off += 4;
    return v;
  };
  auto get_u64 = [&]() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[off + i]) << (8 * i);
    off += 8;
    return v;
  };
  auto get_f64 = [&]() { return u64_to_double(get_u64()); };
  auto get_str = [&]() {
    const std::uint32_t n = get_u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + off), n);
    off += n;
    return s;
  };

  need(4);
  if (std::memcmp(buf.data(), kCkptMagic, 4) != 0) throw parse_error(0, "load_checkpoint: bad magic");
  off = 4;
  if (get_u32() != kCkptVersion) throw parse_error(4, "load_checkpoint: unsupported version");

  ModelConfig cfg;
  cfg.input_len = int(get_u32());
  cfg.parzen_count = int(get_u32());
  cfg.sample_rate = get_f64();
  cfg.f_min = get_f64();
  cfg.f_max = get_f64();
  cfg.conv_channels.resize(get_u32());
  for (auto& c : cfg.conv_channels) c = int(get_u32());
  cfg.conv_kernel = int(get_u32());
  cfg.pool_size = int(get_u32());
  cfg.mlp_hidden.resize(get_u32());
  for (auto& h : cfg.mlp_hidden) h = int(get_u32());
  cfg.class_count = int(get_u32());
  cfg.variational = get_u32() != 0;
  cfg.window_kind = get_u32() != 0 ? WindowKind::Gaussian : WindowKind::SquaredEpanechnikov;
  cfg.init_log_alpha = get_f64();
  cfg.dense_init_scale = get_f64();
  cfg.conv_init_gain = get_f64();

  ModelGraph m = build(cfg, 0);
  const std::uint32_t group_count = get_u32();
  if (group_count != m.groups_.size())
    throw parse_error(off, "load_checkpoint: group count mismatch");
  struct Entry {
    bool has_prior;
    std::uint64_t count;
  };
  std::vector<Entry> entries(group_count);
  for (std::uint32_t i = 0; i < group_count; ++i) {
    const std::string name = get_str();
    if (name != m.groups_[i].name) throw parse_error(off, "load_checkpoint: group name mismatch");
    (void)get_u32();  // role, implied by the rebuilt graph
    (void)get_u32();  // kl_frozen
    entries[i].has_prior = get_u32() != 0;
    entries[i].count = get_u64();
    (void)get_u64();  // offset, implied by sequential layout
    if (entries[i].count != m.groups_[i].size())
      throw parse_error(off, "load_checkpoint: parameter count mismatch in " + name);
  }
  for (std::uint32_t i = 0; i < group_count; ++i) {
    auto& g = m.groups_[i];
    for (auto& v : g.mu) v = get_f64();
    for (auto& v : g.log_alpha) v = get_f64();
    if (entries[i].has_prior) {
      g.prior_mean.resize(g.size());
      for (auto& v : g.prior_mean) v = get_f64();
    } else {
      g.prior_mean.clear();
    }
  }
  return m;
}

}  // namespace parznet
