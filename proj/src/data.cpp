#include "parznet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "parznet/common.hpp"
#include "parznet/rng.hpp"

namespace parznet {

namespace {
constexpr char kMagic[4] = {'P', 'Z', 'N', '1'};
constexpr std::uint32_t kVersionU32 = 1;

void put_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  std::fwrite(b, 1, 4, f);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint32_t f32_bits(float x) {
  std::uint32_t u;
  std::memcpy(&u, &x, 4);
  return u;
}

float bits_f32(std::uint32_t u) {
  float x;
  std::memcpy(&x, &u, 4);
  return x;
}
}  // namespace

void FrameDataset::validate() const {
  if (frame_len <= 0) throw config_error("dataset: frame_len must be positive");
  if (class_count <= 0) throw config_error("dataset: class_count must be positive");
  if (samples.size() != labels.size() * std::size_t(frame_len))
    throw config_error("dataset: sample buffer size mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= std::uint32_t(class_count)) throw config_error("dataset: label out of range");
}

void SynthSpec::fill_defaults() {
  const std::size_t want = std::size_t(class_count) * tones_per_class;
  if (carriers_hz.empty()) {
    carriers_hz.resize(want);
    for (int c = 0; c < class_count; ++c)
      for (int j = 0; j < tones_per_class; ++j)
        carriers_hz[std::size_t(c) * tones_per_class + j] = 300.0 + 400.0 * c + 150.0 * j;
  }
  if (am_rates_hz.empty()) {
    am_rates_hz.resize(want);
    for (int c = 0; c < class_count; ++c)
      for (int j = 0; j < tones_per_class; ++j)
        am_rates_hz[std::size_t(c) * tones_per_class + j] = 2.0 + 1.0 * c + 0.5 * j;
  }
}

void SynthSpec::validate() const {
  if (class_count < 2) throw config_error("synth: need at least 2 classes");
  if (tones_per_class < 1) throw config_error("synth: tones_per_class must be >= 1");
  if (frame_len < 8) throw config_error("synth: frame_len too small");
  if (carriers_hz.size() != std::size_t(class_count) * tones_per_class ||
      am_rates_hz.size() != carriers_hz.size())
    throw config_error("synth: carrier/AM tables must have class_count*tones_per_class entries");
  for (double f : carriers_hz)
    if (!(f > 0.0 && f < sample_rate / 2.0))
      throw config_error("synth: carriers must lie in (0, sample_rate/2)");
  if (std::isnan(snr_db)) throw config_error("synth: snr_db must not be NaN");
}

namespace {
FrameDataset synth_split(const SynthSpec& spec, int count, std::uint64_t seed) {
  FrameDataset ds;
  ds.frame_len = spec.frame_len;
  ds.class_count = spec.class_count;
  ds.labels.reserve(count);
  ds.samples.reserve(std::size_t(count) * spec.frame_len);
  Rng rng(seed);
  std::vector<double> frame(std::size_t(spec.frame_len));
  const bool noisy = std::isfinite(spec.snr_db);
  for (int i = 0; i < count; ++i) {
    const int c = i % spec.class_count;
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int j = 0; j < spec.tones_per_class; ++j) {
      const double f = spec.carriers_hz[std::size_t(c) * spec.tones_per_class + j];
      const double m = spec.am_rates_hz[std::size_t(c) * spec.tones_per_class + j];
      const double ph = rng.uniform(0.0, 6.283185307179586);
      const double ph_m = rng.uniform(0.0, 6.283185307179586);
      for (int k = 0; k < spec.frame_len; ++k) {
        const double t = k / spec.sample_rate;
        frame[k] += std::sin(6.283185307179586 * f * t + ph) *
                    (1.0 + 0.5 * std::sin(6.283185307179586 * m * t + ph_m));
      }
    }
    if (noisy) {
      double power = 0.0;
      for (double v : frame) power += v * v;
      power /= spec.frame_len;
      const double sigma = std::sqrt(power / std::pow(10.0, spec.snr_db / 10.0));
      for (double& v : frame) v += sigma * rng.gaussian();
    }
    double peak = 0.0;
    for (double v : frame) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) peak = 1.0;
    for (double v : frame) ds.samples.push_back(float(v / peak));
    ds.labels.push_back(std::uint32_t(c));
  }
  return ds;
}
}  // namespace

SynthSplits synth_generate(const SynthSpec& spec_in) {
  SynthSpec spec = spec_in;
  spec.fill_defaults();
  spec.validate();
  SynthSplits out;
  out.train = synth_split(spec, spec.train_count, Rng::derive(spec.seed, 0));
  out.validation = synth_split(spec, spec.val_count, Rng::derive(spec.seed, 1));
  out.test = synth_split(spec, spec.test_count, Rng::derive(spec.seed, 2));
  return out;
}

void write_pfd(const FrameDataset& ds, const std::string& path) {
  ds.validate();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw config_error("write_pfd: cannot open " + path);
  std::fwrite(kMagic, 1, 4, f);
  put_u32(f, kVersionU32);
  put_u32(f, std::uint32_t(ds.size()));
  put_u32(f, std::uint32_t(ds.frame_len));
  put_u32(f, std::uint32_t(ds.class_count));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    put_u32(f, ds.labels[i]);
    const float* fr = ds.frame(i);
    for (int k = 0; k < ds.frame_len; ++k) put_u32(f, f32_bits(fr[k]));
  }
  if (std::fclose(f) != 0) throw config_error("write_pfd: close failed for " + path);
}

FrameDataset read_pfd(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw parse_error(0, "read_pfd: cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  const long fsize = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<unsigned char> buf(std::size_t(std::max(0L, fsize)));
  if (!buf.empty() && std::fread(buf.data(), 1, buf.size(), f) != buf.size()) {
    std::fclose(f);
    throw parse_error(0, "read_pfd: short read");
  }
  std::fclose(f);

  if (buf.size() < 20) throw parse_error(buf.size(), "read_pfd: truncated header");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw parse_error(0, "read_pfd: bad magic");
  const std::uint32_t version = get_u32(buf.data() + 4);
  if (version != kVersionU32) throw parse_error(4, "read_pfd: unsupported version");
  const std::uint32_t count = get_u32(buf.data() + 8);
  const std::uint32_t frame_len = get_u32(buf.data() + 12);
  const std::uint32_t class_count = get_u32(buf.data() + 16);
  if (frame_len == 0) throw parse_error(12, "read_pfd: zero frame length");
  if (class_count == 0) throw parse_error(16, "read_pfd: zero class count");

  const std::size_t rec_bytes = 4u + std::size_t(frame_len) * 4u;
  const std::size_t need = 20u + std::size_t(count) * rec_bytes;
  if (buf.size() < need)
    throw parse_error(buf.size(), "read_pfd: truncated record data, expected " +
                                      std::to_string(need) + " bytes");

  FrameDataset ds;
  ds.frame_len = int(frame_len);
  ds.class_count = int(class_count);
  ds.labels.resize(count);
  ds.samples.resize(std::size_t(count) * frame_len);
  std::size_t off = 20;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t label = get_u32(buf.data() + off);
    if (label >= class_count)
      throw parse_error(off, "read_pfd: label " + std::to_string(label) + " out of range");
    ds.labels[i] = label;
    off += 4;
    for (std::uint32_t k = 0; k < frame_len; ++k) {
      ds.samples[std::size_t(i) * frame_len + k] = bits_f32(get_u32(buf.data() + off));
      off += 4;
    }
  }
  return ds;
}

BatchPlan batches(const FrameDataset& ds, int batch_size, std::uint64_t epoch_seed) {
  if (batch_size < 1) throw config_error("batches: batch_size must be positive");
  BatchPlan plan;
  plan.batch_size = batch_size;
  Rng rng(epoch_seed);
  rng.permutation(std::uint32_t(ds.size()), plan.order);
  return plan;
}

}  // namespace parznet
