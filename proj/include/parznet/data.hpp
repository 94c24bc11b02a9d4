#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace parznet {

/// Labeled raw-waveform frames; samples live in [-1, 1] and are stored as
/// binary32, computation happens at binary64.
struct FrameDataset {
  int frame_len = 0;
  int class_count = 0;
  std::vector<std::uint32_t> labels;
  std::vector<float> samples;  // n * frame_len, row-major

  std::size_t size() const { return labels.size(); }
  const float* frame(std::size_t i) const { return samples.data() + i * std::size_t(frame_len); }
  void validate() const;
};

/// Band-structured synthetic classification task: each class is a sum of
/// amplitude-modulated tones plus white noise at a target SNR.
struct SynthSpec {
  int class_count = 8;
  int tones_per_class = 1;
  std::vector<double> carriers_hz;  // class_count * tones_per_class; default 300 + 400*c
  std::vector<double> am_rates_hz;  // same shape; default 2 + c
  double snr_db = 20.0;             // +inf disables noise
  int frame_len = 3200;
  double sample_rate = 16000.0;
  int train_count = 2000;
  int val_count = 500;
  int test_count = 500;
  std::uint64_t seed = 1;

  void fill_defaults();
  void validate() const;
};

struct SynthSplits {
  FrameDataset train, validation, test;
};

SynthSplits synth_generate(const SynthSpec& spec);

// .pfd container, little-endian: magic "PZN1", u32 version = 1, u32 record
// count, u32 frame_len, u32 class_count, then per record a u32 label and
// frame_len binary32 samples.
void write_pfd(const FrameDataset& ds, const std::string& path);
FrameDataset read_pfd(const std::string& path);

/// Deterministic shuffled batch index plan for one epoch; the final short
/// batch is included.
struct BatchPlan {
  std::vector<std::uint32_t> order;
  int batch_size = 0;

  int batch_count() const {
    return int((order.size() + std::size_t(batch_size) - 1) / std::size_t(batch_size));
  }
  std::pair<std::size_t, std::size_t> batch_range(int b) const {
    const std::size_t lo = std::size_t(b) * batch_size;
    return {lo, std::min(order.size(), lo + std::size_t(batch_size))};
  }
};

BatchPlan batches(const FrameDataset& ds, int batch_size, std::uint64_t epoch_seed);

}  // namespace parznet
