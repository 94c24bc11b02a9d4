#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parznet/data.hpp"
#include "parznet/model.hpp"
#include "parznet/variational.hpp"

namespace parznet {

struct TrainConfig {
  int batch_size = 256;
  double lr_feature = 0.0008;  // Parzen/conv/norm groups, adaptive RMS steps
  double lr_fc = 0.08;         // fully connected groups, plain gradient descent
  double warmup_c = 0.2;       // rho_{t+1} = min(1, rho_t + c), rho_0 = 0
  double kappa = 1e-8;
  int max_epochs = 25;
  int patience = 3;
  double plateau_threshold = 0.001;  // relative validation-error improvement
  int quad_order = 32;
  double rms_decay = 0.9;
  double rms_eps = 1e-8;
  PriorConfig prior;
  std::uint64_t seed = 1;
  bool static_filters = false;  // freeze (eta, gamma) at initialization

  void validate() const;
};

/// rho_t = min(1, t*c).
double kl_weight(int epoch, double c);

/// Geometric per-batch importance weights pi_i = (beta-1) * beta^{-i} /
/// (1 - beta^{-M}), i = 1..M, with beta > 1 solved so the last weight equals
/// the binary32 machine epsilon. Weights sum to 1; M = 1 gives {1}.
std::vector<double> batch_kl_weights(int batches_per_epoch);

void sgd_step(std::vector<double>& param, const std::vector<double>& grad, double lr);

/// s <- decay*s + (1-decay)*g^2; param <- param - lr * g / (sqrt(s) + eps).
void adaptive_rms_step(std::vector<double>& param, const std::vector<double>& grad,
                       std::vector<double>& state, double lr, double decay, double eps);

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-batch loss at the (n/m)-sum scale
  double val_err = 0.0;
  double kl = 0.0;
  double rho = 0.0;
  double lr_feature = 0.0;
  double lr_fc = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRow> rows;
  double best_val_err = 1.0;
  int best_epoch = -1;
  bool stopped_on_patience = false;
};

/// Runs the SVI loop (or its deterministic reduction when the model is
/// non-variational): shuffled batches, warm-up- and importance-weighted KL,
/// per-group optimizers, plateau halving, degradation rollback, early stop.
/// On return the model holds the best-validation parameters.
class Trainer {
 public:
  Trainer(ModelGraph& model, TrainConfig cfg);

  struct StepResult {
    double loss = 0.0;  // (n/m)*sum(xent) + rho*pi*KL
    double kl = 0.0;
    int correct = 0;
  };

  /// One optimization step; n_total is the training-set size n in the
  /// (n/m)-sum scale. Gradients are applied at the per-example scale.
  StepResult train_step(const Tensor& batch, const std::vector<int>& labels,
                        std::int64_t n_total, double rho, double pi, std::uint64_t step_seed);

  TrainReport fit(const FrameDataset& train, const FrameDataset& validation);

  /// Mean-mode frame classification error.
  double evaluate(const FrameDataset& ds);

  double lr_feature() const { return lr_feature_; }
  double lr_fc() const { return lr_fc_; }

 private:
  void apply_optimizers();
  void snapshot(std::vector<std::vector<double>>& mu, std::vector<std::vector<double>>& la) const;
  void restore(const std::vector<std::vector<double>>& mu,
               const std::vector<std::vector<double>>& la);

  ModelGraph& model_;
  TrainConfig cfg_;
  QuadratureRule rule_;
  double lr_feature_ = 0.0;
  double lr_fc_ = 0.0;
  std::vector<std::vector<double>> rms_mu_, rms_la_;
};

/// Copies dataset records into a (m, 1, frame_len) batch at 64-bit.
void fill_batch(const FrameDataset& ds, const std::vector<std::uint32_t>& order, std::size_t lo,
                std::size_t hi, Tensor& batch, std::vector<int>& labels);

}  // namespace parznet
