#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "accguard/gan.hpp"

namespace accguard::det {

struct DetectorConfig {
  double lambda_weight = 0.1;  // weight of the discrimination loss
  int inversion_steps = 100;   // gamma_max
  double inversion_lr = 0.01;
  int restarts = 3;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Sum of absolute element-wise differences.
double residual_loss(const nn::Batch& x, const nn::Batch& x_hat);

// Sum of absolute differences between discriminator feature maps (eval mode).
double discrimination_loss(const gan::GanModel& model, const nn::Batch& x,
                           const nn::Batch& x_hat);

struct InversionResult {
  std::vector<double> z;
  nn::Batch reconstruction;
  double loss = 0.0;  // (1 - lambda) * L_R + lambda * L_D at z
};

// Gradient descent on z only (generator and discriminator frozen, batchnorm
// on running stats), with step halving on loss increase (max 5 halvings per
// step) so the loss never goes up. Best of `restarts` seeded starts; NaN
// restarts are discarded, all-NaN raises NumericError.
InversionResult invert_latent(const gan::GanModel& model, const nn::Batch& x_norm,
                              const DetectorConfig& config, std::uint64_t stream_salt);

// Score of a raw window: normalization and resampling applied internally
// from the model's stored stats, then the best inversion loss. Deterministic
// in (config.seed, window_index) regardless of scheduling.
double anomaly_score(const gan::GanModel& model, const data::Window& raw,
                     const DetectorConfig& config, std::uint64_t window_index);

std::vector<double> score_windows(const gan::GanModel& model,
                                  std::span<const data::Window> windows,
                                  const DetectorConfig& config, int jobs);

struct Threshold {
  double value = 0.0;
  double percentile = 90.0;
  std::size_t n_validation = 0;
  double lambda = 0.1;
  int gamma_max = 100;
  int restarts = 3;
  std::string model_checksum;
  double score_min = 0.0, score_median = 0.0, score_max = 0.0;
};

// Nearest-rank percentile (rank ceil(p/100 * n), 1-indexed on the ascending
// sort) of the validation scores. Validation windows must all be normal.
Threshold calibrate_threshold(const gan::GanModel& model,
                              std::span<const data::Window> validation, double percentile,
                              const DetectorConfig& config, int jobs);

double nearest_rank_percentile(std::vector<double> values, double percentile);

// 1 (attacked) iff score > threshold; equality stays normal.
int classify(double score, double threshold);

std::string threshold_to_json(const Threshold& t);
Threshold threshold_from_json(const std::string& text);

}  // namespace accguard::det
