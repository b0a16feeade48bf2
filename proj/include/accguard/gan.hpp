#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "accguard/dataset.hpp"
#include "accguard/nn.hpp"

namespace accguard::gan {

struct GanConfig {
  int latent_dim = 64;
  int base_channels = 32;
  int model_length = 64;      // T_m, one of {32, 64, 128, 256, 512}
  double window_seconds = 2.0;
  double lr_g = 2e-3;
  double lr_d = 2e-3;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 40;
  std::uint64_t seed = 0;
  double negative_slope = 0.2;
  // Gain between the z-scored window space and the model space. The tanh
  // output lives in [-1, 1]; z-scored traffic excursions reach +-3, so the
  // model sees scaled windows and all losses are computed at this scale.
  double data_gain = 1.0 / 3.0;

  void validate() const;  // throws ConfigError
};

// Smallest supported model length >= T.
int choose_model_length(int T);

struct GanModel {
  GanConfig config;
  data::NormStats norm;
  nn::Network generator;
  nn::Network discriminator;
  // Layers [0, disc_feature_layers) of the discriminator produce the feature
  // map h(x): the activation after the last LeakyReLU before the final conv.
  std::size_t disc_feature_layers = 0;
  std::vector<std::array<double, 2>> history;  // per-epoch (loss_d, loss_g)
};

// Architecture: the generator projects z (as a length-1 sequence) to
// (8*base, T/8) with a transposed conv, then three stride-2 transposed-conv
// blocks halve channels and double length down to the 3-channel output, with
// batchnorm + LeakyReLU between and tanh at the end. The discriminator
// mirrors it with stride-2 convs (batchnorm on blocks 2-3) and collapses to
// one sigmoid probability.
GanModel build_model(const GanConfig& config, const data::NormStats& norm);

// z-score, resample to model_length, and apply the model's data gain: the
// exact input space of both networks for training, calibration, and scoring.
nn::Batch model_input(const GanModel& model, std::span<const data::Window> windows);

nn::Batch make_latent(std::size_t n, int latent_dim, RngStream& rng);

// batch of z (n, latent_dim, 1) -> samples (n, 3, T).
nn::Batch generator_forward(GanModel& model, const nn::Batch& z, nn::Mode mode,
                            std::vector<nn::LayerCache>* caches = nullptr);
nn::Batch generator_forward_eval(const GanModel& model, const nn::Batch& z,
                                 std::vector<nn::LayerCache>* caches = nullptr);

struct DiscOutput {
  std::vector<double> prob;  // one probability per sample
  nn::Batch features;        // penultimate feature map h(x)
};
DiscOutput discriminator_forward(GanModel& model, const nn::Batch& x, nn::Mode mode);
nn::Batch discriminator_features(const GanModel& model, const nn::Batch& x,
                                 std::vector<nn::LayerCache>* caches = nullptr);

// Alternating SGD: per batch one discriminator step (real -> 1, G(z) -> 0)
// and one generator step on the non-saturating objective (BCE target 1 on
// generated samples). Deterministic for a fixed seed.
GanModel train_gan(const std::vector<data::Window>& train_windows, const data::NormStats& norm,
                   const GanConfig& config);

// Checkpoint: magic "ACCGAN01", u32 little-endian JSON header length, JSON
// header (config, layer specs, parameter table, norm stats, history), then
// a contiguous little-endian f32 parameter blob.
void save_checkpoint(const std::filesystem::path& path, const GanModel& model);
GanModel load_checkpoint(const std::filesystem::path& path);

// FNV-1a 64 over the file bytes, as 16 hex digits.
std::string file_checksum_hex(const std::filesystem::path& path);

}  // namespace accguard::gan
