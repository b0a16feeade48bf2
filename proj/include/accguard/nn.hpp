#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "accguard/rng.hpp"

namespace accguard::nn {

// Dense (batch, channels, length) array of 64-bit floats. All layer math is
// done in double; only checkpoints downcast to 32-bit.
struct Batch {
  std::size_t n = 0, channels = 0, length = 0;
  std::vector<double> v;

  Batch() = default;
  Batch(std::size_t n_, std::size_t c_, std::size_t len_)
      : n(n_), channels(c_), length(len_), v(n_ * c_ * len_, 0.0) {}

  double& at(std::size_t b, std::size_t c, std::size_t t) {
    return v[(b * channels + c) * length + t];
  }
  double at(std::size_t b, std::size_t c, std::size_t t) const {
    return v[(b * channels + c) * length + t];
  }
  double* sample(std::size_t b) { return v.data() + b * channels * length; }
  const double* sample(std::size_t b) const { return v.data() + b * channels * length; }
  std::size_t size() const { return v.size(); }
};

// Linear resample along the time axis (shared endpoints).
Batch resample_linear(const Batch& x, std::size_t new_length);

enum class LayerKind { Conv1d, ConvTranspose1d, BatchNorm1d, LeakyRelu, Sigmoid, Tanh };
enum class Mode { Train, Eval };

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::Conv1d;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  double negative_slope = 0.0;  // leaky_relu only
  bool bias = true;             // conv kinds only

  void validate() const;
};

// weight: conv (out,in,k); convtranspose (in,out,k); batchnorm gamma.
// bias:   conv/convtranspose per-out-channel bias; batchnorm beta.
struct LayerParams {
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> running_mean;  // batchnorm only
  std::vector<double> running_var;   // batchnorm only
  double momentum = 0.1;
  double eps = 1e-5;
};

struct LayerGrads {
  std::vector<double> weight;
  std::vector<double> bias;
};

// Forward-pass residue one backward step needs.
struct LayerCache {
  Batch input;
  Batch output;                   // activations cache their output
  std::vector<double> mean;       // batchnorm train-mode batch stats
  std::vector<double> inv_std;
  bool train_stats = false;       // whether mean/inv_std hold batch stats
};

std::size_t conv1d_out_length(const LayerSpec& spec, std::size_t len);
std::size_t convtranspose1d_out_length(const LayerSpec& spec, std::size_t len);

// Sequential stack of layers. Train-mode forward mutates batchnorm running
// statistics; eval-mode forward is const and safe to share across threads.
class Network {
 public:
  void add(const LayerSpec& spec);
  std::size_t layer_count() const { return layers_.size(); }
  const LayerSpec& spec(std::size_t i) const { return layers_[i].spec; }
  LayerParams& params(std::size_t i) { return layers_[i].params; }
  const LayerParams& params(std::size_t i) const { return layers_[i].params; }
  std::size_t param_count() const;

  // Conv weights N(0, 0.02^2); batchnorm gamma N(1, 0.02^2), beta 0.
  void init_params(RngStream& rng);

  Batch forward(const Batch& x, Mode mode, std::vector<LayerCache>* caches = nullptr);
  // Eval-only forward over layers [0, n_layers).
  Batch forward_prefix(const Batch& x, std::size_t n_layers,
                       std::vector<LayerCache>* caches = nullptr) const;
  Batch forward_eval(const Batch& x, std::vector<LayerCache>* caches = nullptr) const {
    return forward_prefix(x, layers_.size(), caches);
  }

  // Reverse-mode through layers [0, n_layers) given caches from the matching
  // forward. Returns the gradient w.r.t. the network input; fills per-layer
  // parameter gradients when grads != nullptr.
  Batch backward(const std::vector<LayerCache>& caches, const Batch& upstream,
                 std::vector<LayerGrads>* grads, std::size_t n_layers) const;
  Batch backward(const std::vector<LayerCache>& caches, const Batch& upstream,
                 std::vector<LayerGrads>* grads) const {
    return backward(caches, upstream, grads, layers_.size());
  }

  std::vector<LayerGrads> make_grads() const;

 private:
  struct Layer {
    LayerSpec spec;
    LayerParams params;
  };
  std::vector<Layer> layers_;

  Batch apply(std::size_t i, const Batch& x, Mode mode, LayerCache* cache);
  Batch apply_const(std::size_t i, const Batch& x, LayerCache* cache) const;
};

// Standalone layer ops (the Network methods dispatch to these).
Batch conv1d_forward(const Batch& x, const LayerSpec& spec, const LayerParams& p);
Batch convtranspose1d_forward(const Batch& x, const LayerSpec& spec, const LayerParams& p);
Batch batchnorm1d_forward(const Batch& x, const LayerSpec& spec, LayerParams& p, Mode mode,
                          LayerCache* cache);
Batch activation_forward(const Batch& x, const LayerSpec& spec);

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // d(mean loss)/d p_i
};

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
BceResult bce_loss(const std::vector<double>& p, const std::vector<double>& y);

// velocity <- momentum * velocity + grad; param <- param - lr * velocity.
void sgd_step(std::vector<double>& param, const std::vector<double>& grad,
              std::vector<double>& velocity, double lr, double momentum);

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::string worst;  // coordinate of the worst offender
};

// Central finite differences (h = 1e-5) against the analytic backward pass,
// per parameter and per input element, on a fixed random linear probe of the
// output. rel_err = |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(Network& net, const Batch& input, double tolerance,
                           Mode mode = Mode::Eval);

}  // namespace accguard::nn
