#include "accguard/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "accguard/errors.hpp"

namespace accguard::nn {

namespace {

void check_finite_shape(const LayerSpec& spec, const Batch& x, const char* op) {
  if (x.n == 0 || x.channels == 0 || x.length == 0) {
    throw ShapeError(std::string(op) + ": empty batch");
  }
  if (static_cast<int>(x.channels) != spec.in_ch) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x.channels) +
                     " channels, layer expects " + std::to_string(spec.in_ch));
  }
}

}  // namespace

Batch resample_linear(const Batch& x, std::size_t new_length) {
  if (new_length == x.length) return x;
  if (new_length < 2 || x.length < 2) {
    throw ShapeError("resample_linear: lengths must be >= 2");
  }
  Batch out(x.n, x.channels, new_length);
  const double scale = static_cast<double>(x.length - 1) / static_cast<double>(new_length - 1);
  for (std::size_t b = 0; b < x.n; ++b) {
    for (std::size_t c = 0; c < x.channels; ++c) {
      for (std::size_t t = 0; t < new_length; ++t) {
        const double pos = static_cast<double>(t) * scale;
        const std::size_t lo = std::min(static_cast<std::size_t>(pos), x.length - 2);
        const double frac = pos - static_cast<double>(lo);
        out.at(b, c, t) = (1.0 - frac) * x.at(b, c, lo) + frac * x.at(b, c, lo + 1);
      }
    }
  }
  return out;
}

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::ConvTranspose1d: return "convtranspose1d";
    case LayerKind::BatchNorm1d: return "batchnorm1d";
    case LayerKind::LeakyRelu: return "leaky_relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Tanh: return "tanh";
  }
  return "conv1d";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv1d") return LayerKind::Conv1d;
  if (name == "convtranspose1d") return LayerKind::ConvTranspose1d;
  if (name == "batchnorm1d") return LayerKind::BatchNorm1d;
  if (name == "leaky_relu") return LayerKind::LeakyRelu;
  if (name == "sigmoid") return LayerKind::Sigmoid;
  if (name == "tanh") return LayerKind::Tanh;
  throw DataError("unknown layer kind: " + name);
}

void LayerSpec::validate() const {
  if (kernel < 1 || stride < 1 || padding < 0) {
    throw ShapeError("layer spec requires kernel >= 1, stride >= 1, padding >= 0");
  }
  if ((kind == LayerKind::Conv1d || kind == LayerKind::ConvTranspose1d) &&
      (in_ch < 1 || out_ch < 1)) {
    throw ShapeError("conv layer requires in_ch >= 1 and out_ch >= 1");
  }
  if (kind == LayerKind::BatchNorm1d && in_ch < 1) {
    throw ShapeError("batchnorm requires in_ch >= 1");
  }
}

std::size_t conv1d_out_length(const LayerSpec& spec, std::size_t len) {
  const long long out = (static_cast<long long>(len) + 2LL * spec.padding - spec.kernel) /
                            spec.stride +
                        1;
  if (out < 1) {
    throw ShapeError("conv1d: input length " + std::to_string(len) +
                     " too short for kernel/stride/padding");
  }
  return static_cast<std::size_t>(out);
}

std::size_t convtranspose1d_out_length(const LayerSpec& spec, std::size_t len) {
  const long long out =
      (static_cast<long long>(len) - 1) * spec.stride - 2LL * spec.padding + spec.kernel;
  if (out < 1) throw ShapeError("convtranspose1d: output length would be < 1");
  return static_cast<std::size_t>(out);
}

Batch conv1d_forward(const Batch& x, const LayerSpec& spec, const LayerParams& p) {
  check_finite_shape(spec, x, "conv1d");
  const std::size_t out_len = conv1d_out_length(spec, x.length);
  const std::size_t in_ch = static_cast<std::size_t>(spec.in_ch);
  const std::size_t out_ch = static_cast<std::size_t>(spec.out_ch);
  const std::size_t kk = static_cast<std::size_t>(spec.kernel);
  Batch y(x.n, out_ch, out_len);

  for (std::size_t b = 0; b < x.n; ++b) {
    const double* xb = x.sample(b);
    double* yb = y.sample(b);
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
      double* yrow = yb + oc * out_len;
      if (spec.bias) {
        const double bias = p.bias[oc];
        for (std::size_t t = 0; t < out_len; ++t) yrow[t] = bias;
      }
      const double* wrow = p.weight.data() + oc * in_ch * kk;
      for (std::size_t ic = 0; ic < in_ch; ++ic) {
        const double* xrow = xb + ic * x.length;
        for (std::size_t k = 0; k < kk; ++k) {
          const double w = wrow[ic * kk + k];
          if (w == 0.0) continue;
          // valid t: 0 <= t*stride - pad + k < len
          const long long off = static_cast<long long>(k) - spec.padding;
          long long t0 = off < 0 ? (-off + spec.stride - 1) / spec.stride : 0;
          long long t1 = (static_cast<long long>(x.length) - 1 - off) / spec.stride;
          t1 = std::min<long long>(t1, static_cast<long long>(out_len) - 1);
          for (long long t = t0; t <= t1; ++t) {
            yrow[t] += w * xrow[t * spec.stride + off];
          }
        }
      }
    }
  }
  return y;
}

Batch convtranspose1d_forward(const Batch& x, const LayerSpec& spec, const LayerParams& p) {
  check_finite_shape(spec, x, "convtranspose1d");
  const std::size_t out_len = convtranspose1d_out_length(spec, x.length);
  const std::size_t in_ch = static_cast<std::size_t>(spec.in_ch);
  const std::size_t out_ch = static_cast<std::size_t>(spec.out_ch);
  const std::size_t kk = static_cast<std::size_t>(spec.kernel);
  Batch y(x.n, out_ch, out_len);

  for (std::size_t b = 0; b < x.n; ++b) {
    const double* xb = x.sample(b);
    double* yb = y.sample(b);
    if (spec.bias) {
      for (std::size_t oc = 0; oc < out_ch; ++oc) {
        const double bias = p.bias[oc];
        double* yrow = yb + oc * out_len;
        for (std::size_t t = 0; t < out_len; ++t) yrow[t] = bias;
      }
    }
    for (std::size_t ic = 0; ic < in_ch; ++ic) {
      const double* xrow = xb + ic * x.length;
      const double* wrow = p.weight.data() + ic * out_ch * kk;
      for (std::size_t oc = 0; oc < out_ch; ++oc) {
        double* yrow = yb + oc * out_len;
        for (std::size_t k = 0; k < kk; ++k) {
          const double w = wrow[oc * kk + k];
          if (w == 0.0) continue;
          const long long off = static_cast<long long>(k) - spec.padding;
          for (std::size_t ti = 0; ti < x.length; ++ti) {
            const long long o = static_cast<long long>(ti) * spec.stride + off;
            if (o < 0 || o >= static_cast<long long>(out_len)) continue;
            yrow[o] += w * xrow[ti];
          }
        }
      }
    }
  }
  return y;
}

Batch batchnorm1d_forward(const Batch& x, const LayerSpec& spec, LayerParams& p, Mode mode,
                          LayerCache* cache) {
  check_finite_shape(spec, x, "batchnorm1d");
  if (mode == Mode::Train && x.n < 2) {
    throw StateError("batchnorm1d: train mode requires batch >= 2");
  }
  const std::size_t C = x.channels;
  Batch y(x.n, C, x.length);
  std::vector<double> mean(C), inv_std(C);
  const double m = static_cast<double>(x.n * x.length);

  for (std::size_t c = 0; c < C; ++c) {
    double mu, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (std::size_t b = 0; b < x.n; ++b) {
        const double* row = x.sample(b) + c * x.length;
        for (std::size_t t = 0; t < x.length; ++t) sum += row[t];
      }
      mu = sum / m;
      double sq = 0.0;
      for (std::size_t b = 0; b < x.n; ++b) {
        const double* row = x.sample(b) + c * x.length;
        for (std::size_t t = 0; t < x.length; ++t) {
          const double d = row[t] - mu;
          sq += d * d;
        }
      }
      var = sq / m;
      p.running_mean[c] = (1.0 - p.momentum) * p.running_mean[c] + p.momentum * mu;
      p.running_var[c] = (1.0 - p.momentum) * p.running_var[c] + p.momentum * var;
    } else {
      mu = p.running_mean[c];
      var = p.running_var[c];
    }
    mean[c] = mu;
    inv_std[c] = 1.0 / std::sqrt(var + p.eps);

    const double gamma = p.weight[c];
    const double beta = p.bias[c];
    const double scale = gamma * inv_std[c];
    for (std::size_t b = 0; b < x.n; ++b) {
      const double* row = x.sample(b) + c * x.length;
      double* out = y.sample(b) + c * x.length;
      for (std::size_t t = 0; t < x.length; ++t) out[t] = scale * (row[t] - mu) + beta;
    }
  }
  if (cache) {
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
    cache->train_stats = mode == Mode::Train;
  }
  return y;
}

Batch activation_forward(const Batch& x, const LayerSpec& spec) {
  Batch y(x.n, x.channels, x.length);
  switch (spec.kind) {
    case LayerKind::LeakyRelu:
      for (std::size_t i = 0; i < x.size(); ++i) {
        y.v[i] = x.v[i] > 0.0 ? x.v[i] : spec.negative_slope * x.v[i];
      }
      break;
    case LayerKind::Sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = 1.0 / (1.0 + std::exp(-x.v[i]));
      break;
    case LayerKind::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = std::tanh(x.v[i]);
      break;
    default:
      throw ShapeError("activation_forward: not an activation layer");
  }
  return y;
}

void Network::add(const LayerSpec& spec) {
  spec.validate();
  Layer layer;
  layer.spec = spec;
  if (spec.kind == LayerKind::Conv1d) {
    layer.params.weight.assign(
        static_cast<std::size_t>(spec.out_ch) * spec.in_ch * spec.kernel, 0.0);
    if (spec.bias) layer.params.bias.assign(static_cast<std::size_t>(spec.out_ch), 0.0);
  } else if (spec.kind == LayerKind::ConvTranspose1d) {
    layer.params.weight.assign(
        static_cast<std::size_t>(spec.in_ch) * spec.out_ch * spec.kernel, 0.0);
    if (spec.bias) layer.params.bias.assign(static_cast<std::size_t>(spec.out_ch), 0.0);
  } else if (spec.kind == LayerKind::BatchNorm1d) {
    const std::size_t c = static_cast<std::size_t>(spec.in_ch);
    layer.params.weight.assign(c, 1.0);
    layer.params.bias.assign(c, 0.0);
    layer.params.running_mean.assign(c, 0.0);
    layer.params.running_var.assign(c, 1.0);
  }
  layers_.push_back(std::move(layer));
}

std::size_t Network::param_count() const {
  std::size_t total = 0;
  for (const Layer& l : layers_) total += l.params.weight.size() + l.params.bias.size();
  return total;
}

void Network::init_params(RngStream& rng) {
  for (Layer& l : layers_) {
    if (l.spec.kind == LayerKind::Conv1d || l.spec.kind == LayerKind::ConvTranspose1d) {
      for (double& w : l.params.weight) w = rng.gaussian(0.0, 0.02);
      for (double& b : l.params.bias) b = 0.0;
    } else if (l.spec.kind == LayerKind::BatchNorm1d) {
      for (double& g : l.params.weight) g = rng.gaussian(1.0, 0.02);
      for (double& b : l.params.bias) b = 0.0;
      std::fill(l.params.running_mean.begin(), l.params.running_mean.end(), 0.0);
      std::fill(l.params.running_var.begin(), l.params.running_var.end(), 1.0);
    }
  }
}

Batch Network::apply(std::size_t i, const Batch& x, Mode mode, LayerCache* cache) {
  Layer& l = layers_[i];
  if (cache) cache->input = x;
  Batch y;
  switch (l.spec.kind) {
    case LayerKind::Conv1d: y = conv1d_forward(x, l.spec, l.params); break;
    case LayerKind::ConvTranspose1d: y = convtranspose1d_forward(x, l.spec, l.params); break;
    case LayerKind::BatchNorm1d: y = batchnorm1d_forward(x, l.spec, l.params, mode, cache); break;
    default: y = activation_forward(x, l.spec); break;
  }
  if (cache) cache->output = y;
  return y;
}

Batch Network::apply_const(std::size_t i, const Batch& x, LayerCache* cache) const {
  const Layer& l = layers_[i];
  if (cache) cache->input = x;
  Batch y;
  switch (l.spec.kind) {
    case LayerKind::Conv1d: y = conv1d_forward(x, l.spec, l.params); break;
    case LayerKind::ConvTranspose1d: y = convtranspose1d_forward(x, l.spec, l.params); break;
    case LayerKind::BatchNorm1d: {
      // Eval mode never mutates running stats, so the const_cast stays safe.
      LayerParams& p = const_cast<LayerParams&>(l.params);
      y = batchnorm1d_forward(x, l.spec, p, Mode::Eval, cache);
      break;
    }
    default: y = activation_forward(x, l.spec); break;
  }
  if (cache) cache->output = y;
  return y;
}

Batch Network::forward(const Batch& x, Mode mode, std::vector<LayerCache>* caches) {
  if (caches) caches->resize(layers_.size());
  Batch cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cur = apply(i, cur, mode, caches ? &(*caches)[i] : nullptr);
  }
  return cur;
}

Batch Network::forward_prefix(const Batch& x, std::size_t n_layers,
                              std::vector<LayerCache>* caches) const {
  n_layers = std::min(n_layers, layers_.size());
  if (caches) caches->resize(n_layers);
  Batch cur = x;
  for (std::size_t i = 0; i < n_layers; ++i) {
    cur = apply_const(i, cur, caches ? &(*caches)[i] : nullptr);
  }
  return cur;
}

std::vector<LayerGrads> Network::make_grads() const {
  std::vector<LayerGrads> grads(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    grads[i].weight.assign(layers_[i].params.weight.size(), 0.0);
    grads[i].bias.assign(layers_[i].params.bias.size(), 0.0);
  }
  return grads;
}

namespace {

Batch conv1d_backward(const Batch& up, const LayerSpec& spec, const LayerParams& p,
                      const Batch& x, LayerGrads* g) {
  const std::size_t in_ch = static_cast<std::size_t>(spec.in_ch);
  const std::size_t out_ch = static_cast<std::size_t>(spec.out_ch);
  const std::size_t kk = static_cast<std::size_t>(spec.kernel);
  const std::size_t out_len = up.length;
  Batch dx(x.n, in_ch, x.length);

  for (std::size_t b = 0; b < x.n; ++b) {
    const double* xb = x.sample(b);
    const double* ub = up.sample(b);
    double* dxb = dx.sample(b);
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
      const double* urow = ub + oc * out_len;
      const double* wrow = p.weight.data() + oc * in_ch * kk;
      double* gwrow = g ? g->weight.data() + oc * in_ch * kk : nullptr;
      if (g && spec.bias) {
        double s = 0.0;
        for (std::size_t t = 0; t < out_len; ++t) s += urow[t];
        g->bias[oc] += s;
      }
      for (std::size_t ic = 0; ic < in_ch; ++ic) {
        const double* xrow = xb + ic * x.length;
        double* dxrow = dxb + ic * x.length;
        for (std::size_t k = 0; k < kk; ++k) {
          const long long off = static_cast<long long>(k) - spec.padding;
          long long t0 = off < 0 ? (-off + spec.stride - 1) / spec.stride : 0;
          long long t1 = (static_cast<long long>(x.length) - 1 - off) / spec.stride;
          t1 = std::min<long long>(t1, static_cast<long long>(out_len) - 1);
          const double w = wrow[ic * kk + k];
          double gw = 0.0;
          for (long long t = t0; t <= t1; ++t) {
            const double u = urow[t];
            const std::size_t xi = static_cast<std::size_t>(t * spec.stride + off);
            dxrow[xi] += u * w;
            gw += u * xrow[xi];
          }
          if (gwrow) gwrow[ic * kk + k] += gw;
        }
      }
    }
  }
  return dx;
}

Batch convtranspose1d_backward(const Batch& up, const LayerSpec& spec, const LayerParams& p,
                               const Batch& x, LayerGrads* g) {
  const std::size_t in_ch = static_cast<std::size_t>(spec.in_ch);
  const std::size_t out_ch = static_cast<std::size_t>(spec.out_ch);
  const std::size_t kk = static_cast<std::size_t>(spec.kernel);
  const std::size_t out_len = up.length;
  Batch dx(x.n, in_ch, x.length);

  for (std::size_t b = 0; b < x.n; ++b) {
    const double* xb = x.sample(b);
    const double* ub = up.sample(b);
    double* dxb = dx.sample(b);
    if (g && spec.bias) {
      for (std::size_t oc = 0; oc < out_ch; ++oc) {
        const double* urow = ub + oc * out_len;
        double s = 0.0;
        for (std::size_t t = 0; t < out_len; ++t) s += urow[t];
        g->bias[oc] += s;
      }
    }
    for (std::size_t ic = 0; ic < in_ch; ++ic) {
      const double* xrow = xb + ic * x.length;
      double* dxrow = dxb + ic * x.length;
      const double* wrow = p.weight.data() + ic * out_ch * kk;
      double* gwrow = g ? g->weight.data() + ic * out_ch * kk : nullptr;
      for (std::size_t oc = 0; oc < out_ch; ++oc) {
        const double* urow = ub + oc * out_len;
        for (std::size_t k = 0; k < kk; ++k) {
          const long long off = static_cast<long long>(k) - spec.padding;
          const double w = wrow[oc * kk + k];
          double gw = 0.0;
          for (std::size_t ti = 0; ti < x.length; ++ti) {
            const long long o = static_cast<long long>(ti) * spec.stride + off;
            if (o < 0 || o >= static_cast<long long>(out_len)) continue;
            const double u = urow[o];
            dxrow[ti] += u * w;
            gw += u * xrow[ti];
          }
          if (gwrow) gwrow[oc * kk + k] += gw;
        }
      }
    }
  }
  return dx;
}

Batch batchnorm1d_backward(const Batch& up, const LayerSpec&, const LayerParams& p,
                           const LayerCache& cache, LayerGrads* g) {
  const Batch& x = cache.input;
  const std::size_t C = x.channels;
  const double m = static_cast<double>(x.n * x.length);
  Batch dx(x.n, C, x.length);

  for (std::size_t c = 0; c < C; ++c) {
    const double mu = cache.mean[c];
    const double istd = cache.inv_std[c];
    const double gamma = p.weight[c];

    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < x.n; ++b) {
      const double* urow = up.sample(b) + c * x.length;
      const double* xrow = x.sample(b) + c * x.length;
      for (std::size_t t = 0; t < x.length; ++t) {
        sum_dy += urow[t];
        sum_dy_xhat += urow[t] * (xrow[t] - mu) * istd;
      }
    }
    if (g) {
      g->weight[c] += sum_dy_xhat;
      g->bias[c] += sum_dy;
    }
    if (cache.train_stats) {
      const double k1 = gamma * istd / m;
      for (std::size_t b = 0; b < x.n; ++b) {
        const double* urow = up.sample(b) + c * x.length;
        const double* xrow = x.sample(b) + c * x.length;
        double* drow = dx.sample(b) + c * x.length;
        for (std::size_t t = 0; t < x.length; ++t) {
          const double xhat = (xrow[t] - mu) * istd;
          drow[t] = k1 * (m * urow[t] - sum_dy - xhat * sum_dy_xhat);
        }
      }
    } else {
      const double scale = gamma * istd;
      for (std::size_t b = 0; b < x.n; ++b) {
        const double* urow = up.sample(b) + c * x.length;
        double* drow = dx.sample(b) + c * x.length;
        for (std::size_t t = 0; t < x.length; ++t) drow[t] = urow[t] * scale;
      }
    }
  }
  return dx;
}

Batch activation_backward(const Batch& up, const LayerSpec& spec, const LayerCache& cache) {
  Batch dx(up.n, up.channels, up.length);
  switch (spec.kind) {
    case LayerKind::LeakyRelu:
      for (std::size_t i = 0; i < up.size(); ++i) {
        dx.v[i] = up.v[i] * (cache.input.v[i] > 0.0 ? 1.0 : spec.negative_slope);
      }
      break;
    case LayerKind::Sigmoid:
      for (std::size_t i = 0; i < up.size(); ++i) {
        const double y = cache.output.v[i];
        dx.v[i] = up.v[i] * y * (1.0 - y);
      }
      break;
    case LayerKind::Tanh:
      for (std::size_t i = 0; i < up.size(); ++i) {
        const double y = cache.output.v[i];
        dx.v[i] = up.v[i] * (1.0 - y * y);
      }
      break;
    default:
      throw ShapeError("activation_backward: not an activation layer");
  }
  return dx;
}

}  // namespace

Batch Network::backward(const std::vector<LayerCache>& caches, const Batch& upstream,
                        std::vector<LayerGrads>* grads, std::size_t n_layers) const {
  n_layers = std::min(n_layers, layers_.size());
  if (caches.size() < n_layers) {
    throw StateError("backward: forward caches missing or truncated");
  }
  Batch cur = upstream;
  for (std::size_t idx = n_layers; idx-- > 0;) {
    const Layer& l = layers_[idx];
    const LayerCache& cache = caches[idx];
    if (cache.input.size() == 0) throw StateError("backward: empty cache for layer");
    LayerGrads* g = grads ? &(*grads)[idx] : nullptr;
    switch (l.spec.kind) {
      case LayerKind::Conv1d:
        cur = conv1d_backward(cur, l.spec, l.params, cache.input, g);
        break;
      case LayerKind::ConvTranspose1d:
        cur = convtranspose1d_backward(cur, l.spec, l.params, cache.input, g);
        break;
      case LayerKind::BatchNorm1d:
        cur = batchnorm1d_backward(cur, l.spec, l.params, cache, g);
        break;
      default:
        cur = activation_backward(cur, l.spec, cache);
        break;
    }
  }
  return cur;
}

BceResult bce_loss(const std::vector<double>& p, const std::vector<double>& y) {
  if (p.size() != y.size() || p.empty()) {
    throw ShapeError("bce_loss: probability/label size mismatch");
  }
  BceResult r;
  r.grad.resize(p.size());
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], 1e-7, 1.0 - 1e-7);
    r.loss += -(y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc));
    r.grad[i] = (-y[i] / pc + (1.0 - y[i]) / (1.0 - pc)) / n;
  }
  r.loss /= n;
  return r;
}

void sgd_step(std::vector<double>& param, const std::vector<double>& grad,
              std::vector<double>& velocity, double lr, double momentum) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw ShapeError("sgd_step: size mismatch");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

GradCheckReport grad_check(Network& net, const Batch& input, double tolerance, Mode mode) {
  constexpr double h = 1e-5;

  // Snapshot so repeated probing leaves the network untouched (train-mode
  // forwards churn batchnorm running stats).
  std::vector<LayerParams> snapshot;
  for (std::size_t i = 0; i < net.layer_count(); ++i) snapshot.push_back(net.params(i));

  RngStream probe_rng(0xC0FFEEULL);
  std::vector<double> probe;
  const auto loss_of = [&](const Batch& x) {
    Batch out = net.forward(x, mode, nullptr);
    if (probe.empty()) {
      probe.resize(out.size());
      for (double& c : probe) c = 0.5 + probe_rng.uniform01();
    }
    double l = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) l += probe[i] * out.v[i];
    return l;
  };
  loss_of(input);  // fixes the probe vector

  std::vector<LayerCache> caches;
  Batch out = net.forward(input, mode, &caches);
  Batch upstream(out.n, out.channels, out.length);
  for (std::size_t i = 0; i < out.size(); ++i) upstream.v[i] = probe[i];
  auto grads = net.make_grads();
  Batch input_grad = net.backward(caches, upstream, &grads);

  GradCheckReport report;
  report.pass = true;
  auto consider = [&](double analytic, double numeric, const std::string& where) {
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = where;
    }
    if (rel > tolerance) report.pass = false;
  };

  for (std::size_t li = 0; li < net.layer_count(); ++li) {
    for (int which = 0; which < 2; ++which) {
      std::vector<double>& vec = which == 0 ? net.params(li).weight : net.params(li).bias;
      const std::vector<double>& gvec = which == 0 ? grads[li].weight : grads[li].bias;
      const char* pname = which == 0 ? "weight" : "bias";
      for (std::size_t j = 0; j < vec.size(); ++j) {
        const double saved = vec[j];
        vec[j] = saved + h;
        const double lp = loss_of(input);
        vec[j] = saved - h;
        const double lm = loss_of(input);
        vec[j] = saved;
        consider(gvec[j], (lp - lm) / (2.0 * h),
                 "layer " + std::to_string(li) + " " + pname + "[" + std::to_string(j) + "]");
      }
    }
  }

  Batch perturbed = input;
  for (std::size_t j = 0; j < perturbed.size(); ++j) {
    const double saved = perturbed.v[j];
    perturbed.v[j] = saved + h;
    const double lp = loss_of(perturbed);
    perturbed.v[j] = saved - h;
    const double lm = loss_of(perturbed);
    perturbed.v[j] = saved;
    consider(input_grad.v[j], (lp - lm) / (2.0 * h), "input[" + std::to_string(j) + "]");
  }

  for (std::size_t i = 0; i < net.layer_count(); ++i) net.params(i) = snapshot[i];
  return report;
}

}  // namespace accguard::nn
