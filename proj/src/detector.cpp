#include "accguard/detector.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "accguard/errors.hpp"
#include "accguard/parallel.hpp"

namespace accguard::det {

void DetectorConfig::validate() const {
  if (lambda_weight < 0.0 || lambda_weight > 1.0) {
    throw ConfigError("lambda_weight must be in [0, 1]");
  }
  if (inversion_steps < 1) throw ConfigError("inversion_steps must be >= 1");
  if (!(inversion_lr > 0.0)) throw ConfigError("inversion_lr must be > 0");
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
}

double residual_loss(const nn::Batch& x, const nn::Batch& x_hat) {
  if (x.n != x_hat.n || x.channels != x_hat.channels || x.length != x_hat.length) {
    throw ShapeError("residual_loss: shape mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x.v[i] - x_hat.v[i]);
  return sum;
}

double discrimination_loss(const gan::GanModel& model, const nn::Batch& x,
                           const nn::Batch& x_hat) {
  const nn::Batch hx = gan::discriminator_features(model, x, nullptr);
  const nn::Batch hx_hat = gan::discriminator_features(model, x_hat, nullptr);
  return residual_loss(hx, hx_hat);
}

namespace {

// Total inversion loss and, optionally, its gradient w.r.t. z.
struct LossEval {
  double loss = 0.0;
  nn::Batch reconstruction;
};

LossEval eval_loss(const gan::GanModel& model, const nn::Batch& x, const nn::Batch& h_x,
                   const nn::Batch& z, double lambda, nn::Batch* grad_z) {
  std::vector<nn::LayerCache> g_caches;
  LossEval out;
  out.reconstruction =
      model.generator.forward_eval(z, grad_z ? &g_caches : nullptr);
  const nn::Batch& rec = out.reconstruction;

  double l_r = 0.0;
  nn::Batch d_rec(rec.n, rec.channels, rec.length);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double diff = x.v[i] - rec.v[i];
    l_r += std::abs(diff);
    d_rec.v[i] = (1.0 - lambda) * (diff > 0.0 ? -1.0 : (diff < 0.0 ? 1.0 : 0.0));
  }

  double l_d = 0.0;
  if (lambda > 0.0) {
    std::vector<nn::LayerCache> d_caches;
    const nn::Batch h_rec =
        model.discriminator.forward_prefix(rec, model.disc_feature_layers,
                                           grad_z ? &d_caches : nullptr);
    nn::Batch up_h(h_rec.n, h_rec.channels, h_rec.length);
    for (std::size_t i = 0; i < h_rec.size(); ++i) {
      const double diff = h_x.v[i] - h_rec.v[i];
      l_d += std::abs(diff);
      up_h.v[i] = lambda * (diff > 0.0 ? -1.0 : (diff < 0.0 ? 1.0 : 0.0));
    }
    if (grad_z) {
      const nn::Batch d_from_feature = model.discriminator.backward(
          d_caches, up_h, nullptr, model.disc_feature_layers);
      for (std::size_t i = 0; i < d_rec.size(); ++i) d_rec.v[i] += d_from_feature.v[i];
    }
  }

  out.loss = (1.0 - lambda) * l_r + lambda * l_d;
  if (grad_z) {
    *grad_z = model.generator.backward(g_caches, d_rec, nullptr);
  }
  return out;
}

}  // namespace

InversionResult invert_latent(const gan::GanModel& model, const nn::Batch& x_norm,
                              const DetectorConfig& config, std::uint64_t stream_salt) {
  config.validate();
  if (x_norm.n != 1 || x_norm.channels != 3 ||
      static_cast<int>(x_norm.length) != model.config.model_length) {
    throw ShapeError("invert_latent: expected a (1, 3, model_length) window");
  }
  const double lambda = config.lambda_weight;

  nn::Batch h_x;
  if (lambda > 0.0) h_x = gan::discriminator_features(model, x_norm, nullptr);

  InversionResult best;
  bool have_best = false;
  for (int restart = 0; restart < config.restarts; ++restart) {
    RngStream rng(derive_seed(config.seed, stream_salt, static_cast<std::uint64_t>(restart)));
    nn::Batch z = gan::make_latent(1, model.config.latent_dim, rng);

    nn::Batch grad(1, z.channels, 1);
    LossEval cur = eval_loss(model, x_norm, h_x, z, lambda, &grad);
    bool failed = !std::isfinite(cur.loss);

    for (int step = 0; step < config.inversion_steps && !failed; ++step) {
      double lr = config.inversion_lr;
      bool moved = false;
      nn::Batch candidate(1, z.channels, 1);
      for (int halving = 0; halving <= 5; ++halving) {
        for (std::size_t i = 0; i < z.size(); ++i) candidate.v[i] = z.v[i] - lr * grad.v[i];
        LossEval next = eval_loss(model, x_norm, h_x, candidate, lambda, nullptr);
        if (!std::isfinite(next.loss)) {
          failed = true;
          break;
        }
        if (next.loss <= cur.loss) {
          z = candidate;
          moved = true;
          break;
        }
        lr *= 0.5;
      }
      if (failed) break;
      if (!moved) break;  // stalled at a kink of |.|; further steps repeat
      cur = eval_loss(model, x_norm, h_x, z, lambda, &grad);
      failed = !std::isfinite(cur.loss);
    }

    if (failed) continue;
    if (!have_best || cur.loss < best.loss) {
      best.z.assign(z.v.begin(), z.v.end());
      best.reconstruction = cur.reconstruction;
      best.loss = cur.loss;
      have_best = true;
    }
  }
  if (!have_best) {
    throw NumericError("invert_latent: all restarts diverged to non-finite loss");
  }
  return best;
}

double anomaly_score(const gan::GanModel& model, const data::Window& raw,
                     const DetectorConfig& config, std::uint64_t window_index) {
  const nn::Batch x = gan::model_input(model, std::span<const data::Window>(&raw, 1));
  return invert_latent(model, x, config, window_index).loss;
}

std::vector<double> score_windows(const gan::GanModel& model,
                                  std::span<const data::Window> windows,
                                  const DetectorConfig& config, int jobs) {
  std::vector<double> scores(windows.size());
  parallel_for(windows.size(), jobs, [&](std::size_t i) {
    scores[i] = anomaly_score(model, windows[i], config, i);
  });
  return scores;
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) throw std::invalid_argument("nearest_rank_percentile: empty input");
  if (!(percentile > 0.0) || percentile > 100.0) {
    throw std::invalid_argument("percentile must be in (0, 100]");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

Threshold calibrate_threshold(const gan::GanModel& model,
                              std::span<const data::Window> validation, double percentile,
                              const DetectorConfig& config, int jobs) {
  if (validation.empty()) throw std::invalid_argument("calibrate_threshold: empty validation set");
  for (const auto& w : validation) {
    if (w.label != 0) {
      throw std::invalid_argument("calibrate_threshold: attacked window in validation set");
    }
  }
  std::vector<double> scores = score_windows(model, validation, config, jobs);

  Threshold t;
  t.value = nearest_rank_percentile(scores, percentile);
  t.percentile = percentile;
  t.n_validation = scores.size();
  t.lambda = config.lambda_weight;
  t.gamma_max = config.inversion_steps;
  t.restarts = config.restarts;
  std::sort(scores.begin(), scores.end());
  t.score_min = scores.front();
  t.score_median = scores[scores.size() / 2];
  t.score_max = scores.back();
  return t;
}

int classify(double score, double threshold) { return score > threshold ? 1 : 0; }

std::string threshold_to_json(const Threshold& t) {
  nlohmann::json j;
  j["value"] = t.value;
  j["percentile"] = t.percentile;
  j["n_validation"] = t.n_validation;
  j["lambda"] = t.lambda;
  j["gamma_max"] = t.gamma_max;
  j["restarts"] = t.restarts;
  j["model_checksum"] = t.model_checksum;
  j["score_stats"] = {{"min", t.score_min}, {"median", t.score_median}, {"max", t.score_max}};
  return j.dump(2) + "\n";
}

Threshold threshold_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("threshold file is not valid JSON");
  Threshold t;
  t.value = j.at("value").get<double>();
  t.percentile = j.at("percentile").get<double>();
  t.n_validation = j.at("n_validation").get<std::size_t>();
  t.lambda = j.at("lambda").get<double>();
  t.gamma_max = j.at("gamma_max").get<int>();
  t.restarts = j.at("restarts").get<int>();
  t.model_checksum = j.value("model_checksum", std::string());
  if (j.contains("score_stats")) {
    t.score_min = j["score_stats"].value("min", 0.0);
    t.score_median = j["score_stats"].value("median", 0.0);
    t.score_max = j["score_stats"].value("max", 0.0);
  }
  return t;
}

}  // namespace accguard::det
