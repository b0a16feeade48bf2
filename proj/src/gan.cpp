#include "accguard/gan.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "accguard/errors.hpp"

namespace accguard::gan {

namespace {

constexpr char kMagic[8] = {'A', 'C', 'C', 'G', 'A', 'N', '0', '1'};

nn::LayerSpec conv(int in_ch, int out_ch, int kernel, int stride, int padding, bool bias) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::Conv1d;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.bias = bias;
  return s;
}

nn::LayerSpec convt(int in_ch, int out_ch, int kernel, int stride, int padding, bool bias) {
  nn::LayerSpec s = conv(in_ch, out_ch, kernel, stride, padding, bias);
  s.kind = nn::LayerKind::ConvTranspose1d;
  return s;
}

nn::LayerSpec bnorm(int ch) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::BatchNorm1d;
  s.in_ch = ch;
  return s;
}

nn::LayerSpec act(nn::LayerKind kind, double slope = 0.0) {
  nn::LayerSpec s;
  s.kind = kind;
  s.negative_slope = slope;
  return s;
}

}  // namespace

void GanConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  bool supported = false;
  for (int t : {32, 64, 128, 256, 512}) supported = supported || model_length == t;
  if (!supported) throw ConfigError("model_length must be one of {32, 64, 128, 256, 512}");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("learning rates must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (batchnorm needs it)");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(data_gain > 0.0)) throw ConfigError("data_gain must be > 0");
}

int choose_model_length(int T) {
  for (int t : {32, 64, 128, 256, 512}) {
    if (T <= t) return t;
  }
  throw ConfigError("window of " + std::to_string(T) + " samples exceeds the 512 model cap");
}

GanModel build_model(const GanConfig& config, const data::NormStats& norm) {
  config.validate();
  GanModel m;
  m.config = config;
  m.norm = norm;

  const int c8 = 8 * config.base_channels;
  const int c4 = 4 * config.base_channels;
  const int c2 = 2 * config.base_channels;
  const int t8 = config.model_length / 8;
  const double slope = config.negative_slope;

  nn::Network& g = m.generator;
  g.add(convt(config.latent_dim, c8, t8, 1, 0, false));  // (z, 1) -> (8C, T/8)
  g.add(bnorm(c8));
  g.add(act(nn::LayerKind::LeakyRelu, slope));
  g.add(convt(c8, c4, 4, 2, 1, false));
  g.add(bnorm(c4));
  g.add(act(nn::LayerKind::LeakyRelu, slope));
  g.add(convt(c4, c2, 4, 2, 1, false));
  g.add(bnorm(c2));
  g.add(act(nn::LayerKind::LeakyRelu, slope));
  g.add(convt(c2, 3, 4, 2, 1, true));  // -> (3, T)
  g.add(act(nn::LayerKind::Tanh));

  nn::Network& d = m.discriminator;
  d.add(conv(3, c2, 4, 2, 1, true));
  d.add(act(nn::LayerKind::LeakyRelu, slope));
  d.add(conv(c2, c4, 4, 2, 1, false));
  d.add(bnorm(c4));
  d.add(act(nn::LayerKind::LeakyRelu, slope));
  d.add(conv(c4, c8, 4, 2, 1, false));
  d.add(bnorm(c8));
  d.add(act(nn::LayerKind::LeakyRelu, slope));
  m.disc_feature_layers = d.layer_count();  // h(x) = flatten of this activation
  d.add(conv(c8, 1, t8, 1, 0, true));       // -> (1, 1) logit
  d.add(act(nn::LayerKind::Sigmoid));

  RngStream init_rng(derive_seed(config.seed, 0x6a11u));
  m.generator.init_params(init_rng);
  m.discriminator.init_params(init_rng);
  return m;
}

nn::Batch model_input(const GanModel& model, std::span<const data::Window> windows) {
  nn::Batch batch = data::to_normalized_batch(
      windows, model.norm, static_cast<std::size_t>(model.config.model_length));
  for (double& v : batch.v) v *= model.config.data_gain;
  return batch;
}

nn::Batch make_latent(std::size_t n, int latent_dim, RngStream& rng) {
  nn::Batch z(n, static_cast<std::size_t>(latent_dim), 1);
  for (double& v : z.v) v = rng.gaussian(0.0, 1.0);
  return z;
}

nn::Batch generator_forward(GanModel& model, const nn::Batch& z, nn::Mode mode,
                            std::vector<nn::LayerCache>* caches) {
  if (static_cast<int>(z.channels) != model.config.latent_dim || z.length != 1) {
    throw ShapeError("generator_forward: latent batch must be (n, latent_dim, 1)");
  }
  return model.generator.forward(z, mode, caches);
}

nn::Batch generator_forward_eval(const GanModel& model, const nn::Batch& z,
                                 std::vector<nn::LayerCache>* caches) {
  if (static_cast<int>(z.channels) != model.config.latent_dim || z.length != 1) {
    throw ShapeError("generator_forward: latent batch must be (n, latent_dim, 1)");
  }
  return model.generator.forward_eval(z, caches);
}

DiscOutput discriminator_forward(GanModel& model, const nn::Batch& x, nn::Mode mode) {
  if (x.channels != 3 || static_cast<int>(x.length) != model.config.model_length) {
    throw ShapeError("discriminator_forward: expected (n, 3, model_length) input");
  }
  std::vector<nn::LayerCache> caches;
  nn::Batch out = model.discriminator.forward(x, mode, &caches);
  DiscOutput res;
  res.prob.resize(out.n);
  for (std::size_t b = 0; b < out.n; ++b) res.prob[b] = out.at(b, 0, 0);
  res.features = caches[model.disc_feature_layers - 1].output;
  return res;
}

nn::Batch discriminator_features(const GanModel& model, const nn::Batch& x,
                                 std::vector<nn::LayerCache>* caches) {
  return model.discriminator.forward_prefix(x, model.disc_feature_layers, caches);
}

namespace {

struct Optimizer {
  std::vector<nn::LayerGrads> velocity;
  explicit Optimizer(const nn::Network& net) {
    velocity.resize(net.layer_count());
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
      velocity[i].weight.assign(net.params(i).weight.size(), 0.0);
      velocity[i].bias.assign(net.params(i).bias.size(), 0.0);
    }
  }
  void step(nn::Network& net, const std::vector<nn::LayerGrads>& grads, double lr,
            double momentum) {
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
      nn::sgd_step(net.params(i).weight, grads[i].weight, velocity[i].weight, lr, momentum);
      nn::sgd_step(net.params(i).bias, grads[i].bias, velocity[i].bias, lr, momentum);
    }
  }
};

void add_grads(std::vector<nn::LayerGrads>& acc, const std::vector<nn::LayerGrads>& more) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    for (std::size_t j = 0; j < acc[i].weight.size(); ++j) acc[i].weight[j] += more[i].weight[j];
    for (std::size_t j = 0; j < acc[i].bias.size(); ++j) acc[i].bias[j] += more[i].bias[j];
  }
}

nn::Batch gather_rows(const nn::Batch& all, const std::vector<std::size_t>& order,
                      std::size_t first, std::size_t count) {
  nn::Batch out(count, all.channels, all.length);
  const std::size_t row = all.channels * all.length;
  for (std::size_t i = 0; i < count; ++i) {
    std::memcpy(out.sample(i), all.sample(order[first + i]), row * sizeof(double));
  }
  return out;
}

std::vector<double> disc_prob(const nn::Batch& out) {
  std::vector<double> p(out.n);
  for (std::size_t b = 0; b < out.n; ++b) p[b] = out.at(b, 0, 0);
  return p;
}

nn::Batch prob_grad_to_batch(const std::vector<double>& grad) {
  nn::Batch up(grad.size(), 1, 1);
  for (std::size_t b = 0; b < grad.size(); ++b) up.at(b, 0, 0) = grad[b];
  return up;
}

}  // namespace

GanModel train_gan(const std::vector<data::Window>& train_windows, const data::NormStats& norm,
                   const GanConfig& config) {
  config.validate();
  if (train_windows.empty()) throw std::invalid_argument("train_gan: empty training split");
  for (const auto& w : train_windows) {
    if (w.label != 0) throw std::invalid_argument("train_gan: attacked window in training split");
  }

  GanModel model = build_model(config, norm);
  const nn::Batch all = model_input(model, train_windows);

  Optimizer opt_g(model.generator);
  Optimizer opt_d(model.discriminator);
  RngStream shuffle_rng(derive_seed(config.seed, 0x51afu));
  RngStream z_rng(derive_seed(config.seed, 0x2aa7u));

  double lr_g = config.lr_g;
  double lr_d = config.lr_d;
  const std::size_t n_windows = all.n;
  std::vector<std::size_t> order(n_windows);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss_d = 0.0, epoch_loss_g = 0.0;
    std::size_t batches = 0;

    for (std::size_t first = 0; first + 2 <= n_windows;
         first += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n_windows - first);
      if (count < 2) break;

      // Discriminator step: real -> 1, generated -> 0.
      nn::Batch real = gather_rows(all, order, first, count);
      std::vector<nn::LayerCache> d_caches;
      nn::Batch d_out = model.discriminator.forward(real, nn::Mode::Train, &d_caches);
      nn::BceResult bce_real = nn::bce_loss(disc_prob(d_out), std::vector<double>(count, 1.0));
      auto d_grads = model.discriminator.make_grads();
      model.discriminator.backward(d_caches, prob_grad_to_batch(bce_real.grad), &d_grads);

      nn::Batch z = make_latent(count, config.latent_dim, z_rng);
      nn::Batch fake = model.generator.forward(z, nn::Mode::Train, nullptr);
      nn::Batch d_out_fake = model.discriminator.forward(fake, nn::Mode::Train, &d_caches);
      nn::BceResult bce_fake =
          nn::bce_loss(disc_prob(d_out_fake), std::vector<double>(count, 0.0));
      auto d_grads_fake = model.discriminator.make_grads();
      model.discriminator.backward(d_caches, prob_grad_to_batch(bce_fake.grad), &d_grads_fake);
      add_grads(d_grads, d_grads_fake);
      opt_d.step(model.discriminator, d_grads, lr_d, config.momentum);
      const double loss_d = bce_real.loss + bce_fake.loss;

      // Generator step: non-saturating objective, BCE target 1 on G(z).
      nn::Batch z2 = make_latent(count, config.latent_dim, z_rng);
      std::vector<nn::LayerCache> g_caches;
      nn::Batch fake2 = model.generator.forward(z2, nn::Mode::Train, &g_caches);
      std::vector<nn::LayerCache> d_caches2;
      nn::Batch d_out2 = model.discriminator.forward(fake2, nn::Mode::Train, &d_caches2);
      nn::BceResult bce_gen = nn::bce_loss(disc_prob(d_out2), std::vector<double>(count, 1.0));
      nn::Batch d_input_grad =
          model.discriminator.backward(d_caches2, prob_grad_to_batch(bce_gen.grad), nullptr);
      auto g_grads = model.generator.make_grads();
      model.generator.backward(g_caches, d_input_grad, &g_grads);
      opt_g.step(model.generator, g_grads, lr_g, config.momentum);

      if (!std::isfinite(loss_d) || !std::isfinite(bce_gen.loss)) {
        throw NumericError("train_gan: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batches));
      }
      epoch_loss_d += loss_d;
      epoch_loss_g += bce_gen.loss;
      ++batches;
    }

    if (batches == 0) throw std::invalid_argument("train_gan: not enough windows for one batch");
    const double mean_d = epoch_loss_d / static_cast<double>(batches);
    const double mean_g = epoch_loss_g / static_cast<double>(batches);
    model.history.push_back({mean_d, mean_g});
    // Warmup guard over the first ten epochs: halve the rates if either side
    // diverges past a mean loss of 10.
    if (epoch < 10 && (mean_d > 10.0 || mean_g > 10.0)) {
      lr_g *= 0.5;
      lr_d *= 0.5;
    }
  }
  return model;
}

namespace {

struct ParamEntry {
  const char* net;
  std::size_t layer;
  const char* name;
  std::vector<double>* vec;
};

std::vector<ParamEntry> parameter_table(nn::Network& net, const char* tag) {
  std::vector<ParamEntry> entries;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    nn::LayerParams& p = net.params(i);
    if (!p.weight.empty()) entries.push_back({tag, i, "weight", &p.weight});
    if (!p.bias.empty()) entries.push_back({tag, i, "bias", &p.bias});
    if (!p.running_mean.empty()) entries.push_back({tag, i, "running_mean", &p.running_mean});
    if (!p.running_var.empty()) entries.push_back({tag, i, "running_var", &p.running_var});
  }
  return entries;
}

nlohmann::json spec_to_json(const nn::LayerSpec& s) {
  return nlohmann::json{{"kind", nn::layer_kind_name(s.kind)}, {"in_ch", s.in_ch},
                        {"out_ch", s.out_ch},                  {"kernel", s.kernel},
                        {"stride", s.stride},                  {"padding", s.padding},
                        {"negative_slope", s.negative_slope},  {"bias", s.bias}};
}

nn::LayerSpec spec_from_json(const nlohmann::json& j) {
  nn::LayerSpec s;
  s.kind = nn::layer_kind_from_name(j.at("kind").get<std::string>());
  s.in_ch = j.at("in_ch").get<int>();
  s.out_ch = j.at("out_ch").get<int>();
  s.kernel = j.at("kernel").get<int>();
  s.stride = j.at("stride").get<int>();
  s.padding = j.at("padding").get<int>();
  s.negative_slope = j.at("negative_slope").get<double>();
  s.bias = j.at("bias").get<bool>();
  return s;
}

nlohmann::json config_to_json(const GanConfig& c) {
  return nlohmann::json{{"latent_dim", c.latent_dim},
                        {"base_channels", c.base_channels},
                        {"model_length", c.model_length},
                        {"window_seconds", c.window_seconds},
                        {"lr_g", c.lr_g},
                        {"lr_d", c.lr_d},
                        {"momentum", c.momentum},
                        {"batch_size", c.batch_size},
                        {"epochs", c.epochs},
                        {"seed", c.seed},
                        {"negative_slope", c.negative_slope},
                        {"data_gain", c.data_gain}};
}

GanConfig config_from_json(const nlohmann::json& j) {
  GanConfig c;
  c.latent_dim = j.at("latent_dim").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.model_length = j.at("model_length").get<int>();
  c.window_seconds = j.at("window_seconds").get<double>();
  c.lr_g = j.at("lr_g").get<double>();
  c.lr_d = j.at("lr_d").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.negative_slope = j.at("negative_slope").get<double>();
  c.data_gain = j.at("data_gain").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GanModel& model) {
  GanModel& m = const_cast<GanModel&>(model);  // parameter_table needs mutable refs
  auto entries = parameter_table(m.generator, "g");
  auto d_entries = parameter_table(m.discriminator, "d");
  entries.insert(entries.end(), d_entries.begin(), d_entries.end());

  nlohmann::json header;
  header["version"] = 1;
  header["config"] = config_to_json(model.config);
  header["norm"] = {{"mean", model.norm.mean}, {"stddev", model.norm.stddev}};
  header["disc_feature_layers"] = model.disc_feature_layers;
  nlohmann::json g_specs = nlohmann::json::array();
  for (std::size_t i = 0; i < m.generator.layer_count(); ++i) {
    g_specs.push_back(spec_to_json(m.generator.spec(i)));
  }
  nlohmann::json d_specs = nlohmann::json::array();
  for (std::size_t i = 0; i < m.discriminator.layer_count(); ++i) {
    d_specs.push_back(spec_to_json(m.discriminator.spec(i)));
  }
  header["generator"] = g_specs;
  header["discriminator"] = d_specs;
  header["history"] = model.history;

  nlohmann::json params = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : entries) {
    params.push_back({{"net", e.net},
                      {"layer", e.layer},
                      {"name", e.name},
                      {"offset", offset},
                      {"count", e.vec->size()}});
    offset += e.vec->size();
  }
  header["params"] = params;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, 8);
  const std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(header_str.data(), header_len);
  std::vector<float> blob;
  blob.reserve(offset);
  for (const auto& e : entries) {
    for (double v : *e.vec) blob.push_back(static_cast<float>(v));
  }
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw IoError("write failed for " + path.string());
}

GanModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("not a gan checkpoint: " + path.string());
  }
  std::uint32_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 4);
  if (!in) throw DataError("checkpoint truncated: " + path.string());
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw DataError("checkpoint truncated: " + path.string());
  nlohmann::json header = nlohmann::json::parse(header_str, nullptr, false);
  if (header.is_discarded()) throw DataError("checkpoint header is not valid JSON");
  if (header.at("version").get<int>() != 1) throw DataError("unsupported checkpoint version");

  GanModel model;
  model.config = config_from_json(header.at("config"));
  for (std::size_t c = 0; c < 3; ++c) {
    model.norm.mean[c] = header.at("norm").at("mean")[c].get<double>();
    model.norm.stddev[c] = header.at("norm").at("stddev")[c].get<double>();
  }
  model.disc_feature_layers = header.at("disc_feature_layers").get<std::size_t>();
  for (const auto& j : header.at("generator")) model.generator.add(spec_from_json(j));
  for (const auto& j : header.at("discriminator")) model.discriminator.add(spec_from_json(j));
  for (const auto& h : header.at("history")) {
    model.history.push_back({h[0].get<double>(), h[1].get<double>()});
  }

  auto entries = parameter_table(model.generator, "g");
  auto d_entries = parameter_table(model.discriminator, "d");
  entries.insert(entries.end(), d_entries.begin(), d_entries.end());

  std::size_t total = 0;
  const auto& params = header.at("params");
  if (params.size() != entries.size()) throw DataError("checkpoint parameter table mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& pj = params[i];
    if (pj.at("net").get<std::string>() != entries[i].net ||
        pj.at("layer").get<std::size_t>() != entries[i].layer ||
        pj.at("name").get<std::string>() != entries[i].name ||
        pj.at("offset").get<std::size_t>() != total ||
        pj.at("count").get<std::size_t>() != entries[i].vec->size()) {
      throw DataError("checkpoint parameter table mismatch at entry " + std::to_string(i));
    }
    total += entries[i].vec->size();
  }

  std::vector<float> blob(total);
  in.read(reinterpret_cast<char*>(blob.data()),
          static_cast<std::streamsize>(total * sizeof(float)));
  if (!in) throw DataError("checkpoint parameter blob truncated");
  in.peek();
  if (!in.eof()) throw DataError("checkpoint has trailing bytes");

  std::size_t cursor = 0;
  for (const auto& e : entries) {
    for (double& v : *e.vec) v = static_cast<double>(blob[cursor++]);
  }
  return model;
}

std::string file_checksum_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(out);
}

}  // namespace accguard::gan
