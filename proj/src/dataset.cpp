#include "accguard/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "accguard/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "accw serialization assumes a little-endian host");

namespace accguard::data {

namespace {
constexpr double kSampleRateHz = 30.0;
constexpr char kMagic[4] = {'A', 'C', 'C', 'W'};

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("accw: unexpected end of file");
  return value;
}
}  // namespace

std::vector<Window> extract_windows(const sim::Trajectory& traj, const ExtractOptions& opts) {
  if (!(opts.window_s > 0.0) || opts.window_s > 12.0) {
    throw std::invalid_argument("extract_windows: window_s must be in (0, 12]");
  }
  if (!(opts.stride_s > 0.0)) throw std::invalid_argument("extract_windows: stride_s must be > 0");

  const std::size_t T = static_cast<std::size_t>(std::llround(opts.window_s * kSampleRateHz));
  const std::size_t stride =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opts.stride_s * kSampleRateHz)));
  if (T > traj.n_steps) {
    throw std::invalid_argument("extract_windows: window of " + std::to_string(T) +
                                " samples exceeds trajectory length " +
                                std::to_string(traj.n_steps));
  }

  const std::size_t n = static_cast<std::size_t>(traj.n_vehicles);
  std::vector<Window> windows;
  for (std::size_t k = 0; k < n; ++k) {
    if (opts.class_filter && traj.veh_class[k] != *opts.class_filter) continue;
    for (std::size_t start = 0; start + T <= traj.n_steps; start += stride) {
      Window w;
      w.T = static_cast<int>(T);
      w.veh_id = static_cast<std::uint32_t>(k + 1);
      w.t_start = static_cast<float>(traj.time[start]);
      w.run_id = opts.run_id;
      w.cls = traj.veh_class[k];
      w.values.resize(3 * T);
      bool attacked = false;
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t i = (start + t) * n + k;
        w.values[t] = static_cast<float>(traj.speed[i]);
        w.values[T + t] = static_cast<float>(traj.gap[i]);
        w.values[2 * T + t] = static_cast<float>(traj.accel[i]);
        attacked = attacked || traj.attacked[i] != 0;
      }
      w.label = attacked ? 1 : 0;
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

NormStats fit_norm(const std::vector<Window>& train_windows) {
  if (train_windows.empty()) throw DataError("fit_norm: no training windows");
  NormStats stats;
  std::array<double, 3> sum{}, sq{};
  std::size_t count = 0;
  for (const Window& w : train_windows) {
    if (w.label != 0) throw DataError("fit_norm: attacked window in training set");
    const std::size_t T = static_cast<std::size_t>(w.T);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t t = 0; t < T; ++t) {
        const double v = static_cast<double>(w.values[c * T + t]);
        sum[c] += v;
        sq[c] += v * v;
      }
    }
    count += T;
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const double m = sum[c] / static_cast<double>(count);
    const double var = sq[c] / static_cast<double>(count) - m * m;
    if (!(var > 0.0)) {
      throw DataError("fit_norm: channel " + std::to_string(c) + " has zero variance");
    }
    stats.mean[c] = m;
    stats.stddev[c] = std::sqrt(var);
  }
  return stats;
}

void apply_norm(const NormStats& stats, std::span<double> values, std::size_t T) {
  if (values.size() != 3 * T) throw ShapeError("apply_norm: buffer is not 3*T");
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      values[c * T + t] = (values[c * T + t] - stats.mean[c]) / stats.stddev[c];
    }
  }
}

void invert_norm(const NormStats& stats, std::span<double> values, std::size_t T) {
  if (values.size() != 3 * T) throw ShapeError("invert_norm: buffer is not 3*T");
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      values[c * T + t] = values[c * T + t] * stats.stddev[c] + stats.mean[c];
    }
  }
}

nn::Batch to_normalized_batch(std::span<const Window> windows, const NormStats& stats,
                              std::size_t model_length) {
  if (windows.empty()) throw DataError("to_normalized_batch: no windows");
  const std::size_t T = static_cast<std::size_t>(windows[0].T);
  nn::Batch raw(windows.size(), 3, T);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Window& w = windows[i];
    if (static_cast<std::size_t>(w.T) != T) {
      throw ShapeError("to_normalized_batch: mixed window lengths");
    }
    double* dst = raw.sample(i);
    for (std::size_t j = 0; j < 3 * T; ++j) dst[j] = static_cast<double>(w.values[j]);
    apply_norm(stats, std::span<double>(dst, 3 * T), T);
  }
  return nn::resample_linear(raw, model_length);
}

DatasetSplit split(const std::vector<Window>& windows, std::uint64_t seed, const SplitSpec& spec) {
  std::vector<std::size_t> normal_idx, attacked_idx;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    (windows[i].label == 0 ? normal_idx : attacked_idx).push_back(i);
  }

  const std::size_t need_attacked = spec.test_per_class;
  const std::size_t n_test = 2 * spec.test_per_class;
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(spec.val_to_test_ratio * static_cast<double>(n_test)));
  const std::size_t need_normal = spec.test_per_class + n_val;

  if (attacked_idx.size() < need_attacked) {
    throw DataError("split: need " + std::to_string(need_attacked) + " attacked windows, have " +
                    std::to_string(attacked_idx.size()));
  }
  if (normal_idx.size() < need_normal + 1) {
    throw DataError("split: need " + std::to_string(need_normal) +
                    " normal windows for test+validation plus at least one for training, have " +
                    std::to_string(normal_idx.size()));
  }

  RngStream normal_rng(derive_seed(seed, 0x5e1fu, 0));
  RngStream attacked_rng(derive_seed(seed, 0x5e1fu, 1));
  normal_rng.shuffle(normal_idx);
  attacked_rng.shuffle(attacked_idx);

  DatasetSplit out;
  out.test.reserve(n_test);
  for (std::size_t i = 0; i < spec.test_per_class; ++i) {
    out.test.push_back(windows[attacked_idx[i]]);
  }
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spec.test_per_class; ++i) {
    out.test.push_back(windows[normal_idx[cursor++]]);
  }
  out.validation.reserve(n_val);
  for (std::size_t i = 0; i < n_val; ++i) out.validation.push_back(windows[normal_idx[cursor++]]);
  out.train.reserve(normal_idx.size() - cursor);
  for (; cursor < normal_idx.size(); ++cursor) out.train.push_back(windows[normal_idx[cursor]]);
  return out;
}

void write_accw(const std::filesystem::path& path, const std::vector<Window>& windows,
                const std::optional<NormStats>& norm, const nlohmann::json& provenance) {
  if (windows.empty()) throw DataError("write_accw: no windows");
  const std::uint32_t T = static_cast<std::uint32_t>(windows[0].T);
  for (const Window& w : windows) {
    if (static_cast<std::uint32_t>(w.T) != T) throw DataError("write_accw: mixed window lengths");
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put<std::uint8_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(windows.size()));
  put<std::uint32_t>(out, 3);
  put<std::uint32_t>(out, T);
  for (const Window& w : windows) {
    put<std::uint8_t>(out, w.label);
    put<std::uint32_t>(out, w.veh_id);
    put<float>(out, w.t_start);
    out.write(reinterpret_cast<const char*>(w.values.data()),
              static_cast<std::streamsize>(w.values.size() * sizeof(float)));
  }

  nlohmann::json footer;
  if (norm) {
    footer["norm"] = {{"mean", norm->mean}, {"stddev", norm->stddev}};
  } else {
    footer["norm"] = nullptr;
  }
  footer["provenance"] = provenance;
  const std::string footer_str = footer.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(footer_str.size()));
  out.write(footer_str.data(), static_cast<std::streamsize>(footer_str.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

AccwFile read_accw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("not an accw dataset: " + path.string());
  }
  const auto version = get<std::uint8_t>(in);
  if (version != 1) throw DataError("unsupported accw version " + std::to_string(version));
  const auto n_windows = get<std::uint32_t>(in);
  const auto channels = get<std::uint32_t>(in);
  const auto T = get<std::uint32_t>(in);
  if (channels != 3) throw DataError("accw: expected 3 channels");
  if (n_windows == 0) throw DataError("accw: file contains zero windows");

  AccwFile file;
  file.windows.resize(n_windows);
  for (auto& w : file.windows) {
    w.T = static_cast<int>(T);
    w.label = get<std::uint8_t>(in);
    w.veh_id = get<std::uint32_t>(in);
    w.t_start = get<float>(in);
    w.values.resize(3 * T);
    in.read(reinterpret_cast<char*>(w.values.data()),
            static_cast<std::streamsize>(w.values.size() * sizeof(float)));
    if (!in) throw DataError("accw: truncated window data");
  }

  const auto footer_len = get<std::uint32_t>(in);
  std::string footer_str(footer_len, '\0');
  in.read(footer_str.data(), footer_len);
  if (!in) throw DataError("accw: truncated footer");
  in.peek();
  if (!in.eof()) throw DataError("accw: trailing bytes after footer");

  nlohmann::json footer = nlohmann::json::parse(footer_str, nullptr, false);
  if (footer.is_discarded()) throw DataError("accw: footer is not valid JSON");
  if (footer.contains("norm") && !footer["norm"].is_null()) {
    NormStats stats;
    for (std::size_t c = 0; c < 3; ++c) {
      stats.mean[c] = footer["norm"]["mean"][c].get<double>();
      stats.stddev[c] = footer["norm"]["stddev"][c].get<double>();
    }
    file.norm = stats;
  }
  if (footer.contains("provenance")) file.provenance = footer["provenance"];
  return file;
}

}  // namespace accguard::data
