#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "accguard/nn.hpp"
#include "accguard/ring_sim.hpp"

namespace accguard::data {

// Fixed-length 3-channel sample, channels ordered (speed, gap, acceleration),
// stored as the 32-bit floats that go to disk. label 1 = attacked.
struct Window {
  int T = 0;
  std::uint8_t label = 0;
  std::uint32_t veh_id = 0;
  float t_start = 0.0f;
  std::uint32_t run_id = 0;                          // in-memory provenance
  sim::VehicleClass cls = sim::VehicleClass::Human;  // in-memory provenance
  std::vector<float> values;                         // channel-major, 3*T
};

// Per-channel z-score statistics fitted on normal training windows.
struct NormStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

struct DatasetSplit {
  std::vector<Window> train;       // normal only
  std::vector<Window> validation;  // normal only
  std::vector<Window> test;        // balanced attacked/normal
};

struct ExtractOptions {
  double window_s = 2.0;
  double stride_s = 2.0;
  std::optional<sim::VehicleClass> class_filter;
  std::uint32_t run_id = 0;
};

// Sliding windows of T = round(window_s * 30) samples per selected vehicle.
// A window is labeled attacked iff any of its records carries the attacked
// flag (the vehicle is targeted and the attack window is active there).
std::vector<Window> extract_windows(const sim::Trajectory& traj, const ExtractOptions& opts);

// Population mean/std per channel over label-0 windows; throws DataError on
// a degenerate (constant) channel or any attacked window in the input.
NormStats fit_norm(const std::vector<Window>& train_windows);

// z-score / inverse z-score of a channel-major (3, T) double buffer.
void apply_norm(const NormStats& stats, std::span<double> values, std::size_t T);
void invert_norm(const NormStats& stats, std::span<double> values, std::size_t T);

// Widen to double, z-score, and resample every window to model_length.
nn::Batch to_normalized_batch(std::span<const Window> windows, const NormStats& stats,
                              std::size_t model_length);

struct SplitSpec {
  std::size_t test_per_class = 200;
  double val_to_test_ratio = 4.0;  // |validation| = ratio * |test|
};

// Seeded shuffle split: balanced test, normal-only validation sized by the
// ratio, train takes the remaining normal windows. Throws DataError naming
// the deficit when the pools are too small.
DatasetSplit split(const std::vector<Window>& windows, std::uint64_t seed, const SplitSpec& spec);

struct AccwFile {
  std::vector<Window> windows;
  std::optional<NormStats> norm;
  nlohmann::json provenance;
};

// Binary layout: magic "ACCW", version byte 1, little-endian u32 n_windows,
// channels (3), T; per window u8 label, u32 veh_id, f32 t_start, 3*T f32
// channel-major values; then u32 footer length and the JSON footer holding
// the norm stats and provenance.
void write_accw(const std::filesystem::path& path, const std::vector<Window>& windows,
                const std::optional<NormStats>& norm, const nlohmann::json& provenance);
AccwFile read_accw(const std::filesystem::path& path);

}  // namespace accguard::data
