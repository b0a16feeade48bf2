#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "accguard/ring_sim.hpp"

namespace accguard::fd {

struct FdPoint {
  double density_vpkm = 0.0;    // N / L
  double mean_speed_kmh = 0.0;  // fleet-and-time mean over the window
  double flow_vph = 0.0;        // density * mean_speed, exactly
  double ring_m = 0.0;
  double mpr = 0.0;
  attacks::AttackKind attack = attacks::AttackKind::None;
  int seed_count = 0;
};

struct FdCurve {
  std::vector<FdPoint> points;  // ordered by density
  double capacity_vph = 0.0;
  double critical_density_vpkm = 0.0;
  // Largest simulated density whose flow falls below 5% of capacity;
  // empty when the sweep never reaches that regime.
  std::optional<double> jam_density_vpkm;
};

// Mean speed of all vehicles over records with t in [warmup, warmup+window),
// converted to km/h; density N/L; flow = density * speed.
FdPoint measure_fd_point(const sim::Trajectory& traj, double warmup_s, double window_s);

struct SweepConfig {
  sim::SimConfig base;           // ring_length and duration are overridden
  std::vector<double> lengths_m; // ascending
  int seeds_per_length = 3;
  double warmup_s = 300.0;
  double measure_s = 300.0;
  int jobs = 1;
};

// One simulation per (length, seed); per length the mean speed is averaged
// over seeds before the flow product. Deterministic fold order.
FdCurve sweep_fd(const SweepConfig& cfg);

// Max flow and its density; ties break toward the lower density.
std::pair<double, double> capacity_point(const FdCurve& curve);

// count log-spaced lengths from lo to hi inclusive.
std::vector<double> log_spaced_lengths(double lo, double hi, int count);

// CSV: density_vpkm,flow_vph,mean_speed_kmh,ring_m,mpr,attack,seed_count
// Float columns carry round-trip precision so flow = density * speed is
// recomputable from any row.
void write_fd_csv(const FdCurve& curve, const std::filesystem::path& path);
std::string summary_json(const FdCurve& curve);

}  // namespace accguard::fd
