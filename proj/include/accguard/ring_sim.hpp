#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "accguard/attacks.hpp"
#include "accguard/car_following.hpp"
#include "accguard/rng.hpp"

namespace accguard::sim {

enum class VehicleClass { Human, Acc };

const char* class_name(VehicleClass cls);  // "HV" | "ACC"

struct SimConfig {
  double ring_length = 200.0;  // m
  int n_vehicles = 20;
  double acc_mpr = 0.0;  // fraction of ACC vehicles
  attacks::AttackSpec attack;
  double dt = 0.033;       // s (30 Hz)
  double duration = 250.0;  // s
  std::uint64_t seed = 0;
  cf::AccelBounds accel_bounds{};
  cf::IdmParams acc_params = cf::acc_preset();
  cf::IdmParams human_params = cf::human_preset();

  void validate() const;  // throws ConfigError

  // Copy with the attack window materialized against `duration` and
  // zero-magnitude attack specs normalized to kind = None (they cannot
  // change any trajectory, so they must not change any flag either).
  SimConfig resolved() const;
};

struct VehicleState {
  int id = 0;  // 1..N; vehicle 1's leader is vehicle N
  VehicleClass cls = VehicleClass::Human;
  bool attacked = false;  // member of the targeted set
  double x = 0.0;         // position (m, modulo ring length)
  double v = 0.0;         // speed (m/s, >= 0)
  double a = 0.0;         // last applied acceleration (m/s^2)
  double gap = 0.0;       // ring distance to leader (m)
};

// Column-major per-step records; index = step * n_vehicles + (veh_id - 1).
struct Trajectory {
  SimConfig config;  // resolved metadata copy
  int n_vehicles = 0;
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::vector<VehicleClass> veh_class;      // per vehicle
  std::vector<std::uint8_t> veh_attacked;   // per vehicle, targeted set
  std::vector<double> time;                 // per step
  std::vector<double> pos, speed, accel, gap;
  std::vector<std::uint8_t> attacked;       // per record: targeted AND window active
  std::vector<std::pair<std::size_t, int>> collisions;  // (step, veh_id), gap <= 0

  std::size_t idx(std::size_t step, int veh_id) const {
    return step * static_cast<std::size_t>(n_vehicles) + static_cast<std::size_t>(veh_id - 1);
  }
  double duration() const { return static_cast<double>(n_steps) * dt; }
};

// Evenly spaced standstill start: every gap = L/N, all speeds zero except a
// small seeded perturbation on vehicle 1. Seeded class assignment and, for
// effective attacks, seeded choice of the targeted ACC subset.
std::vector<VehicleState> init_ring(const SimConfig& config, RngStream& rng);

// Measurement -> attack path -> IDM -> clamp for every vehicle at time t,
// using only time-t states (synchronous). Appends to histories and draws
// attack noise from the per-vehicle streams. Throws NumericError on NaN.
std::vector<double> compute_accels(const std::vector<VehicleState>& states,
                                   const SimConfig& resolved_config,
                                   std::vector<attacks::MeasurementHistory>& histories,
                                   std::vector<RngStream>& attack_streams, double t);

// Synchronous Euler advance; pre-update speeds on every right-hand side.
// Speeds are floored at zero after the update.
void advance_states(std::vector<VehicleState>& states, const std::vector<double>& accels,
                    double dt, double ring_length);

// Full run: duration/dt steps, one record per vehicle per step (state at the
// step time plus the acceleration applied there). Deterministic per seed.
Trajectory run(const SimConfig& config);

// CSV: time_s,veh_id,class,attacked,pos_m,speed_mps,accel_mps2,gap_m
// times at 3 decimals, other floats at 6 significant digits, LF endings.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace accguard::sim
