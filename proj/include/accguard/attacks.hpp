#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "accguard/car_following.hpp"

namespace accguard::attacks {

enum class AttackKind { None, ControlInjection, SensorFalsification, DenialOfService };

std::string to_string(AttackKind kind);
std::optional<AttackKind> kind_from_name(std::string_view name);  // none|control|sensor|dos

// Corrupted gaps are floored here before they can reach the IDM; a physical
// range sensor never reports a non-positive distance.
inline constexpr double kGapFloor = 0.1;  // m

// One attack scenario. Only the parameters relevant to `kind` are consulted.
struct AttackSpec {
  AttackKind kind = AttackKind::None;
  double xi_std = 0.0;      // std-dev of the acceleration injection (m/s^2)
  double lambda1_std = 0.0; // std-dev of the gap corruption (m)
  double lambda2_std = 0.0; // std-dev of the relative-speed corruption (m/s)
  double omega = 0.0;       // sensor delay (s)
  // Active window in simulation time; negative end means "resolve to a
  // per-kind default at config resolution" (see resolve_window).
  double active_start = 0.0;
  double active_end = -1.0;
  double target_fraction = 0.5;  // fraction of ACC vehicles attacked

  bool active_at(double t) const { return t >= active_start && t <= active_end; }

  // A spec whose parameters cannot change any trajectory (zero magnitudes,
  // zero delay) behaves exactly as kind = None everywhere downstream.
  bool effective() const;

  // Fill the default active window: whole run for control/sensor injection,
  // the 80-130 s interval for denial of service.
  void resolve_window(double duration);

  void validate() const;  // throws ConfigError
};

// Per-vehicle ring buffer of (gap, rel_speed) sensor samples, appended once
// per simulation step in time order. Sample i corresponds to time i*dt.
class MeasurementHistory {
 public:
  MeasurementHistory(std::size_t capacity, double dt);

  void append(double gap, double rel_speed);

  std::size_t size() const { return count_; }
  double dt() const { return dt_; }

  struct Sample {
    double gap;
    double rel_speed;
  };

  // Sample at time t - omega, rounded to the nearest stored step; clamped to
  // the oldest retained sample during cold start. Throws StateError if empty.
  Sample delayed(double t, double omega) const;

 private:
  std::vector<Sample> ring_;
  std::size_t count_ = 0;  // total samples ever appended
  double dt_;
};

// Type I: additive acceleration injection, clamped to physical bounds.
// The caller draws xi (keeps this function deterministic and testable).
double type1_accel(double a_clean, double xi, const cf::AccelBounds& bounds);

// Type II: additive corruption of the (gap, rel_speed) measurement pair.
// Own speed is never attacked. The corrupted gap is floored at kGapFloor.
cf::CfInput type2_measurement(const cf::CfInput& input, double l1, double l2);

// Type III: replay of the sensor sample from time t - omega.
MeasurementHistory::Sample type3_measurement(const MeasurementHistory& history, double t,
                                             double omega);

}  // namespace accguard::attacks
