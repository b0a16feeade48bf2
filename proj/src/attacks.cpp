#include "accguard/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "accguard/errors.hpp"

namespace accguard::attacks {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::ControlInjection: return "control";
    case AttackKind::SensorFalsification: return "sensor";
    case AttackKind::DenialOfService: return "dos";
  }
  return "none";
}

std::optional<AttackKind> kind_from_name(std::string_view name) {
  if (name == "none") return AttackKind::None;
  if (name == "control") return AttackKind::ControlInjection;
  if (name == "sensor") return AttackKind::SensorFalsification;
  if (name == "dos") return AttackKind::DenialOfService;
  return std::nullopt;
}

bool AttackSpec::effective() const {
  switch (kind) {
    case AttackKind::None: return false;
    case AttackKind::ControlInjection: return xi_std > 0.0;
    case AttackKind::SensorFalsification: return lambda1_std > 0.0 || lambda2_std > 0.0;
    case AttackKind::DenialOfService: return omega > 0.0;
  }
  return false;
}

void AttackSpec::resolve_window(double duration) {
  if (active_end >= 0.0) return;  // user already set a window
  if (kind == AttackKind::DenialOfService) {
    active_start = 80.0;
    active_end = 130.0;
  } else {
    active_start = 0.0;
    active_end = duration;
  }
}

void AttackSpec::validate() const {
  if (xi_std < 0.0 || lambda1_std < 0.0 || lambda2_std < 0.0) {
    throw ConfigError("attack std-devs must be >= 0");
  }
  if (omega < 0.0) throw ConfigError("attack omega must be >= 0");
  if (target_fraction < 0.0 || target_fraction > 1.0) {
    throw ConfigError("attack target_fraction must be in [0, 1]");
  }
  if (active_end >= 0.0 && active_start > active_end) {
    throw ConfigError("attack active_start must be <= active_end");
  }
}

MeasurementHistory::MeasurementHistory(std::size_t capacity, double dt)
    : ring_(std::max<std::size_t>(capacity, 1)), dt_(dt) {}

void MeasurementHistory::append(double gap, double rel_speed) {
  ring_[count_ % ring_.size()] = Sample{gap, rel_speed};
  ++count_;
}

MeasurementHistory::Sample MeasurementHistory::delayed(double t, double omega) const {
  if (count_ == 0) throw StateError("MeasurementHistory::delayed on empty history");
  const long long target = std::llround((t - omega) / dt_);
  const long long newest = static_cast<long long>(count_) - 1;
  const long long oldest =
      std::max<long long>(0, static_cast<long long>(count_) - static_cast<long long>(ring_.size()));
  const long long idx = std::clamp(target, oldest, newest);
  return ring_[static_cast<std::size_t>(idx) % ring_.size()];
}

double type1_accel(double a_clean, double xi, const cf::AccelBounds& bounds) {
  return cf::clamp_accel(a_clean + xi, bounds);
}

cf::CfInput type2_measurement(const cf::CfInput& input, double l1, double l2) {
  return cf::CfInput{std::max(input.gap + l1, kGapFloor), input.speed, input.rel_speed + l2};
}

MeasurementHistory::Sample type3_measurement(const MeasurementHistory& history, double t,
                                             double omega) {
  return history.delayed(t, omega);
}

}  // namespace accguard::attacks
