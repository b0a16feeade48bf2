#pragma once

#include <optional>
#include <string_view>

namespace accguard::cf {

// Intelligent driver model parameters [alpha, beta, delta, eta, tau, v_d]
// for one driver class. All six must be strictly positive.
struct IdmParams {
  double alpha;  // max acceleration (m/s^2)
  double beta;   // comfortable deceleration (m/s^2)
  double delta;  // acceleration exponent
  double eta;    // jam distance (m)
  double tau;    // time gap (s)
  double v_d;    // desired speed (m/s)

  void validate() const;  // throws ConfigError
};

IdmParams acc_preset();    // calibrated ACC driving style
IdmParams human_preset();  // calibrated human driving style
std::optional<IdmParams> preset_by_name(std::string_view name);  // "acc" | "human"

struct AccelBounds {
  double min_accel = -8.0;  // m/s^2
  double max_accel = 3.0;   // m/s^2

  void validate() const;  // requires min < 0 < max
};

// One car-following measurement: gap to leader, own speed, relative speed
// (v_lead - v). Gap must be strictly positive before reaching idm_accel.
struct CfInput {
  double gap;        // m
  double speed;      // m/s
  double rel_speed;  // m/s
};

// Desired gap s_hat(v, dv) = eta + tau*v - v*dv / (2*sqrt(alpha*beta)).
// May be negative for large closing-rate dv; it is squared downstream.
double desired_gap(const IdmParams& p, double v, double dv);

// Unclamped IDM acceleration alpha*[1 - (v/v_d)^delta - (s_hat/s)^2].
// Throws std::domain_error if input.gap <= 0 (the caller sanitizes gaps).
double idm_accel(const IdmParams& p, const CfInput& input);

// min(max(a, min_accel), max_accel); idempotent.
double clamp_accel(double a, const AccelBounds& bounds);

}  // namespace accguard::cf
