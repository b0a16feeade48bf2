#include "accguard/car_following.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "accguard/errors.hpp"

namespace accguard::cf {

void IdmParams::validate() const {
  const double fields[] = {alpha, beta, delta, eta, tau, v_d};
  const char* names[] = {"alpha", "beta", "delta", "eta", "tau", "v_d"};
  for (int i = 0; i < 6; ++i) {
    if (!(fields[i] > 0.0) || !std::isfinite(fields[i])) {
      throw ConfigError(std::string("IdmParams.") + names[i] + " must be strictly positive");
    }
  }
}

IdmParams acc_preset() { return IdmParams{0.6, 5.2, 15.5, 6.3, 2.2, 44.1}; }

IdmParams human_preset() { return IdmParams{1.06, 2.0, 4.0, 3.4, 1.26, 30.0}; }

std::optional<IdmParams> preset_by_name(std::string_view name) {
  if (name == "acc") return acc_preset();
  if (name == "human") return human_preset();
  return std::nullopt;
}

void AccelBounds::validate() const {
  if (!(min_accel < 0.0) || !(max_accel > 0.0)) {
    throw ConfigError("AccelBounds requires min_accel < 0 < max_accel");
  }
}

double desired_gap(const IdmParams& p, double v, double dv) {
  return p.eta + p.tau * v - v * dv / (2.0 * std::sqrt(p.alpha * p.beta));
}

double idm_accel(const IdmParams& p, const CfInput& input) {
  if (!(input.gap > 0.0)) {
    throw std::domain_error("idm_accel: non-positive gap " + std::to_string(input.gap) +
                            " (caller must sanitize)");
  }
  const double s_hat = desired_gap(p, input.speed, input.rel_speed);
  const double free_term = std::pow(input.speed / p.v_d, p.delta);
  const double gap_ratio = s_hat / input.gap;
  return p.alpha * (1.0 - free_term - gap_ratio * gap_ratio);
}

double clamp_accel(double a, const AccelBounds& bounds) {
  return std::min(std::max(a, bounds.min_accel), bounds.max_accel);
}

}  // namespace accguard::cf
