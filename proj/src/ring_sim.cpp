#include "accguard/ring_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "accguard/errors.hpp"

namespace accguard::sim {

namespace {
constexpr std::uint64_t kAttackStreamSalt = 0xacc0a77ac4ULL;
}

const char* class_name(VehicleClass cls) { return cls == VehicleClass::Acc ? "ACC" : "HV"; }

void SimConfig::validate() const {
  if (!(ring_length > 0.0)) throw ConfigError("ring_length must be > 0");
  if (n_vehicles < 2) throw ConfigError("n_vehicles must be >= 2");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(duration > 0.0)) throw ConfigError("duration must be > 0");
  if (acc_mpr < 0.0 || acc_mpr > 1.0) throw ConfigError("acc_mpr must be in [0, 1]");
  attack.validate();
  accel_bounds.validate();
  acc_params.validate();
  human_params.validate();
}

SimConfig SimConfig::resolved() const {
  SimConfig out = *this;
  out.attack.resolve_window(duration);
  if (!out.attack.effective()) {
    out.attack.kind = attacks::AttackKind::None;
  }
  return out;
}

std::vector<VehicleState> init_ring(const SimConfig& config, RngStream& rng) {
  config.validate();
  const int n = config.n_vehicles;
  const double spacing = config.ring_length / n;

  std::vector<VehicleState> states(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    VehicleState& s = states[static_cast<std::size_t>(k - 1)];
    s.id = k;
    s.x = (n - k) * spacing;
    s.v = 0.0;
    s.a = 0.0;
    s.gap = spacing;
  }
  // The written form N(0, 0.5) is read as variance, matching the treatment
  // of the attack magnitudes.
  states[0].v = std::max(0.0, rng.gaussian(0.0, std::sqrt(0.5)));

  const int n_acc = static_cast<int>(std::llround(config.acc_mpr * n));
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 1);
  rng.shuffle(ids);
  std::vector<int> acc_ids(ids.begin(), ids.begin() + n_acc);
  for (int id : acc_ids) states[static_cast<std::size_t>(id - 1)].cls = VehicleClass::Acc;

  if (config.attack.kind != attacks::AttackKind::None && config.attack.effective()) {
    const int n_attacked =
        static_cast<int>(std::llround(config.attack.target_fraction * n_acc));
    rng.shuffle(acc_ids);
    for (int i = 0; i < n_attacked; ++i) {
      states[static_cast<std::size_t>(acc_ids[static_cast<std::size_t>(i)] - 1)].attacked = true;
    }
  }
  return states;
}

std::vector<double> compute_accels(const std::vector<VehicleState>& states,
                                   const SimConfig& config,
                                   std::vector<attacks::MeasurementHistory>& histories,
                                   std::vector<RngStream>& attack_streams, double t) {
  const std::size_t n = states.size();
  const attacks::AttackSpec& atk = config.attack;
  std::vector<double> accels(n);

  for (std::size_t k = 0; k < n; ++k) {
    const VehicleState& veh = states[k];
    const VehicleState& lead = states[k == 0 ? n - 1 : k - 1];
    const double dv = lead.v - veh.v;

    histories[k].append(veh.gap, dv);

    double meas_gap = veh.gap;
    double meas_dv = dv;
    const bool under_attack =
        veh.attacked && atk.kind != attacks::AttackKind::None && atk.active_at(t);

    if (under_attack && atk.kind == attacks::AttackKind::SensorFalsification) {
      const double l1 = attack_streams[k].gaussian(0.0, atk.lambda1_std);
      const double l2 = attack_streams[k].gaussian(0.0, atk.lambda2_std);
      const cf::CfInput corrupted =
          attacks::type2_measurement(cf::CfInput{meas_gap, veh.v, meas_dv}, l1, l2);
      meas_gap = corrupted.gap;
      meas_dv = corrupted.rel_speed;
    } else if (under_attack && atk.kind == attacks::AttackKind::DenialOfService) {
      const auto sample = attacks::type3_measurement(histories[k], t, atk.omega);
      meas_gap = sample.gap;
      meas_dv = sample.rel_speed;
    }

    const cf::CfInput input{std::max(meas_gap, attacks::kGapFloor), veh.v, meas_dv};
    const cf::IdmParams& params =
        veh.cls == VehicleClass::Acc ? config.acc_params : config.human_params;
    const double raw = cf::idm_accel(params, input);
    if (!std::isfinite(raw)) {
      throw NumericError("non-finite acceleration for vehicle " + std::to_string(veh.id) +
                         " at t=" + std::to_string(t));
    }

    double a;
    if (under_attack && atk.kind == attacks::AttackKind::ControlInjection) {
      a = attacks::type1_accel(raw, attack_streams[k].gaussian(0.0, atk.xi_std),
                               config.accel_bounds);
    } else {
      a = cf::clamp_accel(raw, config.accel_bounds);
    }
    accels[k] = a;
  }
  return accels;
}

void advance_states(std::vector<VehicleState>& states, const std::vector<double>& accels,
                    double dt, double ring_length) {
  const std::size_t n = states.size();
  std::vector<double> dv(n);
  for (std::size_t k = 0; k < n; ++k) {
    const VehicleState& lead = states[k == 0 ? n - 1 : k - 1];
    dv[k] = lead.v - states[k].v;
  }
  for (std::size_t k = 0; k < n; ++k) {
    VehicleState& veh = states[k];
    veh.gap += dv[k] * dt;
    veh.x = std::fmod(veh.x + veh.v * dt, ring_length);
    if (veh.x < 0.0) veh.x += ring_length;
    veh.v = std::max(0.0, veh.v + accels[k] * dt);
    veh.a = accels[k];
  }
}

Trajectory run(const SimConfig& user_config) {
  user_config.validate();
  const SimConfig config = user_config.resolved();
  const std::size_t n = static_cast<std::size_t>(config.n_vehicles);
  const std::size_t n_steps = static_cast<std::size_t>(std::llround(config.duration / config.dt));

  RngStream init_stream(derive_seed(config.seed, 0x1417u));
  std::vector<VehicleState> states = init_ring(config, init_stream);

  const std::size_t hist_capacity =
      static_cast<std::size_t>(std::llround(config.attack.omega / config.dt)) + 2;
  std::vector<attacks::MeasurementHistory> histories;
  std::vector<RngStream> attack_streams;
  histories.reserve(n);
  attack_streams.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    histories.emplace_back(hist_capacity, config.dt);
    attack_streams.emplace_back(derive_seed(config.seed, kAttackStreamSalt, k + 1));
  }

  Trajectory traj;
  traj.config = config;
  traj.n_vehicles = config.n_vehicles;
  traj.dt = config.dt;
  traj.n_steps = n_steps;
  traj.veh_class.resize(n);
  traj.veh_attacked.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    traj.veh_class[k] = states[k].cls;
    traj.veh_attacked[k] = states[k].attacked ? 1 : 0;
  }
  traj.time.resize(n_steps);
  traj.pos.resize(n_steps * n);
  traj.speed.resize(n_steps * n);
  traj.accel.resize(n_steps * n);
  traj.gap.resize(n_steps * n);
  traj.attacked.resize(n_steps * n);

  for (std::size_t step = 0; step < n_steps; ++step) {
    const double t = static_cast<double>(step) * config.dt;
    std::vector<double> accels;
    try {
      accels = compute_accels(states, config, histories, attack_streams, t);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (step " + std::to_string(step) + ")");
    }

    traj.time[step] = t;
    const bool window_active = config.attack.kind != attacks::AttackKind::None &&
                               config.attack.active_at(t);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = step * n + k;
      traj.pos[i] = states[k].x;
      traj.speed[i] = states[k].v;
      traj.accel[i] = accels[k];
      traj.gap[i] = states[k].gap;
      traj.attacked[i] = (window_active && states[k].attacked) ? 1 : 0;
      if (states[k].gap <= 0.0) traj.collisions.emplace_back(step, states[k].id);
    }

    advance_states(states, accels, config.dt, config.ring_length);
  }
  return traj;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "time_s,veh_id,class,attacked,pos_m,speed_mps,accel_mps2,gap_m\n";

  char buf[192];
  const std::size_t n = static_cast<std::size_t>(traj.n_vehicles);
  for (std::size_t step = 0; step < traj.n_steps; ++step) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = step * n + k;
      const int len = std::snprintf(
          buf, sizeof(buf), "%.3f,%d,%s,%d,%.6g,%.6g,%.6g,%.6g\n", traj.time[step],
          static_cast<int>(k + 1), class_name(traj.veh_class[k]),
          traj.attacked[i] ? 1 : 0, traj.pos[i], traj.speed[i], traj.accel[i], traj.gap[i]);
      out.write(buf, len);
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty trajectory file " + path.string());
  if (line != "time_s,veh_id,class,attacked,pos_m,speed_mps,accel_mps2,gap_m") {
    throw DataError("unexpected trajectory header in " + path.string());
  }

  struct Row {
    double t;
    int id;
    VehicleClass cls;
    std::uint8_t attacked;
    double x, v, a, s;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row r{};
    char cls_buf[8] = {0};
    int attacked = 0;
    if (std::sscanf(line.c_str(), "%lf,%d,%7[^,],%d,%lf,%lf,%lf,%lf", &r.t, &r.id, cls_buf,
                    &attacked, &r.x, &r.v, &r.a, &r.s) != 8) {
      throw DataError("malformed trajectory row: " + line);
    }
    r.cls = std::strcmp(cls_buf, "ACC") == 0 ? VehicleClass::Acc : VehicleClass::Human;
    r.attacked = attacked ? 1 : 0;
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError("trajectory file has no rows: " + path.string());

  int n_veh = 0;
  for (const Row& r : rows) n_veh = std::max(n_veh, r.id);
  if (rows.size() % static_cast<std::size_t>(n_veh) != 0) {
    throw DataError("trajectory row count is not a multiple of the vehicle count");
  }
  const std::size_t n_steps = rows.size() / static_cast<std::size_t>(n_veh);

  Trajectory traj;
  traj.n_vehicles = n_veh;
  traj.n_steps = n_steps;
  traj.veh_class.resize(static_cast<std::size_t>(n_veh));
  traj.veh_attacked.assign(static_cast<std::size_t>(n_veh), 0);
  traj.time.resize(n_steps);
  traj.pos.resize(rows.size());
  traj.speed.resize(rows.size());
  traj.accel.resize(rows.size());
  traj.gap.resize(rows.size());
  traj.attacked.resize(rows.size());

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    const std::size_t step = i / static_cast<std::size_t>(n_veh);
    const std::size_t k = static_cast<std::size_t>(r.id - 1);
    if (i % static_cast<std::size_t>(n_veh) != k) {
      throw DataError("trajectory rows out of order at line " + std::to_string(i + 2));
    }
    traj.time[step] = r.t;
    traj.pos[i] = r.x;
    traj.speed[i] = r.v;
    traj.accel[i] = r.a;
    traj.gap[i] = r.s;
    traj.attacked[i] = r.attacked;
    traj.veh_class[k] = r.cls;
    if (r.attacked) traj.veh_attacked[k] = 1;
  }

  traj.dt = n_steps > 1 ? traj.time[1] - traj.time[0] : 0.033;
  traj.config.n_vehicles = n_veh;
  traj.config.dt = traj.dt;
  traj.config.duration = traj.duration();
  double ring = 0.0;
  for (int k = 0; k < n_veh; ++k) ring += traj.gap[static_cast<std::size_t>(k)];
  traj.config.ring_length = ring;
  return traj;
}

}  // namespace accguard::sim
