#include "accguard/macro_fd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "accguard/errors.hpp"
#include "accguard/parallel.hpp"

namespace accguard::fd {

FdPoint measure_fd_point(const sim::Trajectory& traj, double warmup_s, double window_s) {
  if (warmup_s < 0.0 || window_s <= 0.0) {
    throw std::invalid_argument("measure_fd_point: warmup must be >= 0 and window > 0");
  }
  // One step of slack: a run of duration w+m discretizes to n_steps*dt,
  // which can fall just short of the requested span.
  if (traj.duration() + traj.dt + 1e-9 < warmup_s + window_s) {
    throw std::invalid_argument("measure_fd_point: trajectory shorter than warmup + window");
  }
  const double t_end = warmup_s + window_s;
  double sum = 0.0;
  std::size_t count = 0;
  const std::size_t n = static_cast<std::size_t>(traj.n_vehicles);
  for (std::size_t step = 0; step < traj.n_steps; ++step) {
    const double t = traj.time[step];
    if (t < warmup_s || t >= t_end) continue;
    for (std::size_t k = 0; k < n; ++k) sum += traj.speed[step * n + k];
    count += n;
  }
  if (count == 0) throw std::invalid_argument("measure_fd_point: no records in window");

  FdPoint p;
  p.ring_m = traj.config.ring_length;
  p.mpr = traj.config.acc_mpr;
  p.attack = traj.config.attack.kind;
  p.seed_count = 1;
  p.density_vpkm = static_cast<double>(traj.n_vehicles) / (p.ring_m / 1000.0);
  p.mean_speed_kmh = (sum / static_cast<double>(count)) * 3.6;
  p.flow_vph = p.density_vpkm * p.mean_speed_kmh;
  return p;
}

FdCurve sweep_fd(const SweepConfig& cfg) {
  if (cfg.lengths_m.empty()) throw std::invalid_argument("sweep_fd: empty length grid");
  if (!std::is_sorted(cfg.lengths_m.begin(), cfg.lengths_m.end())) {
    throw std::invalid_argument("sweep_fd: lengths must be ascending");
  }
  if (cfg.seeds_per_length < 1) throw std::invalid_argument("sweep_fd: seeds_per_length < 1");

  const std::size_t n_len = cfg.lengths_m.size();
  const std::size_t n_seeds = static_cast<std::size_t>(cfg.seeds_per_length);
  std::vector<double> speeds(n_len * n_seeds);  // mean m/s per (length, seed)

  parallel_for(n_len * n_seeds, cfg.jobs, [&](std::size_t job) {
    const std::size_t li = job / n_seeds;
    const std::size_t si = job % n_seeds;
    sim::SimConfig run_cfg = cfg.base;
    run_cfg.ring_length = cfg.lengths_m[li];
    run_cfg.duration = cfg.warmup_s + cfg.measure_s;
    run_cfg.seed = derive_seed(cfg.base.seed, li + 1, si + 1);
    sim::Trajectory traj;
    try {
      traj = sim::run(run_cfg);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " [ring " +
                         std::to_string(run_cfg.ring_length) + " m]");
    }
    const FdPoint p = measure_fd_point(traj, cfg.warmup_s, cfg.measure_s);
    speeds[job] = p.mean_speed_kmh / 3.6;
  });

  FdCurve curve;
  curve.points.reserve(n_len);
  for (std::size_t li = 0; li < n_len; ++li) {
    double mean_mps = 0.0;
    for (std::size_t si = 0; si < n_seeds; ++si) mean_mps += speeds[li * n_seeds + si];
    mean_mps /= static_cast<double>(n_seeds);

    FdPoint p;
    p.ring_m = cfg.lengths_m[li];
    p.mpr = cfg.base.acc_mpr;
    p.attack = cfg.base.attack.kind;
    p.seed_count = cfg.seeds_per_length;
    p.density_vpkm = static_cast<double>(cfg.base.n_vehicles) / (p.ring_m / 1000.0);
    p.mean_speed_kmh = mean_mps * 3.6;
    p.flow_vph = p.density_vpkm * p.mean_speed_kmh;
    curve.points.push_back(p);
  }
  std::sort(curve.points.begin(), curve.points.end(),
            [](const FdPoint& a, const FdPoint& b) { return a.density_vpkm < b.density_vpkm; });

  const auto [q, rho_c] = capacity_point(curve);
  curve.capacity_vph = q;
  curve.critical_density_vpkm = rho_c;
  curve.jam_density_vpkm.reset();
  for (const FdPoint& p : curve.points) {
    if (p.flow_vph < 0.05 * q) {
      if (!curve.jam_density_vpkm || p.density_vpkm > *curve.jam_density_vpkm) {
        curve.jam_density_vpkm = p.density_vpkm;
      }
    }
  }
  return curve;
}

std::pair<double, double> capacity_point(const FdCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("capacity_point: empty curve");
  const FdPoint* best = &curve.points.front();
  for (const FdPoint& p : curve.points) {
    if (p.flow_vph > best->flow_vph ||
        (p.flow_vph == best->flow_vph && p.density_vpkm < best->density_vpkm)) {
      best = &p;
    }
  }
  return {best->flow_vph, best->density_vpkm};
}

std::vector<double> log_spaced_lengths(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) {
    throw std::invalid_argument("log_spaced_lengths: need 0 < lo < hi and count >= 2");
  }
  std::vector<double> lengths(static_cast<std::size_t>(count));
  const double la = std::log(lo), lb = std::log(hi);
  for (int i = 0; i < count; ++i) {
    lengths[static_cast<std::size_t>(i)] = std::exp(la + (lb - la) * i / (count - 1));
  }
  lengths.front() = lo;
  lengths.back() = hi;
  return lengths;
}

void write_fd_csv(const FdCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "density_vpkm,flow_vph,mean_speed_kmh,ring_m,mpr,attack,seed_count\n";
  char buf[256];
  for (const FdPoint& p : curve.points) {
    const int len = std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%g,%s,%d\n",
                                  p.density_vpkm, p.flow_vph, p.mean_speed_kmh, p.ring_m, p.mpr,
                                  attacks::to_string(p.attack).c_str(), p.seed_count);
    out.write(buf, len);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::string summary_json(const FdCurve& curve) {
  nlohmann::json j;
  j["capacity_vph"] = curve.capacity_vph;
  j["critical_density_vpkm"] = curve.critical_density_vpkm;
  if (curve.jam_density_vpkm) {
    j["jam_density_vpkm"] = *curve.jam_density_vpkm;
  } else {
    j["jam_density_vpkm"] = "not reached";
  }
  j["n_points"] = curve.points.size();
  if (!curve.points.empty()) {
    j["mpr"] = curve.points.front().mpr;
    j["attack"] = attacks::to_string(curve.points.front().attack);
    j["seed_count"] = curve.points.front().seed_count;
  }
  return j.dump(2) + "\n";
}

}  // namespace accguard::fd
