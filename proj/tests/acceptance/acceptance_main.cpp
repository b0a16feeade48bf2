// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Usage:
//
//   accguard_acceptance <path-to-accguard-binary>
//
// The exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>
#include <unistd.h>

#include "json.hpp"

#include "accguard/car_following.hpp"
#include "accguard/dataset.hpp"
#include "accguard/detector.hpp"
#include "accguard/eval_metrics.hpp"
#include "accguard/gan.hpp"
#include "accguard/macro_fd.hpp"
#include "accguard/nn.hpp"
#include "accguard/parallel.hpp"
#include "accguard/pipeline.hpp"
#include "accguard/ring_sim.hpp"
#include "../support/synthetic_shapes.hpp"

namespace fs = std::filesystem;
using namespace accguard;

namespace {

struct Context {
  std::string bin;
  fs::path scratch;
  int jobs = 2;
};

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void note(const std::string& line) { details.push_back(line); }
  void require(bool ok, const std::string& line) {
    details.push_back(std::string(ok ? "  ok   " : "  FAIL ") + line);
    pass = pass && ok;
  }
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_cli(const Context& ctx, const std::string& args) {
  const std::string cmd = ctx.bin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return status == -1 ? -1 : WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing:" + path.string() + ">";
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// --------------------------------------------------------------------------
// 1. IDM oracle equivalence

// Brute-force IDM evaluation, written independently of the library path
// (exp/log power, no shared helpers).
double idm_brute_force(const cf::IdmParams& p, double s, double v, double dv) {
  const double desired = p.eta + p.tau * v - (v * dv) / (2.0 * std::sqrt(p.alpha * p.beta));
  const double speed_term = v > 0.0 ? std::exp(p.delta * std::log(v / p.v_d)) : 0.0;
  const double ratio = desired / s;
  return p.alpha * (1.0 - speed_term - ratio * ratio);
}

Outcome criterion_idm_oracle(const Context&) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(424242);
  double worst = 0.0;
  double min_abs = 1e300;
  for (int i = 0; i < 1000; ++i) {
    cf::IdmParams p{0.2 + 3.0 * rng.uniform01(), 0.5 + 6.0 * rng.uniform01(),
                    1.0 + 15.0 * rng.uniform01(), 1.0 + 8.0 * rng.uniform01(),
                    0.5 + 2.5 * rng.uniform01(), 10.0 + 40.0 * rng.uniform01()};
    const double s = 0.5 + 100.0 * rng.uniform01();
    const double v = 40.0 * rng.uniform01();
    const double dv = -10.0 + 20.0 * rng.uniform01();
    const double got = cf::idm_accel(p, cf::CfInput{s, v, dv});
    const double want = idm_brute_force(p, s, v, dv);
    min_abs = std::min(min_abs, std::abs(want));
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(got), std::abs(want)));
  }
  const double elapsed = seconds_since(t0);
  out.require(worst <= 1e-12, fmt("1000 random inputs, max relative error %.3g <= 1e-12", worst));
  out.note(fmt("         smallest |reference| seen: %.3g (no cancellation blow-up)", min_abs));
  out.require(elapsed < 1.0, fmt("runtime %.3f s < 1 s", elapsed));
  return out;
}

// --------------------------------------------------------------------------
// 2. Ring conservation

Outcome criterion_ring_conservation(const Context&) {
  Outcome out;
  for (const char* kind : {"none", "control", "sensor", "dos"}) {
    sim::SimConfig cfg;
    cfg.ring_length = 200.0;
    cfg.n_vehicles = 20;
    cfg.acc_mpr = 0.5;
    cfg.duration = 250.0;
    cfg.seed = 90210;
    cfg.attack.kind = *attacks::kind_from_name(kind);
    cfg.attack.xi_std = std::sqrt(5.0);
    cfg.attack.lambda1_std = std::sqrt(5.0);
    cfg.attack.lambda2_std = std::sqrt(5.0);
    cfg.attack.omega = 1.0;

    const auto t0 = std::chrono::steady_clock::now();
    const sim::Trajectory traj = sim::run(cfg);
    const double elapsed = seconds_since(t0);

    double worst = 0.0;
    const std::size_t n = static_cast<std::size_t>(traj.n_vehicles);
    for (std::size_t step = 0; step < traj.n_steps; ++step) {
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) sum += traj.gap[step * n + k];
      worst = std::max(worst, std::abs(sum - cfg.ring_length));
    }
    out.require(worst <= 1e-9 * cfg.ring_length,
                fmt("%s: max |sum(gaps) - L| = %.3g m over %zu steps (cap %.3g m)", kind, worst,
                    traj.n_steps, 1e-9 * cfg.ring_length));
    out.require(elapsed < 5.0, fmt("%s: runtime %.2f s < 5 s", kind, elapsed));
  }
  return out;
}

// --------------------------------------------------------------------------
// 3. Zero-attack equivalence

Outcome criterion_zero_attack(const Context& ctx) {
  Outcome out;
  sim::SimConfig base;
  base.ring_length = 200.0;
  base.n_vehicles = 20;
  base.acc_mpr = 0.5;
  base.duration = 250.0;
  base.seed = 777;

  const auto write_run = [&](const sim::SimConfig& cfg, const char* name) {
    const fs::path path = ctx.scratch / (std::string("zero_") + name + ".csv");
    sim::write_trajectory_csv(sim::run(cfg), path);
    return slurp(path);
  };
  const std::string reference = write_run(base, "none");

  sim::SimConfig control = base;
  control.attack.kind = attacks::AttackKind::ControlInjection;
  control.attack.xi_std = 0.0;
  sim::SimConfig sensor = base;
  sensor.attack.kind = attacks::AttackKind::SensorFalsification;
  sensor.attack.lambda1_std = 0.0;
  sensor.attack.lambda2_std = 0.0;
  sim::SimConfig dos = base;
  dos.attack.kind = attacks::AttackKind::DenialOfService;
  dos.attack.omega = 0.0;

  out.require(write_run(control, "control0") == reference,
              "control with xi_std=0 is byte-identical to none");
  out.require(write_run(sensor, "sensor0") == reference,
              "sensor with lambda stds 0 is byte-identical to none");
  out.require(write_run(dos, "dos0") == reference, "dos with omega=0 is byte-identical to none");
  return out;
}

// --------------------------------------------------------------------------
// 4. Gradient verification

Outcome criterion_gradients(const Context&) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(2025);

  const auto fill = [&rng](nn::Batch& b, double offset = 0.0) {
    for (double& v : b.v) v = offset + rng.gaussian(0.0, 1.0);
  };
  const auto conv = [](nn::LayerKind kind, int in_ch, int out_ch, int k, int s, int p,
                       bool bias) {
    nn::LayerSpec spec;
    spec.kind = kind;
    spec.in_ch = in_ch;
    spec.out_ch = out_ch;
    spec.kernel = k;
    spec.stride = s;
    spec.padding = p;
    spec.bias = bias;
    return spec;
  };

  {
    nn::Network net;
    net.add(conv(nn::LayerKind::Conv1d, 2, 3, 4, 2, 1, true));
    net.init_params(rng);
    nn::Batch x(2, 2, 12);
    fill(x);
    const auto r = nn::grad_check(net, x, 1e-6);
    out.require(r.pass,
                fmt("conv1d: max rel err %.3g <= 1e-6 (%s)", r.max_rel_err, r.worst.c_str()));
  }
  {
    nn::Network net;
    net.add(conv(nn::LayerKind::ConvTranspose1d, 3, 2, 4, 2, 1, true));
    net.init_params(rng);
    nn::Batch x(2, 3, 8);
    fill(x);
    const auto r = nn::grad_check(net, x, 1e-6);
    out.require(r.pass, fmt("convtranspose1d: max rel err %.3g <= 1e-6", r.max_rel_err));
  }
  {
    nn::Network net;
    nn::LayerSpec bn;
    bn.kind = nn::LayerKind::BatchNorm1d;
    bn.in_ch = 3;
    net.add(bn);
    net.init_params(rng);
    nn::Batch x(4, 3, 6);
    fill(x, 0.5);
    const auto train_r = nn::grad_check(net, x, 1e-4, nn::Mode::Train);
    out.require(train_r.pass,
                fmt("batchnorm1d train mode: max rel err %.3g <= 1e-4", train_r.max_rel_err));
    const auto eval_r = nn::grad_check(net, x, 1e-6, nn::Mode::Eval);
    out.require(eval_r.pass,
                fmt("batchnorm1d eval mode: max rel err %.3g <= 1e-6", eval_r.max_rel_err));
  }
  {
    nn::Network net;
    net.add(conv(nn::LayerKind::Conv1d, 1, 2, 3, 1, 1, true));
    nn::LayerSpec leaky;
    leaky.kind = nn::LayerKind::LeakyRelu;
    leaky.negative_slope = 0.2;
    net.add(leaky);
    nn::LayerSpec tanh_spec;
    tanh_spec.kind = nn::LayerKind::Tanh;
    net.add(tanh_spec);
    nn::LayerSpec sig;
    sig.kind = nn::LayerKind::Sigmoid;
    net.add(sig);
    net.init_params(rng);
    nn::Batch x(2, 1, 9);
    fill(x, 0.31);  // keep clear of the leaky-relu kink
    const auto r = nn::grad_check(net, x, 1e-6);
    out.require(r.pass, fmt("leaky_relu+tanh+sigmoid over conv: max rel err %.3g <= 1e-6",
                            r.max_rel_err));
  }

  // Full networks at toy size.
  gan::GanConfig cfg;
  cfg.latent_dim = 16;
  cfg.base_channels = 4;
  cfg.model_length = 32;
  cfg.seed = 5150;
  data::NormStats unit;
  unit.mean = {0.0, 0.0, 0.0};
  unit.stddev = {1.0, 1.0, 1.0};
  gan::GanModel model = gan::build_model(cfg, unit);
  {
    nn::Batch z(3, static_cast<std::size_t>(cfg.latent_dim), 1);
    fill(z);
    const auto r = nn::grad_check(model.generator, z, 1e-4, nn::Mode::Train);
    out.require(r.pass, fmt("full generator (T_m=32, C=4): max rel err %.3g <= 1e-4 (%s)",
                            r.max_rel_err, r.worst.c_str()));
  }
  {
    nn::Batch x(3, 3, 32);
    fill(x);
    const auto r = nn::grad_check(model.discriminator, x, 1e-4, nn::Mode::Train);
    out.require(r.pass, fmt("full discriminator (T_m=32, C=4): max rel err %.3g <= 1e-4 (%s)",
                            r.max_rel_err, r.worst.c_str()));
  }
  const double elapsed = seconds_since(t0);
  out.require(elapsed < 120.0, fmt("runtime %.1f s < 2 min", elapsed));
  return out;
}

// --------------------------------------------------------------------------
// 5. Fundamental-diagram reproduction

Outcome criterion_fd(const Context& ctx) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();

  const auto sweep = [&](double mpr, attacks::AttackKind kind) {
    fd::SweepConfig cfg;
    cfg.base.n_vehicles = 20;
    cfg.base.acc_mpr = mpr;
    cfg.base.seed = 5;
    cfg.base.attack.kind = kind;
    cfg.base.attack.xi_std = std::sqrt(5.0);
    cfg.lengths_m = fd::log_spaced_lengths(143.0, 2000.0, 20);
    cfg.seeds_per_length = 3;
    cfg.warmup_s = 300.0;
    cfg.measure_s = 300.0;
    cfg.jobs = ctx.jobs;
    return fd::sweep_fd(cfg).capacity_vph;
  };

  const double q_human = sweep(0.0, attacks::AttackKind::None);
  const double q_acc = sweep(1.0, attacks::AttackKind::None);
  const double q_mixed = sweep(0.6, attacks::AttackKind::None);
  const double q_attacked = sweep(0.6, attacks::AttackKind::ControlInjection);

  out.require(q_human >= 1600.0 && q_human <= 2200.0,
              fmt("capacity at 0%% MPR = %.0f veh/hr within [1600, 2200]", q_human));
  if (!(q_human >= 1600.0 && q_human <= 2200.0)) {
    out.note("         known gap: with point vehicles and rho = N/L, the human-preset IDM");
    out.note("         equilibrium capacity is ~2342 veh/hr and the 20-vehicle ring is stable");
    out.note("         at the critical density, so the optimum sits on the equilibrium curve.");
    out.note("         Reference values near 1900 imply ~5 m vehicle-length accounting, which");
    out.note("         is out of scope here (point vehicles). See the project notes.");
  }

  const double margin = 1.0 - q_acc / q_human;
  out.require(q_acc < q_human && margin >= 0.15,
              fmt("capacity at 100%% ACC (%.0f) below 0%% (%.0f) by %.1f%% >= 15%%", q_acc,
                  q_human, 100.0 * margin));

  const double drop = 1.0 - q_attacked / q_mixed;
  out.require(drop >= 0.25,
              fmt("control attack at 60%% MPR: capacity %.0f -> %.0f, drop %.1f%% >= 25%%",
                  q_mixed, q_attacked, 100.0 * drop));
  if (drop < 0.25) {
    out.note("         known gap: with the variance reading of the injection (std sqrt(5))");
    out.note("         redrawn every 30 Hz step, acceleration white noise integrates to only");
    out.note("         ~0.4 m/s speed deviation per second; the measured capacity drop stays");
    out.note("         near 10%. The std=5 reading instead collapses traffic to gridlock");
    out.note("         (~160 veh/hr). Neither reproduces the reference -42% drop.");
  }

  const double elapsed = seconds_since(t0);
  out.require(elapsed < 600.0, fmt("runtime %.0f s < 10 min", elapsed));
  return out;
}

// --------------------------------------------------------------------------
// 6. Detection quality (repro-table1 end to end)

Outcome criterion_detection(const Context& ctx) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seeds[3] = {11, 12, 13};
  const char* kinds[3] = {"control", "sensor", "dos"};

  for (int i = 0; i < 3; ++i) {
    const fs::path dir = ctx.scratch / (std::string("rt1_") + kinds[i]);
    const int code = run_cli(
        ctx, fmt("repro-table1 --attack %s --window-s 2 --seed %llu --out-dir %s --jobs %d",
                 kinds[i], static_cast<unsigned long long>(seeds[i]), dir.c_str(), ctx.jobs));
    if (code != 0) {
      out.require(false, fmt("%s: repro-table1 exited %d", kinds[i], code));
      continue;
    }
    nlohmann::json metrics = nlohmann::json::parse(slurp(dir / "metrics.json"), nullptr, false);
    if (metrics.is_discarded()) {
      out.require(false, fmt("%s: metrics.json unreadable", kinds[i]));
      continue;
    }
    const double accuracy = metrics.at("accuracy").get<double>();
    const double recall = metrics.at("recall").get<double>();
    const double auc = metrics.at("auc").get<double>();
    out.require(accuracy >= 0.75, fmt("%s: accuracy %.3f >= 0.75", kinds[i], accuracy));
    out.require(recall >= 0.90, fmt("%s: recall %.3f >= 0.90", kinds[i], recall));
    out.require(auc >= 0.85, fmt("%s: anomaly-score AUC %.3f >= 0.85", kinds[i], auc));
  }
  const double elapsed = seconds_since(t0);
  out.require(elapsed < 1800.0, fmt("total runtime %.0f s < 30 min", elapsed));
  return out;
}

// --------------------------------------------------------------------------
// 7. Metrics arithmetic

Outcome criterion_metrics(const Context&) {
  Outcome out;
  metrics::Confusion c;
  c.tp = 78;
  c.fp = 22;
  c.fn = 0;
  c.tn = 78;
  const metrics::Metrics m = metrics::compute(c);
  out.require(std::round(m.f1 * 100.0) / 100.0 == 0.88,
              fmt("P=0.78, R=1.00 gives F1=%.6f, which rounds to 0.88", m.f1));

  RngStream rng(888);
  bool invariants = true;
  std::string first_violation;
  for (int i = 0; i < 10000 && invariants; ++i) {
    metrics::Confusion r;
    r.tp = rng.uniform_index(100);
    r.fp = rng.uniform_index(100);
    r.tn = rng.uniform_index(100);
    r.fn = rng.uniform_index(100);
    if (r.total() == 0) r.tn = 1;
    const metrics::Metrics mm = metrics::compute(r);
    for (double v : {mm.accuracy, mm.precision, mm.recall, mm.f1}) {
      invariants = invariants && v >= 0.0 && v <= 1.0;
    }
    if (mm.precision > 0.0 && mm.recall > 0.0) {
      invariants = invariants && mm.f1 <= std::max(mm.precision, mm.recall) + 1e-12 &&
                   mm.f1 >= std::min(mm.precision, mm.recall) - 1e-12;
    }
    const double expected_acc =
        static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
    invariants = invariants && std::abs(mm.accuracy - expected_acc) < 1e-12;
    if (!invariants) {
      first_violation = fmt("tp=%llu fp=%llu tn=%llu fn=%llu",
                            static_cast<unsigned long long>(r.tp),
                            static_cast<unsigned long long>(r.fp),
                            static_cast<unsigned long long>(r.tn),
                            static_cast<unsigned long long>(r.fn));
    }
  }
  out.require(invariants, "metric invariants hold over 10^4 randomized confusion matrices" +
                              (first_violation.empty() ? "" : " (violated: " + first_violation +
                                                                  ")"));
  return out;
}

// --------------------------------------------------------------------------
// 8. Determinism

Outcome criterion_determinism(const Context& ctx) {
  Outcome out;
  const fs::path dir = ctx.scratch / "determinism";
  fs::create_directories(dir);
  const auto file = [&dir](const char* name) { return (dir / name).string(); };

  struct Stage {
    const char* name;
    std::string args;
    std::string output;
  };
  const std::string traj = file("traj.csv");
  const std::string traj2 = file("traj_b.csv");
  const std::string traj3 = file("traj_attack.csv");
  std::vector<Stage> stages;
  stages.push_back({"simulate",
                    "simulate --ring-m 150 --n-veh 10 --mpr 0.5 --duration 60 --seed 21 --out " +
                        traj,
                    traj});
  const std::string fd_csv = file("fd.csv");
  stages.push_back({"fd",
                    "fd --lengths 120:360:2 --seeds-per-length 1 --warmup-s 20 --measure-s 20 "
                    "--n-veh 8 --seed 22 --jobs " +
                        std::to_string(ctx.jobs) + " --out " + fd_csv,
                    fd_csv});

  // inputs for the detection stages
  if (run_cli(ctx, "simulate --ring-m 150 --n-veh 10 --mpr 0.5 --duration 60 --seed 31 --out " +
                       traj2) != 0 ||
      run_cli(ctx,
              "simulate --ring-m 150 --n-veh 10 --mpr 0.5 --duration 60 --attack control "
              "--seed 32 --out " +
                  traj3) != 0) {
    out.require(false, "auxiliary simulations failed");
    return out;
  }
  const std::string prefix = file("set");
  stages.push_back({"dataset",
                    "dataset --traj " + traj + "," + traj2 + "," + traj3 +
                        " --window-s 2 --stride-s 1 --test-per-class 20 --val-ratio 2 --seed 23 "
                        "--out-prefix " +
                        prefix,
                    prefix + "_train.accw"});
  const std::string model = file("model.ckpt");
  stages.push_back({"train",
                    "train --data " + prefix +
                        "_train.accw --epochs 2 --batch 32 --latent 16 "
                        "--base-channels 4 --seed 24 --out " +
                        model,
                    model});
  const std::string threshold = file("threshold.json");
  stages.push_back({"calibrate",
                    "calibrate --model " + model + " --data " + prefix +
                        "_val.accw --steps 5 --restarts 1 --seed 25 --jobs " +
                        std::to_string(ctx.jobs) + " --out " + threshold,
                    threshold});
  const std::string scores = file("scores.csv");
  stages.push_back({"detect",
                    "detect --model " + model + " --data " + prefix + "_test.accw --threshold " +
                        threshold + " --seed 26 --jobs " + std::to_string(ctx.jobs) + " --out " +
                        scores,
                    scores});
  const std::string metrics_json = file("metrics.json");
  stages.push_back(
      {"evaluate", "evaluate --scores " + scores + " --out " + metrics_json, metrics_json});

  for (const Stage& stage : stages) {
    if (run_cli(ctx, stage.args) != 0) {
      out.require(false, fmt("%s: stage failed", stage.name));
      return out;
    }
    const std::string first = slurp(stage.output);
    fs::remove(stage.output);
    const int replay = run_cli(ctx, "rerun " + stage.output + ".manifest.json");
    out.require(replay == 0 && slurp(stage.output) == first,
                fmt("%s: manifest replay is byte-identical", stage.name));
  }

  // detector scores are independent of the worker count
  const std::string scores_serial = file("scores_serial.csv");
  const int code =
      run_cli(ctx, "detect --model " + model + " --data " + prefix + "_test.accw --threshold " +
                       threshold + " --seed 26 --jobs 1 --out " + scores_serial);
  out.require(code == 0 && slurp(scores_serial) == slurp(scores),
              "detect: scores identical under --jobs 1 and --jobs " + std::to_string(ctx.jobs));
  return out;
}

// --------------------------------------------------------------------------
// 9. Synthetic-shape oracle

Outcome criterion_shape_oracle(const Context& ctx) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const int T = 32;
  const auto train = testsupport::make_wave_windows(512, T, false, 1001);
  const auto sines = testsupport::make_wave_windows(50, T, false, 1002);
  const auto squares = testsupport::make_wave_windows(50, T, true, 1003);

  const data::NormStats norm = data::fit_norm(train);
  gan::GanConfig cfg;
  cfg.latent_dim = 32;
  cfg.base_channels = 8;
  cfg.model_length = T;
  cfg.batch_size = 32;
  cfg.epochs = 200;
  cfg.lr_g = 4e-3;
  cfg.lr_d = 1e-3;
  cfg.momentum = 0.5;
  cfg.seed = 1;
  const gan::GanModel model = gan::train_gan(train, norm, cfg);

  det::DetectorConfig dcfg;
  dcfg.lambda_weight = 0.1;
  dcfg.inversion_steps = 60;
  dcfg.inversion_lr = 0.05;
  dcfg.restarts = 2;
  dcfg.seed = 10;

  std::vector<data::Window> all = sines;
  all.insert(all.end(), squares.begin(), squares.end());
  const std::vector<double> scores = det::score_windows(model, all, dcfg, ctx.jobs);
  std::vector<int> labels(100, 0);
  for (int i = 50; i < 100; ++i) labels[i] = 1;
  const double auc = metrics::auc(scores, labels);

  double mean_sine = 0.0, mean_square = 0.0;
  for (int i = 0; i < 50; ++i) mean_sine += scores[i] / 50.0;
  for (int i = 50; i < 100; ++i) mean_square += scores[i] / 50.0;

  out.require(auc >= 0.95, fmt("square-vs-sine anomaly AUC %.4f >= 0.95", auc));
  out.note(fmt("         mean scores: held-out sines %.1f, squares %.1f; %.0f s total",
               mean_sine, mean_square, seconds_since(t0)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: accguard_acceptance <path-to-accguard-binary>\n");
    return 99;
  }
  Context ctx;
  ctx.bin = argv[1];
  ctx.jobs = default_jobs();
  ctx.scratch = fs::temp_directory_path() / ("accguard_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(ctx.scratch);

  struct Criterion {
    const char* name;
    std::function<Outcome(const Context&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"1 IDM oracle equivalence", criterion_idm_oracle},
      {"2 ring conservation", criterion_ring_conservation},
      {"3 zero-attack equivalence", criterion_zero_attack},
      {"4 gradient verification", criterion_gradients},
      {"5 fundamental-diagram reproduction", criterion_fd},
      {"6 detection quality", criterion_detection},
      {"7 metrics arithmetic", criterion_metrics},
      {"8 determinism", criterion_determinism},
      {"9 synthetic-shape oracle", criterion_shape_oracle},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    Outcome outcome;
    try {
      outcome = criterion.run(ctx);
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.note(std::string("  exception: ") + e.what());
    }
    std::printf("%s criterion %s\n", outcome.pass ? "PASS" : "FAIL", criterion.name);
    for (const std::string& line : outcome.details) std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }

  std::printf("\n%d of %zu criteria failed\n", failures, criteria.size());
  fs::remove_all(ctx.scratch);
  return failures;
}
