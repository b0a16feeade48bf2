#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "accguard/errors.hpp"
#include "accguard/pipeline.hpp"

namespace {

using accguard::pipeline::OptionMap;

struct SubcommandSpec {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> values;
  std::string config_path;
};

SubcommandSpec* make_subcommand(CLI::App& app, std::vector<SubcommandSpec>& specs,
                                const std::string& name, const std::string& desc,
                                const std::vector<std::pair<const char*, const char*>>& flags) {
  specs.push_back(SubcommandSpec{});
  SubcommandSpec* spec = &specs.back();
  spec->app = app.add_subcommand(name, desc);
  spec->app->add_option("--config", spec->config_path,
                        "flat key = value config file; command-line flags win");
  for (const auto& [flag, flag_desc] : flags) {
    spec->values[flag] = "";
    spec->app->add_option("--" + std::string(flag), spec->values[flag], flag_desc);
  }
  return spec;
}

OptionMap collect_options(const SubcommandSpec& spec) {
  OptionMap map;
  if (!spec.config_path.empty()) {
    map = accguard::pipeline::read_config_file(spec.config_path);
  }
  for (const auto& [flag, value] : spec.values) {
    if (spec.app->count("--" + flag) > 0) map[flag] = value;
  }
  return map;
}

constexpr const char* kAttackFlags[][2] = {
    {"attack", "attack kind: none|control|sensor|dos"},
    {"xi-std", "std-dev of the acceleration injection (default sqrt(5))"},
    {"l1-std", "std-dev of the gap corruption (default sqrt(5))"},
    {"l2-std", "std-dev of the relative-speed corruption (default sqrt(5))"},
    {"omega", "sensor delay in seconds for dos (default 1)"},
    {"attack-start", "attack window start (s)"},
    {"attack-end", "attack window end (s); defaults to the whole run, 80-130 s for dos"},
    {"target-frac", "fraction of ACC vehicles attacked (default 0.5)"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ring-road ACC attack simulation and GAN-based detection pipeline"};
  app.require_subcommand(1);
  std::vector<SubcommandSpec> specs;
  specs.reserve(16);

  std::vector<std::pair<const char*, const char*>> simulate_flags = {
      {"ring-m", "ring length in meters (default 200)"},
      {"n-veh", "number of vehicles (default 20)"},
      {"mpr", "ACC market penetration rate in [0,1] (default 0)"},
      {"dt", "time step in seconds (default 0.033)"},
      {"duration", "simulated seconds (default 250)"},
      {"min-accel", "lower acceleration bound (default -8)"},
      {"max-accel", "upper acceleration bound (default 3)"},
      {"seed", "RNG seed (required)"},
      {"out", "output trajectory CSV path (required)"},
  };
  for (const auto& f : kAttackFlags) simulate_flags.push_back({f[0], f[1]});
  SubcommandSpec* simulate =
      make_subcommand(app, specs, "simulate", "run one ring-road simulation", simulate_flags);

  std::vector<std::pair<const char*, const char*>> fd_flags = {
      {"lengths", "ring-length grid start:stop:count (log-spaced) or comma list"},
      {"seeds-per-length", "seeds averaged per length (default 3)"},
      {"warmup-s", "discarded warm-up seconds (default 300)"},
      {"measure-s", "measurement window seconds (default 300)"},
      {"n-veh", "number of vehicles (default 20)"},
      {"mpr", "ACC market penetration rate (default 0)"},
      {"dt", "time step (default 0.033)"},
      {"min-accel", "lower acceleration bound (default -8)"},
      {"max-accel", "upper acceleration bound (default 3)"},
      {"seed", "RNG seed (required)"},
      {"jobs", "worker threads (default: cores, env ACCGUARD_JOBS)"},
      {"out", "output FD CSV path (required)"},
      {"summary", "summary JSON path (default <out>.summary.json)"},
  };
  for (const auto& f : kAttackFlags) fd_flags.push_back({f[0], f[1]});
  SubcommandSpec* fd =
      make_subcommand(app, specs, "fd", "sweep ring lengths into a fundamental diagram", fd_flags);

  SubcommandSpec* dataset = make_subcommand(
      app, specs, "dataset", "window trajectories into train/validation/test sets",
      {
          {"traj", "comma-separated trajectory CSV paths (required)"},
          {"window-s", "window length in seconds (default 2)"},
          {"stride-s", "stride in seconds (default: window length)"},
          {"classes", "vehicle classes to window: all|acc|human (default all)"},
          {"test-per-class", "test windows per class (default 200)"},
          {"val-ratio", "validation size as a multiple of the test size (default 4)"},
          {"seed", "RNG seed (required)"},
          {"out-prefix", "output prefix for _train/_val/_test.accw (required)"},
      });

  SubcommandSpec* train = make_subcommand(
      app, specs, "train", "adversarially train the GAN on normal windows",
      {
          {"data", "training .accw file (required)"},
          {"epochs", "training epochs (default 40)"},
          {"batch", "batch size (default 64)"},
          {"latent", "latent dimension (default 64)"},
          {"base-channels", "channel-width multiplier (default 32)"},
          {"lr-g", "generator learning rate (default 2e-3)"},
          {"lr-d", "discriminator learning rate (default 2e-3)"},
          {"momentum", "SGD momentum (default 0.9)"},
          {"slope", "LeakyReLU negative slope (default 0.2)"},
          {"seed", "RNG seed (required)"},
          {"out", "output checkpoint path (required)"},
      });

  SubcommandSpec* calibrate = make_subcommand(
      app, specs, "calibrate", "set the detection threshold from normal validation windows",
      {
          {"model", "GAN checkpoint (required)"},
          {"data", "validation .accw file (required)"},
          {"percentile", "nearest-rank percentile of validation scores (default 90)"},
          {"lambda", "weight of the discrimination loss (default 0.1)"},
          {"steps", "latent-descent steps per restart (default 100)"},
          {"lr", "latent-descent step size (default 0.01)"},
          {"restarts", "random restarts per window (default 3)"},
          {"seed", "RNG seed (required)"},
          {"jobs", "worker threads (default: cores, env ACCGUARD_JOBS)"},
          {"out", "output threshold JSON path (required)"},
      });

  SubcommandSpec* detect = make_subcommand(
      app, specs, "detect", "score windows and classify against a threshold",
      {
          {"model", "GAN checkpoint (required)"},
          {"data", "test .accw file (required)"},
          {"threshold", "threshold JSON from calibrate (required)"},
          {"seed", "RNG seed (required)"},
          {"jobs", "worker threads (default: cores, env ACCGUARD_JOBS)"},
          {"out", "output score CSV path (required)"},
      });

  SubcommandSpec* evaluate = make_subcommand(
      app, specs, "evaluate", "confusion metrics and AUC from a score CSV",
      {
          {"scores", "score CSV from detect (required)"},
          {"out", "output metrics JSON path (required)"},
      });

  SubcommandSpec* repro = make_subcommand(
      app, specs, "repro-table1", "end-to-end detection benchmark for one attack kind",
      {
          {"attack", "attack kind: control|sensor|dos (required)"},
          {"window-s", "input length in seconds, 2..12 (default 2)"},
          {"seed", "RNG seed (required)"},
          {"out-dir", "output directory (required)"},
          {"test-per-class", "test windows per class (default 200)"},
          {"val-ratio", "validation size as a multiple of the test size (default 4)"},
          {"train-windows", "minimum training windows (default 2000)"},
          {"mpr", "ACC market penetration rate (default 0.5)"},
          {"duration", "seconds per simulation run (default 250)"},
          {"skip-s", "drop windows starting before this time (default 60)"},
          {"epochs", "training epochs (default 80)"},
          {"base-channels", "channel-width multiplier (default 8)"},
          {"latent", "latent dimension (default 32)"},
          {"batch", "batch size (default 32)"},
          {"lr-g", "generator learning rate (default 4e-3)"},
          {"lr-d", "discriminator learning rate (default 1e-3)"},
          {"momentum", "SGD momentum (default 0.5)"},
          {"lambda", "discrimination-loss weight (default 0.1)"},
          {"steps", "latent-descent steps (default 60)"},
          {"restarts", "random restarts per window (default 2)"},
          {"lr", "latent-descent step size (default 0.05)"},
          {"percentile", "threshold percentile (default 90)"},
          {"jobs", "worker threads (default: cores, env ACCGUARD_JOBS)"},
      });

  std::string manifest_path;
  CLI::App* rerun = app.add_subcommand("rerun", "replay a command from its run manifest");
  rerun->add_option("manifest", manifest_path, "manifest JSON written by a previous run")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (rerun->parsed()) {
      accguard::pipeline::cmd_rerun(manifest_path);
      return 0;
    }
    const std::pair<SubcommandSpec*, const char*> table[] = {
        {simulate, "simulate"}, {fd, "fd"},
        {dataset, "dataset"},   {train, "train"},
        {calibrate, "calibrate"}, {detect, "detect"},
        {evaluate, "evaluate"}, {repro, "repro-table1"},
    };
    for (const auto& [spec, name] : table) {
      if (spec->app->parsed()) {
        accguard::pipeline::run_subcommand(name, collect_options(*spec));
        return 0;
      }
    }
    std::fprintf(stderr, "accguard: no subcommand selected\n");
    return 2;
  } catch (const accguard::IoError& e) {
    std::fprintf(stderr, "accguard: I/O error: %s\n", e.what());
    return 3;
  } catch (const accguard::NumericError& e) {
    std::fprintf(stderr, "accguard: numeric failure: %s\n", e.what());
    return 4;
  } catch (const accguard::ConfigError& e) {
    std::fprintf(stderr, "accguard: %s\n", e.what());
    return 2;
  } catch (const accguard::DataError& e) {
    std::fprintf(stderr, "accguard: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "accguard: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "accguard: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "accguard: unexpected error: %s\n", e.what());
    return 1;
  }
}
