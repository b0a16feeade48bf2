#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace accguard::pipeline {

inline constexpr const char* kToolName = "accguard";
inline constexpr const char* kToolVersion = "0.1.0";

// Flat option map (string key/value) shared by the CLI, the config-file
// reader, and run manifests, so any command can be replayed from its
// manifest byte-for-byte.
using OptionMap = std::map<std::string, std::string>;

// key = value lines, '#' comments.
OptionMap read_config_file(const std::filesystem::path& path);

struct ManifestInfo {
  std::string subcommand;
  OptionMap options;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  std::string notes;
};

void write_manifest(const std::filesystem::path& path, const ManifestInfo& info);
ManifestInfo read_manifest(const std::filesystem::path& path);

// Each command validates its options, runs, writes its primary outputs plus
// a manifest next to them, and returns the list of outputs written.
std::vector<std::string> cmd_simulate(const OptionMap& options);
std::vector<std::string> cmd_fd(const OptionMap& options);
std::vector<std::string> cmd_dataset(const OptionMap& options);
std::vector<std::string> cmd_train(const OptionMap& options);
std::vector<std::string> cmd_calibrate(const OptionMap& options);
std::vector<std::string> cmd_detect(const OptionMap& options);
std::vector<std::string> cmd_evaluate(const OptionMap& options);
std::vector<std::string> cmd_repro_table1(const OptionMap& options);

// Replays the manifest's subcommand with its recorded options.
std::vector<std::string> run_subcommand(const std::string& name, const OptionMap& options);
std::vector<std::string> cmd_rerun(const std::filesystem::path& manifest_path);

// Option helpers shared with the CLI front end.
std::string require_option(const OptionMap& options, const std::string& key);
double option_double(const OptionMap& options, const std::string& key, double fallback);
std::int64_t option_int(const OptionMap& options, const std::string& key, std::int64_t fallback);
std::uint64_t require_seed(const OptionMap& options);
int option_jobs(const OptionMap& options);

}  // namespace accguard::pipeline
