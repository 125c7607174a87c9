#ifndef ZCBF_CLI_HPP
#define ZCBF_CLI_HPP

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "zcbf/config.hpp"

namespace zcbf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Environment variable consulted when --config is not given.
inline constexpr const char* kConfigEnvVar = "ZCBF_CONFIG";

struct Options {
  std::filesystem::path config;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<SimMode> mode;
  std::optional<std::vector<double>> gammas;
  std::optional<std::filesystem::path> out;
};

// Output files, all inside the output directory.
inline constexpr const char* kCheckpointFile = "barrier.ckpt";
inline constexpr const char* kTextExportFile = "barrier.txt";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";
inline constexpr const char* kGridFile = "grid.txt";
inline constexpr const char* kLevelSetFile = "levelsets.jsonl";
inline constexpr const char* kContourFile = "contour.svg";
inline constexpr const char* kAuditFile = "audit.json";
inline constexpr const char* kSummaryFile = "summary.json";
std::string trajectory_file(SimMode mode);

/// Progress and results go to `log`, error messages to `err`.
int cmd_train(const Options& opts, std::ostream& log, std::ostream& err);
int cmd_eval_grid(const Options& opts, std::ostream& log, std::ostream& err);
int cmd_simulate(const Options& opts, std::ostream& log, std::ostream& err);
int cmd_audit(const Options& opts, std::ostream& log, std::ostream& err);
/// Train, grid, both simulation modes and audit for one shipped case.
int cmd_reproduce(const std::string& case_name, const Options& opts, std::ostream& log, std::ostream& err);

/// Shipped configuration for a case name, e.g. configs/pendulum.yaml.
std::filesystem::path shipped_config(const std::string& case_name);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace zcbf::cli

#endif  // ZCBF_CLI_HPP
