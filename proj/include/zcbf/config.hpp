#ifndef ZCBF_CONFIG_HPP
#define ZCBF_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zcbf/barrier_control.hpp"
#include "zcbf/dynamics.hpp"
#include "zcbf/grid_eval.hpp"
#include "zcbf/sim.hpp"
#include "zcbf/zubov.hpp"

namespace zcbf {

enum class Environment { Pendulum, Unicycle, Quadrotor };

const char* environment_name(Environment e);
std::optional<Environment> parse_environment(const std::string& name);

struct UnicycleParams {
  double speed = 0.5;
  double gain = 2.0;
  Eigen::Vector2d goal{1.0, 1.0};
};

struct QuadrotorParams {
  StateVector target = (StateVector(6) << 1.0, 1.0, 0.0, 0.0, 0.0, 0.0).finished();
  PidGains pid;
  QuadrotorRegions regions = default_quadrotor_regions();
};

struct GridDefaults {
  int axis_i = 0;
  int axis_j = 1;
  int resolution = 201;
  std::optional<StateVector> fixed;  // zeros when unset
  std::vector<double> gammas = {0.2, 0.4, 0.6, 0.8, 0.9, 0.95};
};

struct PathsConfig {
  std::string output_dir = "out";
};

/// Everything one experiment needs. `seed` drives training and the audit;
/// filter.alpha always equals train.alpha after loading.
struct RunConfig {
  Environment environment = Environment::Pendulum;
  std::uint64_t seed = 0;
  TrainConfig train;
  SafetyFilterConfig filter;
  SimConfig sim;
  GridDefaults grid;
  AuditConfig audit;
  UnicycleParams unicycle;
  QuadrotorParams quadrotor;
  PathsConfig paths;
};

/// Configuration problem; what() starts with the dotted key at fault.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string to_yaml(const RunConfig& cfg);

/// Semantic validation shared by parse_config and callers that build a
/// RunConfig in code. Throws ConfigError.
void validate(const RunConfig& cfg);

ControlAffineSystem make_system(const RunConfig& cfg);
std::unique_ptr<ReferenceController> make_reference(const RunConfig& cfg);
GridSlice make_slice(const RunConfig& cfg, const ControlAffineSystem& sys);

}  // namespace zcbf

#endif  // ZCBF_CONFIG_HPP
