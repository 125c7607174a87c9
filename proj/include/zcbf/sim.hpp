#ifndef ZCBF_SIM_HPP
#define ZCBF_SIM_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "zcbf/barrier_control.hpp"
#include "zcbf/dynamics.hpp"
#include "zcbf/net.hpp"

namespace zcbf {

enum class SimMode { ReferenceOnly, BarrierFiltered };
enum class FilterSolver { ClosedForm, Qp };

struct SimConfig {
  StateVector x0;
  double t_final = 10.0;
  double dt = 0.01;
  SimMode mode = SimMode::ReferenceOnly;
  FilterSolver solver = FilterSolver::ClosedForm;

  void validate(const DomainBox& domain) const;
};

struct Violation {
  double time = 0.0;
  StateVector state;
};

/// states/times have one entry per grid point t_k = k dt (k = 0..N);
/// controls, reference_controls and diagnostics have one entry per step
/// (k = 0..N-1), the control held over [t_k, t_k+1).
struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<ControlVector> controls;
  std::vector<ControlVector> reference_controls;
  std::vector<FilterDiagnostics> diagnostics;  // empty in ReferenceOnly mode
  std::optional<Violation> violation;          // first entry into the unsafe region
  std::optional<double> left_domain;           // first time outside the domain box
};

using VectorField = std::function<Eigen::VectorXd(const StateVector&)>;

/// Classical fourth-order Runge-Kutta step. Throws std::runtime_error when the
/// field returns a non-finite value.
StateVector rk4_step(const VectorField& field, const StateVector& x, double dt);

/// Closed-loop simulation with zero-order hold on the control. Periodic
/// coordinates are wrapped to (-pi, pi] after every step. `net` and
/// `filter` are required in BarrierFiltered mode. The reference controller
/// is cloned and reset, so the caller's instance is left untouched.
Trajectory rollout(const ControlAffineSystem& sys, const BarrierNet* net, const ReferenceController& ref,
                   const SafetyFilterConfig* filter, const SimConfig& cfg);

/// Delimited-text export: header line, then one row per time point.
/// Columns: t, x0..x{n-1}, uref0.., u0.., W, B, h, s, corrected, unsafe.
/// The final row carries the terminal state and "nan" control fields.
void write_trajectory_csv(const std::filesystem::path& path, const ControlAffineSystem& sys,
                          const Trajectory& traj);

}  // namespace zcbf

#endif  // ZCBF_SIM_HPP
