#include "zcbf/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace zcbf {

void SimConfig::validate(const DomainBox& domain) const {
  if (!(dt > 0.0)) throw std::invalid_argument("sim.dt must be positive");
  if (!(t_final >= dt)) throw std::invalid_argument("sim.t_final must be at least sim.dt");
  if (x0.size() != domain.dim()) throw std::invalid_argument("sim.x0 has the wrong dimension");
  if (!x0.allFinite() || !domain.contains(x0)) throw std::invalid_argument("sim.x0 must lie in the domain");
}

StateVector rk4_step(const VectorField& field, const StateVector& x, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const auto eval = [&](const StateVector& y) {
    Eigen::VectorXd k = field(y);
    if (!k.allFinite()) throw std::runtime_error("rk4_step: vector field returned a non-finite value");
    return k;
  };
  const Eigen::VectorXd k1 = eval(x);
  const Eigen::VectorXd k2 = eval(x + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = eval(x + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = eval(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory rollout(const ControlAffineSystem& sys, const BarrierNet* net, const ReferenceController& ref,
                   const SafetyFilterConfig* filter, const SimConfig& cfg) {
  cfg.validate(sys.domain);
  const bool filtered = cfg.mode == SimMode::BarrierFiltered;
  if (filtered && (net == nullptr || filter == nullptr)) {
    throw std::invalid_argument("rollout: barrier-filtered mode needs a network and a filter config");
  }
  if (filtered) {
    filter->validate();
    if (net->input_dim() != sys.n) throw std::invalid_argument("rollout: network input size mismatch");
  }

  const auto controller = ref.clone();
  controller->reset();

  const auto steps = static_cast<long>(std::llround(cfg.t_final / cfg.dt));
  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(steps) + 1);
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);

  auto record_state = [&](double t, const StateVector& x) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    if (!traj.violation && sys.unsafe.contains(x)) traj.violation = Violation{t, x};
    if (!traj.left_domain && !sys.domain.contains(x)) traj.left_domain = t;
  };

  StateVector x = cfg.x0;
  record_state(0.0, x);
  for (long k = 0; k < steps; ++k) {
    const ControlVector u_ref = controller->evaluate(x);
    ControlVector u = u_ref;
    if (filtered) {
      FilterResult fr = cfg.solver == FilterSolver::Qp ? qp_filtered_control(*net, sys, *filter, x, u_ref)
                                                       : filtered_control(*net, sys, *filter, x, u_ref);
      u = fr.u;
      traj.diagnostics.push_back(std::move(fr.diag));
    }
    traj.reference_controls.push_back(u_ref);
    traj.controls.push_back(u);

    controller->advance(x, cfg.dt);
    x = rk4_step([&](const StateVector& y) { return sys.field(y, u); }, x, cfg.dt);
    for (int i = 0; i < sys.n; ++i) {
      if (!sys.periodic.empty() && sys.periodic[static_cast<std::size_t>(i)]) x[i] = wrap_angle(x[i]);
    }
    record_state(static_cast<double>(k + 1) * cfg.dt, x);
  }
  return traj;
}

void write_trajectory_csv(const std::filesystem::path& path, const ControlAffineSystem& sys,
                          const Trajectory& traj) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("trajectory: cannot open " + path.string());
  os << "t";
  for (int i = 0; i < sys.n; ++i) os << ",x" << i;
  for (int i = 0; i < sys.m; ++i) os << ",uref" << i;
  for (int i = 0; i < sys.m; ++i) os << ",u" << i;
  os << ",W,B,h,s,corrected,unsafe\n";

  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    os << ',' << buf;
  };
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.10g", traj.times[k]);
    os << buf;
    for (int i = 0; i < sys.n; ++i) num(traj.states[k][i]);
    const bool has_control = k < traj.controls.size();
    for (int i = 0; i < sys.m; ++i) num(has_control ? traj.reference_controls[k][i] : NAN);
    for (int i = 0; i < sys.m; ++i) num(has_control ? traj.controls[k][i] : NAN);
    if (k < traj.diagnostics.size()) {
      const auto& d = traj.diagnostics[k];
      num(d.W);
      num(d.B);
      num(d.h);
      num(d.s);
      os << ',' << (d.corrected ? 1 : 0);
    } else {
      os << ",nan,nan,nan,nan,0";
    }
    os << ',' << (sys.unsafe.contains(traj.states[k]) ? 1 : 0) << '\n';
  }
}

}  // namespace zcbf
