#ifndef ZCBF_BARRIER_CONTROL_HPP
#define ZCBF_BARRIER_CONTROL_HPP

#include <Eigen/Dense>

#include <optional>

#include "zcbf/dynamics.hpp"
#include "zcbf/net.hpp"

namespace zcbf {

struct ControlBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct SafetyFilterConfig {
  double alpha = 1.0;    // must match the alpha used in training
  double kappa = 1.0;    // K3(s) = kappa s
  double epsilon = 1e-6;
  double w_clamp = 1e-3;
  std::optional<ControlBounds> u_bounds;

  void validate() const;
};

struct FilterDiagnostics {
  double W = 0.0;
  double B = 0.0;
  double h = 0.0;
  double s = 0.0;  // safety measure under u_ref
  double lfb = 0.0;
  Eigen::VectorXd lgb;
  bool corrected = false;
  bool degenerate = false;  // s > 0 but L_gB = 0: nothing to correct with
  bool clipped = false;
  bool infeasible = false;  // QP variant only
};

/// Cap applied to h = 1/B when B is (near) zero.
inline constexpr double kMinBarrier = 1e-9;

/// B = atanh(W') / alpha with W' = clamp(W, 0, 1 - w_clamp).
double w_to_b(double W, double alpha, double w_clamp);
/// dB/dW at W; zero wherever the clamp is active.
double w_to_b_slope(double W, double alpha, double w_clamp);
double h_from_b(double B);

struct LieDerivatives {
  double lfb = 0.0;
  Eigen::VectorXd lgb;
};

LieDerivatives lie_derivatives(const BarrierNet& net, const ControlAffineSystem& sys,
                               const SafetyFilterConfig& cfg, const StateVector& x);

/// s = L_fB + L_gB u_ref - kappa h
double safety_measure(double lfb, const Eigen::VectorXd& lgb, const ControlVector& u_ref, double kappa,
                      double h);

/// Closed-form minimal-norm adjustment: -s / (|L_gB|^2 + eps) L_gB when s > 0.
Eigen::VectorXd min_norm_correction(double s, const Eigen::VectorXd& lgb, double epsilon);

struct FilterResult {
  ControlVector u;
  FilterDiagnostics diag;
};

/// u = u_ref + delta_u, then clipped to cfg.u_bounds when set.
FilterResult filtered_control(const BarrierNet& net, const ControlAffineSystem& sys,
                              const SafetyFilterConfig& cfg, const StateVector& x, const ControlVector& u_ref);

/// Exact minimiser of |u - u_ref|^2 s.t. a.u <= b and lower <= u <= upper.
/// Returns the box point minimising a.u with infeasible = true when no point
/// of the box satisfies the constraint.
struct HalfspaceBoxProjection {
  Eigen::VectorXd u;
  bool infeasible = false;
};
HalfspaceBoxProjection project_halfspace_box(const Eigen::VectorXd& u_ref, const Eigen::VectorXd& a,
                                             double b, const std::optional<ControlBounds>& box);

/// Barrier QP  min |u - u_ref|^2  s.t.  L_fB + L_gB u <= kappa h,  u in box.
FilterResult qp_filtered_control(const BarrierNet& net, const ControlAffineSystem& sys,
                                 const SafetyFilterConfig& cfg, const StateVector& x,
                                 const ControlVector& u_ref);

}  // namespace zcbf

#endif  // ZCBF_BARRIER_CONTROL_HPP
