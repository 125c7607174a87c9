#include "zcbf/barrier_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace zcbf {

void SafetyFilterConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("filter.alpha must be positive");
  if (!(kappa > 0.0)) throw std::invalid_argument("filter.kappa must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("filter.epsilon must be positive");
  if (!(w_clamp > 0.0 && w_clamp < 0.5)) throw std::invalid_argument("filter.w_clamp must lie in (0, 0.5)");
  if (u_bounds) {
    if (u_bounds->lower.size() != u_bounds->upper.size()) {
      throw std::invalid_argument("filter.u_bounds: lower/upper size mismatch");
    }
    for (Eigen::Index i = 0; i < u_bounds->lower.size(); ++i) {
      if (!(u_bounds->lower[i] <= u_bounds->upper[i])) {
        throw std::invalid_argument("filter.u_bounds: lower must not exceed upper");
      }
    }
  }
}

namespace {

double clamp_w(double W, double w_clamp) { return std::min(std::max(W, 0.0), 1.0 - w_clamp); }

Eigen::VectorXd clip(const Eigen::VectorXd& u, const std::optional<ControlBounds>& box) {
  if (!box) return u;
  return u.cwiseMax(box->lower).cwiseMin(box->upper);
}

}  // namespace

double w_to_b(double W, double alpha, double w_clamp) {
  const double w = clamp_w(W, w_clamp);
  return std::log((1.0 + w) / (1.0 - w)) / (2.0 * alpha);
}

double w_to_b_slope(double W, double alpha, double w_clamp) {
  if (W < 0.0 || W > 1.0 - w_clamp) return 0.0;
  return 1.0 / (alpha * (1.0 - W) * (1.0 + W));
}

double h_from_b(double B) { return 1.0 / std::max(B, kMinBarrier); }

LieDerivatives lie_derivatives(const BarrierNet& net, const ControlAffineSystem& sys,
                               const SafetyFilterConfig& cfg, const StateVector& x) {
  sys.check_state(x);
  const DualEval e = net.forward_with_input_grad(x);
  const Eigen::VectorXd grad_b = w_to_b_slope(e.value, cfg.alpha, cfg.w_clamp) * e.input_grad;
  return {grad_b.dot(sys.drift(x)), sys.input_matrix(x).transpose() * grad_b};
}

double safety_measure(double lfb, const Eigen::VectorXd& lgb, const ControlVector& u_ref, double kappa,
                      double h) {
  return lfb + lgb.dot(u_ref) - kappa * h;
}

Eigen::VectorXd min_norm_correction(double s, const Eigen::VectorXd& lgb, double epsilon) {
  if (!(s > 0.0)) return Eigen::VectorXd::Zero(lgb.size());
  return (-s / (lgb.squaredNorm() + epsilon)) * lgb;
}

namespace {

FilterDiagnostics evaluate_barrier(const BarrierNet& net, const ControlAffineSystem& sys,
                                   const SafetyFilterConfig& cfg, const StateVector& x,
                                   const ControlVector& u_ref) {
  sys.check_state(x);
  if (u_ref.size() != sys.m) throw std::invalid_argument("filter: reference control has wrong size");
  const DualEval e = net.forward_with_input_grad(x);
  FilterDiagnostics d;
  d.W = e.value;
  d.B = w_to_b(e.value, cfg.alpha, cfg.w_clamp);
  d.h = h_from_b(d.B);
  const Eigen::VectorXd grad_b = w_to_b_slope(e.value, cfg.alpha, cfg.w_clamp) * e.input_grad;
  d.lfb = grad_b.dot(sys.drift(x));
  d.lgb = sys.input_matrix(x).transpose() * grad_b;
  d.s = safety_measure(d.lfb, d.lgb, u_ref, cfg.kappa, d.h);
  return d;
}

}  // namespace

FilterResult filtered_control(const BarrierNet& net, const ControlAffineSystem& sys,
                              const SafetyFilterConfig& cfg, const StateVector& x, const ControlVector& u_ref) {
  FilterResult out;
  out.diag = evaluate_barrier(net, sys, cfg, x, u_ref);
  auto& d = out.diag;
  const bool active = d.s > 0.0;
  const bool has_authority = d.lgb.squaredNorm() > 0.0;
  d.corrected = active && has_authority;
  d.degenerate = active && !has_authority;
  out.u = u_ref + min_norm_correction(d.s, d.lgb, cfg.epsilon);
  if (cfg.u_bounds) {
    const ControlVector clipped = clip(out.u, cfg.u_bounds);
    d.clipped = (clipped.array() != out.u.array()).any();
    out.u = clipped;
  }
  return out;
}

HalfspaceBoxProjection project_halfspace_box(const Eigen::VectorXd& u_ref, const Eigen::VectorXd& a,
                                             double b, const std::optional<ControlBounds>& box) {
  const Eigen::Index m = u_ref.size();
  const Eigen::VectorXd start = clip(u_ref, box);
  if (a.dot(start) <= b) return {start, false};

  const double a_norm2 = a.squaredNorm();
  if (!box) {
    if (a_norm2 == 0.0) return {u_ref, true};
    const double lambda = (a.dot(u_ref) - b) / a_norm2;
    return {u_ref - lambda * a, false};
  }

  // u(lambda) = clip(u_ref - lambda a) and a.u(lambda) is continuous,
  // piecewise linear and nonincreasing; its root is the optimum.
  const auto at = [&](double lambda) { return clip(u_ref - lambda * a, box); };

  Eigen::VectorXd far(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    far[i] = a[i] > 0.0 ? box->lower[i] : (a[i] < 0.0 ? box->upper[i] : start[i]);
  }
  if (a.dot(far) > b) return {far, true};

  std::vector<double> breaks;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (a[i] == 0.0) continue;
    for (double bound : {box->lower[i], box->upper[i]}) {
      const double lambda = (u_ref[i] - bound) / a[i];
      if (lambda > 0.0 && std::isfinite(lambda)) breaks.push_back(lambda);
    }
  }
  std::sort(breaks.begin(), breaks.end());

  double lo = 0.0;
  double f_lo = a.dot(start);
  for (double hi : breaks) {
    const double f_hi = a.dot(at(hi));
    if (f_hi <= b) {
      const double lambda = f_hi == f_lo ? hi : lo + (f_lo - b) * (hi - lo) / (f_lo - f_hi);
      return {at(lambda), false};
    }
    lo = hi;
    f_lo = f_hi;
  }
  // Past the last breakpoint every coordinate with a != 0 is pinned, so the
  // far point above already satisfied the constraint.
  return {far, false};
}

FilterResult qp_filtered_control(const BarrierNet& net, const ControlAffineSystem& sys,
                                 const SafetyFilterConfig& cfg, const StateVector& x,
                                 const ControlVector& u_ref) {
  FilterResult out;
  out.diag = evaluate_barrier(net, sys, cfg, x, u_ref);
  auto& d = out.diag;
  const auto proj = project_halfspace_box(u_ref, d.lgb, cfg.kappa * d.h - d.lfb, cfg.u_bounds);
  out.u = proj.u;
  d.infeasible = proj.infeasible;
  d.corrected = (out.u.array() != u_ref.array()).any();
  d.degenerate = d.s > 0.0 && d.lgb.squaredNorm() == 0.0;
  d.clipped = cfg.u_bounds && (clip(u_ref, cfg.u_bounds).array() != u_ref.array()).any();
  return out;
}

}  // namespace zcbf
