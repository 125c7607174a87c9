#include "zcbf/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace zcbf {

namespace {

constexpr double kPi = std::numbers::pi;

AbsBound within(int coord, double t) { return {coord, AbsBound::Side::Within, t}; }
AbsBound beyond(int coord, double t) { return {coord, AbsBound::Side::Beyond, t}; }

DomainBox make_box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  DomainBox box;
  box.lower = Eigen::Map<const Eigen::VectorXd>(lo.begin(), static_cast<Eigen::Index>(lo.size()));
  box.upper = Eigen::Map<const Eigen::VectorXd>(hi.begin(), static_cast<Eigen::Index>(hi.size()));
  return box;
}

}  // namespace

bool DomainBox::contains(const StateVector& x) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  }
  return true;
}

void DomainBox::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw std::invalid_argument("domain box: lower/upper size mismatch");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      std::ostringstream os;
      os << "domain box: lower[" << i << "] must be < upper[" << i << "]";
      throw std::invalid_argument(os.str());
    }
  }
}

bool AbsBound::holds(const StateVector& x) const {
  const double a = std::abs(x[coord]);
  return side == Side::Within ? a <= threshold : a >= threshold;
}

double AbsBound::distance(const StateVector& x) const {
  const double a = std::abs(x[coord]);
  return side == Side::Within ? std::max(a - threshold, 0.0) : std::max(threshold - a, 0.0);
}

bool RegionSpec::contains(const StateVector& x) const {
  if (join == Join::All) {
    return std::all_of(bounds.begin(), bounds.end(), [&](const AbsBound& b) { return b.holds(x); });
  }
  return std::any_of(bounds.begin(), bounds.end(), [&](const AbsBound& b) { return b.holds(x); });
}

double RegionSpec::squared_distance(const StateVector& x) const {
  if (bounds.empty()) return 0.0;
  if (join == Join::All) {
    double acc = 0.0;
    for (const auto& b : bounds) {
      const double d = b.distance(x);
      acc += d * d;
    }
    return acc;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : bounds) {
    const double d = b.distance(x);
    best = std::min(best, d * d);
  }
  return best;
}

void RegionSpec::validate(int n) const {
  if (bounds.empty()) throw std::invalid_argument("region: needs at least one bound");
  std::set<int> seen;
  for (const auto& b : bounds) {
    if (b.coord < 0 || b.coord >= n) throw std::invalid_argument("region: coordinate out of range");
    if (!(b.threshold >= 0.0) || !std::isfinite(b.threshold)) {
      throw std::invalid_argument("region: threshold must be finite and non-negative");
    }
    if (join == Join::All && !seen.insert(b.coord).second) {
      throw std::invalid_argument("region: repeated coordinate in an 'all' region");
    }
  }
}

bool region_contains(const RegionSpec& r, const StateVector& x) { return r.contains(x); }

Eigen::VectorXd ControlAffineSystem::field(const StateVector& x, const ControlVector& u) const {
  return drift(x) + input_matrix(x) * u;
}

void ControlAffineSystem::check_state(const StateVector& x) const {
  if (x.size() != n) {
    std::ostringstream os;
    os << name << ": state has dimension " << x.size() << ", expected " << n;
    throw std::invalid_argument(os.str());
  }
  if (!x.allFinite()) throw std::invalid_argument(name + ": state is not finite");
}

ControlAffineSystem pendulum_system() {
  ControlAffineSystem sys;
  sys.name = "pendulum";
  sys.n = 2;
  sys.m = 1;
  sys.drift = [](const StateVector& x) {
    Eigen::VectorXd f(2);
    f << x[1], std::sin(x[0]);
    return f;
  };
  sys.input_matrix = [](const StateVector&) { return Eigen::MatrixXd::Zero(2, 1); };
  sys.domain = make_box({-kPi, -8.0}, {kPi, 8.0});
  sys.safe = {RegionSpec::Kind::Safe, RegionSpec::Join::All, {within(0, kPi / 8.0), within(1, 1.0)}};
  sys.unsafe = {RegionSpec::Kind::Unsafe, RegionSpec::Join::Any, {beyond(0, kPi / 2.0), beyond(1, 4.0)}};
  sys.periodic = {false, false};
  return sys;
}

ControlAffineSystem unicycle_system(double speed) {
  if (!(speed > 0.0) || !std::isfinite(speed)) {
    throw std::invalid_argument("unicycle: forward speed must be positive");
  }
  ControlAffineSystem sys;
  sys.name = "unicycle";
  sys.n = 3;
  sys.m = 1;
  sys.drift = [speed](const StateVector& x) {
    Eigen::VectorXd f(3);
    f << speed * std::cos(x[2]), speed * std::sin(x[2]), 0.0;
    return f;
  };
  sys.input_matrix = [](const StateVector&) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 1);
    g(2, 0) = 1.0;
    return g;
  };
  sys.domain = make_box({-2.0, -2.0, -kPi}, {2.0, 2.0, kPi});
  sys.safe = {RegionSpec::Kind::Safe, RegionSpec::Join::Any, {beyond(0, 1.5), beyond(1, 1.5)}};
  sys.unsafe = {RegionSpec::Kind::Unsafe, RegionSpec::Join::All, {within(0, 0.2), within(1, 0.2)}};
  sys.periodic = {false, false, true};
  return sys;
}

QuadrotorRegions default_quadrotor_regions() {
  QuadrotorRegions r;
  r.domain = make_box({-2.0, -2.0, -kPi / 3.0, -2.0, -2.0, -2.0}, {2.0, 2.0, kPi / 3.0, 2.0, 2.0, 2.0});
  r.safe = {RegionSpec::Kind::Safe, RegionSpec::Join::Any, {beyond(0, 1.2), beyond(1, 1.2)}};
  r.unsafe = {RegionSpec::Kind::Unsafe, RegionSpec::Join::All, {within(0, 0.2), within(1, 0.2)}};
  return r;
}

ControlAffineSystem quadrotor_system(const QuadrotorRegions& regions) {
  ControlAffineSystem sys;
  sys.name = "quadrotor";
  sys.n = 6;
  sys.m = 2;
  sys.drift = [](const StateVector& x) {
    Eigen::VectorXd f(6);
    f << x[3], x[4], x[5], 0.0, -kGravity, 0.0;
    return f;
  };
  sys.input_matrix = [](const StateVector& x) {
    const double s = std::sin(x[2]);
    const double c = std::cos(x[2]);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(6, 2);
    g(3, 0) = -s;
    g(3, 1) = -s;
    g(4, 0) = c;
    g(4, 1) = c;
    g(5, 0) = 1.0;
    g(5, 1) = -1.0;
    return g;
  };
  sys.domain = regions.domain;
  sys.safe = regions.safe;
  sys.safe.kind = RegionSpec::Kind::Safe;
  sys.unsafe = regions.unsafe;
  sys.unsafe.kind = RegionSpec::Kind::Unsafe;
  sys.domain.validate();
  if (sys.domain.dim() != 6) throw std::invalid_argument("quadrotor: domain must be 6-dimensional");
  sys.safe.validate(6);
  sys.unsafe.validate(6);
  sys.periodic.assign(6, false);
  return sys;
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double unicycle_reference(const StateVector& x, const Eigen::Vector2d& goal, double gain) {
  const double bearing = std::atan2(goal.y() - x[1], goal.x() - x[0]);
  return gain * wrap_angle(bearing - x[2]);
}

ControlVector quadrotor_reference(const StateVector& x, const StateVector& target,
                                  const PidGains& k, const Eigen::Vector2d& integral) {
  const double ay = k.kp_y * (target[0] - x[0]) + k.kd_y * (target[3] - x[3]) + k.ki_y * integral.x();
  const double az = k.kp_z * (target[1] - x[1]) + k.kd_z * (target[4] - x[4]) + k.ki_z * integral.y();

  // v_y' = -sin(phi) T and v_z' = cos(phi) T - g, so the commanded
  // acceleration fixes the pitch direction of the thrust vector.
  const double phi_des = std::clamp(std::atan2(-ay, kGravity + az), -k.max_tilt, k.max_tilt);
  const double thrust = (kGravity + az) / std::max(std::cos(x[2]), 0.2);
  const double torque = k.kp_phi * (phi_des - x[2]) + k.kd_phi * (target[5] - x[5]);

  ControlVector u(2);
  u << 0.5 * (thrust + torque), 0.5 * (thrust - torque);
  return u;
}

UnicycleReference::UnicycleReference(Eigen::Vector2d goal, double gain) : goal_(goal), gain_(gain) {
  if (!(gain > 0.0)) throw std::invalid_argument("unicycle reference: gain must be positive");
}

ControlVector UnicycleReference::evaluate(const StateVector& x) const {
  ControlVector u(1);
  u[0] = unicycle_reference(x, goal_, gain_);
  return u;
}

QuadrotorPid::QuadrotorPid(StateVector target, PidGains gains)
    : target_(std::move(target)), gains_(gains) {
  if (target_.size() != 6) throw std::invalid_argument("quadrotor PID: target must have 6 entries");
  const double all[] = {gains.kp_y, gains.kd_y, gains.ki_y, gains.kp_z, gains.kd_z,
                        gains.ki_z, gains.kp_phi, gains.kd_phi, gains.max_tilt, gains.integral_limit};
  for (double g : all) {
    if (!(g >= 0.0)) throw std::invalid_argument("quadrotor PID: gains must be non-negative");
  }
}

ControlVector QuadrotorPid::evaluate(const StateVector& x) const {
  return quadrotor_reference(x, target_, gains_, integral_);
}

void QuadrotorPid::advance(const StateVector& x, double dt) {
  const double lim = gains_.integral_limit;
  integral_.x() = std::clamp(integral_.x() + dt * (target_[0] - x[0]), -lim, lim);
  integral_.y() = std::clamp(integral_.y() + dt * (target_[1] - x[1]), -lim, lim);
}

}  // namespace zcbf
