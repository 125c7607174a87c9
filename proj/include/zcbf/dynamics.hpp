#ifndef ZCBF_DYNAMICS_HPP
#define ZCBF_DYNAMICS_HPP

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace zcbf {

using StateVector = Eigen::VectorXd;
using ControlVector = Eigen::VectorXd;

inline constexpr double kGravity = 9.81;

/// Axis-aligned box D = [lower, upper] used for sampling and slicing.
struct DomainBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const StateVector& x) const;
  /// Throws std::invalid_argument unless lower[i] < upper[i] for every i.
  void validate() const;
};

/// One per-coordinate absolute-value threshold: |x[coord]| <= t (Within) or
/// |x[coord]| >= t (Beyond).
struct AbsBound {
  enum class Side { Within, Beyond };

  int coord = 0;
  Side side = Side::Within;
  double threshold = 0.0;

  bool holds(const StateVector& x) const;
  /// Distance from x[coord] to the closed set this bound describes.
  double distance(const StateVector& x) const;
};

/// Conjunction (All) or disjunction (Any) of AbsBound terms.
struct RegionSpec {
  enum class Kind { Safe, Unsafe };
  enum class Join { All, Any };

  Kind kind = Kind::Safe;
  Join join = Join::All;
  std::vector<AbsBound> bounds;

  bool contains(const StateVector& x) const;

  /// Squared Euclidean distance to the region. Exact for the shapes used
  /// here: All-joins over distinct coordinates are product sets and Any-joins
  /// are unions, so distance is the root-sum-square or the minimum of terms.
  double squared_distance(const StateVector& x) const;

  /// Throws std::invalid_argument on out-of-range coordinates, negative
  /// thresholds or repeated coordinates inside an All-join.
  void validate(int n) const;
};

bool region_contains(const RegionSpec& r, const StateVector& x);

/// x' = f(x) + g(x) u
struct ControlAffineSystem {
  std::string name;
  int n = 0;
  int m = 0;
  std::function<Eigen::VectorXd(const StateVector&)> drift;
  std::function<Eigen::MatrixXd(const StateVector&)> input_matrix;
  DomainBox domain;
  RegionSpec safe;
  RegionSpec unsafe;
  // Angle coordinates that wrap; their box faces are not treated as domain
  // boundary when sampling boundary points.
  std::vector<bool> periodic;
  // Optional: which points of the domain boundary lie inside the safe set C,
  // and the candidate barrier B0 used as boundary target there. When unset
  // the whole domain boundary is outside C.
  std::function<bool(const StateVector&)> boundary_in_safe_set;
  std::function<double(const StateVector&)> boundary_barrier;

  Eigen::VectorXd field(const StateVector& x, const ControlVector& u) const;
  void check_state(const StateVector& x) const;
};

ControlAffineSystem pendulum_system();
ControlAffineSystem unicycle_system(double speed);

struct QuadrotorRegions {
  DomainBox domain;
  RegionSpec safe;
  RegionSpec unsafe;
};
QuadrotorRegions default_quadrotor_regions();
ControlAffineSystem quadrotor_system(const QuadrotorRegions& regions = default_quadrotor_regions());

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

double unicycle_reference(const StateVector& x, const Eigen::Vector2d& goal, double gain);

struct PidGains {
  double kp_y = 1.0, kd_y = 1.5, ki_y = 0.0;
  double kp_z = 1.0, kd_z = 1.5, ki_z = 0.0;
  double kp_phi = 20.0, kd_phi = 8.0;
  double max_tilt = 0.5;        // rad, limit on the commanded pitch
  double integral_limit = 1.0;  // anti-windup clamp on each integral
};

/// Cascaded PID for the planar quadrotor: the outer loop turns position
/// error into a desired acceleration, hence pitch and collective thrust; the
/// inner loop tracks the pitch. `integral` holds the outer-loop integral of
/// the (y, z) error.
ControlVector quadrotor_reference(const StateVector& x, const StateVector& target,
                                  const PidGains& gains,
                                  const Eigen::Vector2d& integral = Eigen::Vector2d::Zero());

/// Nominal controller interface. evaluate() is const and uses whatever
/// internal state the controller carries; advance() updates that state after
/// a step of length dt (PID integral). Training only ever calls evaluate()
/// on a freshly reset controller.
class ReferenceController {
 public:
  virtual ~ReferenceController() = default;
  virtual int input_dim() const = 0;
  virtual ControlVector evaluate(const StateVector& x) const = 0;
  virtual void advance(const StateVector& /*x*/, double /*dt*/) {}
  virtual void reset() {}
  virtual std::unique_ptr<ReferenceController> clone() const = 0;
};

class ZeroReference final : public ReferenceController {
 public:
  explicit ZeroReference(int m) : m_(m) {}
  int input_dim() const override { return m_; }
  ControlVector evaluate(const StateVector&) const override { return ControlVector::Zero(m_); }
  std::unique_ptr<ReferenceController> clone() const override {
    return std::make_unique<ZeroReference>(*this);
  }

 private:
  int m_;
};

class UnicycleReference final : public ReferenceController {
 public:
  UnicycleReference(Eigen::Vector2d goal, double gain);
  int input_dim() const override { return 1; }
  ControlVector evaluate(const StateVector& x) const override;
  std::unique_ptr<ReferenceController> clone() const override {
    return std::make_unique<UnicycleReference>(*this);
  }
  const Eigen::Vector2d& goal() const { return goal_; }

 private:
  Eigen::Vector2d goal_;
  double gain_;
};

class QuadrotorPid final : public ReferenceController {
 public:
  QuadrotorPid(StateVector target, PidGains gains);
  int input_dim() const override { return 2; }
  ControlVector evaluate(const StateVector& x) const override;
  void advance(const StateVector& x, double dt) override;
  void reset() override { integral_.setZero(); }
  std::unique_ptr<ReferenceController> clone() const override {
    return std::make_unique<QuadrotorPid>(*this);
  }
  const StateVector& target() const { return target_; }

 private:
  StateVector target_;
  PidGains gains_;
  Eigen::Vector2d integral_ = Eigen::Vector2d::Zero();
};

}  // namespace zcbf

#endif  // ZCBF_DYNAMICS_HPP
