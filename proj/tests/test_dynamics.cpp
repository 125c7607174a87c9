#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "zcbf/dynamics.hpp"

using namespace zcbf;
using std::numbers::pi;

namespace {

StateVector vec(std::initializer_list<double> v) {
  StateVector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

ControlVector zero_u(int m) { return ControlVector::Zero(m); }

}  // namespace

TEST_CASE("pendulum field") {
  const auto sys = pendulum_system();
  CHECK(sys.field(vec({0, 0}), zero_u(1)).isApprox(vec({0, 0})));
  const auto f = sys.field(vec({pi / 2, 1}), zero_u(1));
  CHECK(f[0] == doctest::Approx(1.0));
  CHECK(f[1] == doctest::Approx(1.0));
  CHECK(sys.input_matrix(vec({0.3, -2})).isZero());
}

TEST_CASE("pendulum regions") {
  const auto sys = pendulum_system();
  CHECK(sys.safe.contains(vec({pi / 8, 1})));
  CHECK(sys.unsafe.contains(vec({pi / 2, 0})));
  CHECK(sys.safe.contains(vec({0, 0})));
  CHECK(sys.unsafe.contains(vec({0, 5})));
  CHECK_FALSE(sys.safe.contains(vec({pi / 4, 0})));
  CHECK_FALSE(sys.unsafe.contains(vec({pi / 4, 0})));
}

TEST_CASE("unicycle field and regions") {
  const auto sys = unicycle_system(1.0);
  CHECK(sys.field(vec({0, 0, 0}), zero_u(1)).isApprox(vec({1, 0, 0})));
  const auto f = sys.field(vec({0, 0, pi / 2}), zero_u(1));
  CHECK(f[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(1.0));
  CHECK(f[2] == 0.0);
  CHECK(sys.field(vec({0, 0, 0}), vec({0.7}))[2] == doctest::Approx(0.7));
  CHECK(sys.unsafe.contains(vec({0.1, 0.1, 0})));
  CHECK(sys.safe.contains(vec({1.6, 0.0, 0})));
  CHECK(sys.safe.contains(vec({0.0, -1.5, 0})));
  CHECK_FALSE(sys.safe.contains(vec({1.0, 1.0, 0})));
  CHECK_THROWS_AS(unicycle_system(0.0), std::invalid_argument);
  CHECK_THROWS_AS(unicycle_system(-1.0), std::invalid_argument);
}

TEST_CASE("quadrotor field") {
  const auto sys = quadrotor_system();
  const StateVector x0 = StateVector::Zero(6);
  CHECK(sys.field(x0, zero_u(2)).isApprox(vec({0, 0, 0, 0, -kGravity, 0})));
  for (double a : {0.0, 1.0, 4.905, 7.3}) {
    const auto f = sys.field(x0, vec({a, a}));
    CHECK(f[4] == doctest::Approx(2 * a - kGravity));
    CHECK(f[5] == doctest::Approx(0.0));
    const auto g = sys.field(x0, vec({a, -a}));
    CHECK(g[5] == doctest::Approx(2 * a));
    CHECK(g[3] == doctest::Approx(0.0));
  }
  CHECK(sys.unsafe.contains(vec({0.1, -0.2, 0, 0, 0, 0})));
  CHECK(sys.safe.contains(vec({1.3, 0.0, 0, 0, 0, 0})));
  CHECK_FALSE(sys.safe.contains(vec({1.0, 1.0, 0, 0, 0, 0})));
}

TEST_CASE("quadrotor input matrix rows at zero pitch") {
  const auto sys = quadrotor_system();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    StateVector x = test::uniform_in(sys.domain, rng);
    x[2] = 0.0;
    const auto g = sys.input_matrix(x);
    CHECK(g.row(3).isZero());
    CHECK(g(4, 0) == 1.0);
    CHECK(g(4, 1) == 1.0);
  }
}

TEST_CASE("unicycle reference") {
  const Eigen::Vector2d goal(1, 1);
  CHECK(unicycle_reference(vec({0, 0, 0}), goal, 1.0) == doctest::Approx(pi / 4));
  CHECK(unicycle_reference(vec({0, 0, pi / 4}), goal, 1.0) == doctest::Approx(0.0));
  CHECK(unicycle_reference(vec({0, 0, -pi / 4}), goal, 2.0) == doctest::Approx(pi));
  CHECK_THROWS_AS(UnicycleReference(goal, 0.0), std::invalid_argument);
}

TEST_CASE("property: unicycle reference is 2pi periodic in heading") {
  std::mt19937_64 rng(11);
  const auto sys = unicycle_system(0.5);
  const Eigen::Vector2d goal(1, 1);
  for (int k = 0; k < 1000; ++k) {
    const StateVector x = test::uniform_in(sys.domain, rng);
    StateVector y = x;
    y[2] += 2 * pi;
    CHECK(unicycle_reference(y, goal, 2.0) == doctest::Approx(unicycle_reference(x, goal, 2.0)).epsilon(1e-9));
  }
}

TEST_CASE("wrap_angle range") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int k = 0; k < 1000; ++k) {
    const double a = u(rng);
    const double w = wrap_angle(a);
    CHECK(w > -pi);
    CHECK(w <= pi);
    CHECK(std::abs(std::remainder(a - w, 2 * pi)) < 1e-9);
  }
  CHECK(wrap_angle(-pi) == doctest::Approx(pi));
}

TEST_CASE("quadrotor reference at target hovers") {
  const StateVector target = vec({1, 1, 0, 0, 0, 0});
  const auto u = quadrotor_reference(target, target, PidGains{});
  CHECK(u[0] == doctest::Approx(kGravity / 2));
  CHECK(u[1] == doctest::Approx(kGravity / 2));
  const auto sys = quadrotor_system();
  CHECK(sys.field(target, u)[4] == doctest::Approx(0.0));
}

TEST_CASE("quadrotor reference with zero gains is hover feedforward") {
  PidGains zero;
  zero.kp_y = zero.kd_y = zero.ki_y = zero.kp_z = zero.kd_z = zero.ki_z = zero.kp_phi = zero.kd_phi = 0.0;
  std::mt19937_64 rng(2);
  const auto sys = quadrotor_system();
  for (int k = 0; k < 50; ++k) {
    StateVector x = test::uniform_in(sys.domain, rng);
    x[2] = 0.0;
    const auto u = quadrotor_reference(x, vec({1, 1, 0, 0, 0, 0}), zero);
    CHECK(u[0] == doctest::Approx(kGravity / 2));
    CHECK(u[1] == doctest::Approx(kGravity / 2));
  }
}

TEST_CASE("property: mirroring y swaps the quadrotor control channels") {
  const auto sys = quadrotor_system();
  std::mt19937_64 rng(8);
  auto mirror = [](StateVector x) {
    x[0] = -x[0];
    x[2] = -x[2];
    x[3] = -x[3];
    x[5] = -x[5];
    return x;
  };
  for (int k = 0; k < 200; ++k) {
    const StateVector x = test::uniform_in(sys.domain, rng);
    const StateVector t = test::uniform_in(sys.domain, rng);
    const auto u = quadrotor_reference(x, t, PidGains{});
    const auto v = quadrotor_reference(mirror(x), mirror(t), PidGains{});
    CHECK(v[0] == doctest::Approx(u[1]).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(u[0]).epsilon(1e-12));
  }
}

TEST_CASE("quadrotor PID integral is clamped and reset") {
  PidGains g;
  g.ki_y = 1.0;
  g.integral_limit = 0.5;
  const StateVector target = vec({1, 1, 0, 0, 0, 0});
  QuadrotorPid pid(target, g);
  const StateVector x = StateVector::Zero(6);
  const auto u0 = pid.evaluate(x);
  for (int k = 0; k < 1000; ++k) pid.advance(x, 0.01);
  const auto clone = pid.clone();
  CHECK(clone->evaluate(x).isApprox(pid.evaluate(x)));
  CHECK_FALSE(pid.evaluate(x).isApprox(u0));
  // integral saturates at the limit, so further steps change nothing
  const auto sat = pid.evaluate(x);
  pid.advance(x, 0.01);
  CHECK(pid.evaluate(x) == sat);
  pid.reset();
  CHECK(pid.evaluate(x) == u0);
}

TEST_CASE("property: safe and unsafe regions are disjoint") {
  std::mt19937_64 rng(17);
  for (const auto& sys : {pendulum_system(), unicycle_system(0.5), quadrotor_system()}) {
    for (int k = 0; k < 10000; ++k) {
      const StateVector x = test::uniform_in(sys.domain, rng);
      CHECK_FALSE((sys.safe.contains(x) && sys.unsafe.contains(x)));
    }
  }
}

TEST_CASE("property: drift and input matrix are pure") {
  std::mt19937_64 rng(4);
  for (const auto& sys : {pendulum_system(), unicycle_system(0.5), quadrotor_system()}) {
    for (int k = 0; k < 100; ++k) {
      const StateVector x = test::uniform_in(sys.domain, rng);
      CHECK(sys.drift(x) == sys.drift(x));
      CHECK(sys.input_matrix(x) == sys.input_matrix(x));
    }
  }
}

TEST_CASE("region squared distance") {
  const auto sys = pendulum_system();
  CHECK(sys.safe.squared_distance(vec({0.0, 0.5})) == 0.0);
  CHECK(sys.safe.squared_distance(vec({pi / 8 + 0.1, 0})) == doctest::Approx(0.01));
  CHECK(sys.safe.squared_distance(vec({pi / 8 + 0.3, 1.4})) == doctest::Approx(0.25));
  // any-join: nearest of the alternatives
  const auto uni = unicycle_system(0.5);
  CHECK(uni.safe.squared_distance(vec({1.0, 1.4, 0})) == doctest::Approx(0.01));
}

TEST_CASE("property: squared distance vanishes exactly on the region") {
  std::mt19937_64 rng(21);
  for (const auto& sys : {pendulum_system(), unicycle_system(0.5), quadrotor_system()}) {
    for (int k = 0; k < 2000; ++k) {
      const StateVector x = test::uniform_in(sys.domain, rng);
      const double d = sys.safe.squared_distance(x);
      CHECK(d >= 0.0);
      CHECK((d == 0.0) == sys.safe.contains(x));
    }
  }
}

TEST_CASE("region validation") {
  RegionSpec r;
  r.bounds.push_back({5, AbsBound::Side::Within, 1.0});
  CHECK_THROWS_AS(r.validate(2), std::invalid_argument);
  RegionSpec empty;
  CHECK_THROWS_AS(empty.validate(2), std::invalid_argument);
  RegionSpec neg;
  neg.bounds.push_back({0, AbsBound::Side::Within, -1.0});
  CHECK_THROWS_AS(neg.validate(2), std::invalid_argument);
}

TEST_CASE("check_state rejects bad inputs") {
  const auto sys = pendulum_system();
  CHECK_THROWS_AS(sys.check_state(vec({0, 0, 0})), std::invalid_argument);
  CHECK_THROWS_AS(sys.check_state(vec({NAN, 0})), std::invalid_argument);
  CHECK_NOTHROW(sys.check_state(vec({0, 0})));
}
