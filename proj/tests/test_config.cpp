#include <doctest.h>

#include <cmath>
#include <string>

#include "zcbf/config.hpp"

using namespace zcbf;

namespace {

const char* kMinimal = R"(
environment: unicycle
sim:
  x0: [-1.5, -1.5, 0.5]
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const auto cfg = parse_config(kMinimal);
  CHECK(cfg.environment == Environment::Unicycle);
  CHECK(cfg.seed == 0);
  CHECK(cfg.train.alpha == 1.0);
  CHECK(cfg.filter.alpha == 1.0);
  CHECK(cfg.sim.x0.size() == 3);
  CHECK(cfg.grid.gammas.size() == 6);
  CHECK(make_system(cfg).n == 3);
  CHECK(make_reference(cfg)->input_dim() == 1);
  const auto slice = make_slice(cfg, make_system(cfg));
  CHECK(slice.res_i == 201);
  CHECK(slice.fixed.isZero());
}

TEST_CASE("shipped configs load and validate") {
  for (const char* name : {"pendulum", "unicycle", "quadrotor"}) {
    INFO(name);
    const auto cfg = load_config(std::string(ZCBF_CONFIG_DIR) + "/" + name + ".yaml");
    CHECK(environment_name(cfg.environment) == std::string(name));
    CHECK(cfg.train.weights.residual == 1.0);
    CHECK(cfg.train.weights.boundary == 1.0);
    CHECK(cfg.train.weights.safe == 5.0);
    CHECK(cfg.train.weights.unsafe == 5.0);
    CHECK(cfg.train.batch_size == 512);
    CHECK(cfg.train.learning_rate == 1e-3);
    CHECK(cfg.sim.dt == 0.01);
    CHECK(cfg.sim.t_final == 10.0);
  }
}

TEST_CASE("to_yaml round trips") {
  for (const char* name : {"pendulum", "unicycle", "quadrotor"}) {
    INFO(name);
    auto cfg = load_config(std::string(ZCBF_CONFIG_DIR) + "/" + name + ".yaml");
    cfg.seed = 17;
    cfg.filter.kappa = 0.123456789012345;
    cfg.grid.fixed = StateVector::Constant(make_system(cfg).n, 0.25);
    const auto back = parse_config(to_yaml(cfg));
    CHECK(to_yaml(back) == to_yaml(cfg));
    CHECK(back.seed == 17);
    CHECK(back.filter.kappa == cfg.filter.kappa);
    CHECK(back.sim.x0 == cfg.sim.x0);
    REQUIRE(back.grid.fixed);
    CHECK(*back.grid.fixed == *cfg.grid.fixed);
    CHECK(back.quadrotor.target == cfg.quadrotor.target);
  }
}

TEST_CASE("errors name the offending key") {
  CHECK(starts_with(error_of(std::string(kMinimal) + "bogus: 1\n"), "bogus"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "train:\n  alpha: -1\n"), "train.alpha"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "train:\n  alpha: 0\n"), "train.alpha"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "train:\n  alfa: 1\n"), "train.alfa"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "train:\n  alpha: abc\n"), "train.alpha"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "filter:\n  alpha: 2\n"), "filter.alpha"));
  CHECK(starts_with(error_of("environment: unicycle\nsim:\n  x0: [0, 0, 0]\n  mode: fast\n"), "sim.mode"));
  CHECK(starts_with(error_of("environment: unicycle\n"), "sim.x0"));
  CHECK(starts_with(error_of("environment: boat\nsim:\n  x0: [0]\n"), "environment"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "grid:\n  gammas: [0.5, 0.2]\n"), "grid.gammas"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "audit:\n  gamma: 1.5\n"), "audit.gamma"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "unicycle:\n  goal: [1]\n"), "unicycle.goal"));
  CHECK(starts_with(error_of(std::string(kMinimal) + "filter:\n  kappa: -1\n"), "filter.kappa"));
  CHECK_FALSE(error_of("environment: pendulum\nsim:\n  x0: [0, 0, 0]\n").empty());
  CHECK_FALSE(error_of("environment: [unclosed\n").empty());
}

TEST_CASE("load_config reports a missing file") {
  CHECK_THROWS_AS(load_config("/nonexistent/zcbf.yaml"), ConfigError);
}

TEST_CASE("validate catches edits made in code") {
  auto cfg = parse_config(kMinimal);
  CHECK_NOTHROW(validate(cfg));
  cfg.filter.alpha = 2.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = parse_config(kMinimal);
  cfg.sim.x0 = StateVector::Constant(3, NAN);
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = parse_config(kMinimal);
  cfg.unicycle.speed = 0.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}
