#include <doctest.h>

#include <fstream>
#include <random>
#include <string>

#include "support.hpp"
#include "zcbf/grid_eval.hpp"

using namespace zcbf;

TEST_CASE("zero network gives an all-zero grid with full sublevel area") {
  const auto sys = pendulum_system();
  const BarrierNet zero({2, 8, 1}, Eigen::VectorXd::Zero(BarrierNet::param_count({2, 8, 1})));
  const auto slice = GridSlice::over_domain(sys.domain, 0, 1, 51);
  const auto grid = evaluate_grid(zero, slice);
  CHECK(grid.rows() == 51);
  CHECK(grid.cols() == 51);
  CHECK(grid.isZero());
  const std::vector<double> gammas{0.1, 0.5};
  for (const auto& l : sublevel_report(grid, slice, gammas)) {
    CHECK(l.cell_count_below == 51 * 51);
    CHECK(l.area_estimate == doctest::Approx(51.0 * 51.0 * slice.cell_area()));
  }
}

TEST_CASE("slice geometry") {
  const auto sys = unicycle_system(0.5);
  auto slice = GridSlice::over_domain(sys.domain, 0, 1, 5);
  CHECK(slice.fixed.size() == 3);
  CHECK(slice.node(0, 0) == (StateVector(3) << -2, -2, 0).finished());
  CHECK(slice.node(4, 2) == (StateVector(3) << 2, 0, 0).finished());
  CHECK(slice.cell_area() == doctest::Approx(1.0));
  slice.fixed[2] = 0.7;
  CHECK(slice.node(1, 1)[2] == 0.7);
  CHECK_NOTHROW(slice.validate(sys.domain));
  auto bad = slice;
  bad.axis_j = 0;
  CHECK_THROWS_AS(bad.validate(sys.domain), std::invalid_argument);
  bad = slice;
  bad.hi_i = 3.0;
  CHECK_THROWS_AS(bad.validate(sys.domain), std::invalid_argument);
  bad = slice;
  bad.res_i = 1;
  CHECK_THROWS_AS(bad.validate(sys.domain), std::invalid_argument);
  CHECK_THROWS_AS(GridSlice::over_domain(sys.domain, 0, 5), std::invalid_argument);
}

TEST_CASE("grid rows follow axis i and values stay in (-1, 1)") {
  const auto sys = quadrotor_system();
  const auto net = test::random_net({6, 16, 16, 1}, 3, 1.0);
  auto slice = GridSlice::over_domain(sys.domain, 1, 4, 21);
  const auto grid = evaluate_grid(net, slice);
  for (int r = 0; r < 21; r += 5) {
    for (int c = 0; c < 21; c += 4) {
      StateVector x = StateVector::Zero(6);
      x[1] = sys.domain.lower[1] + (sys.domain.upper[1] - sys.domain.lower[1]) * r / 20.0;
      x[4] = sys.domain.lower[4] + (sys.domain.upper[4] - sys.domain.lower[4]) * c / 20.0;
      CHECK(grid(r, c) == net.forward(x));
    }
  }
  CHECK((grid.array().abs() < 1.0).all());
}

TEST_CASE("property: evaluation order does not matter") {
  const auto sys = pendulum_system();
  const auto net = test::random_net({2, 16, 16, 1}, 5);
  const auto slice = GridSlice::over_domain(sys.domain, 0, 1, 31);
  const auto grid = evaluate_grid(net, slice);
  std::vector<std::pair<int, int>> nodes;
  for (int r = 0; r < 31; ++r)
    for (int c = 0; c < 31; ++c) nodes.emplace_back(r, c);
  std::shuffle(nodes.begin(), nodes.end(), std::mt19937_64(1));
  for (const auto& [r, c] : nodes) CHECK(net.forward(slice.node(r, c)) == grid(r, c));
}

TEST_CASE("property: sublevel areas are monotone in gamma") {
  std::mt19937_64 rng(7);
  const auto sys = unicycle_system(0.5);
  for (int k = 0; k < 20; ++k) {
    const auto net = test::random_net({3, 8, 8, 1}, 70 + k, 1.0);
    const auto slice = GridSlice::over_domain(sys.domain, 0, 1, 41);
    const auto grid = evaluate_grid(net, slice);
    std::vector<double> gammas;
    double g = 0.0;
    for (int i = 0; i < 6; ++i) {
      g += std::uniform_real_distribution<double>(0.01, 0.15)(rng);
      gammas.push_back(g);
    }
    const auto rep = sublevel_report(grid, slice, gammas);
    for (std::size_t i = 1; i < rep.size(); ++i) {
      CHECK(rep[i].area_estimate >= rep[i - 1].area_estimate);
      CHECK(rep[i].cell_count_below >= rep[i - 1].cell_count_below);
    }
  }
}

TEST_CASE("gamma validation and strict increase count") {
  const auto sys = pendulum_system();
  const auto slice = GridSlice::over_domain(sys.domain, 0, 1, 3);
  const Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(sublevel_report(grid, slice, std::vector<double>{0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(sublevel_report(grid, slice, std::vector<double>{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(sublevel_report(grid, slice, std::vector<double>{1.0}), std::invalid_argument);
  std::vector<LevelSetReport> chain{{0.1, 1, 1.0}, {0.2, 2, 2.0}, {0.3, 2, 2.0}, {0.4, 5, 5.0}};
  CHECK(strict_increases(chain) == 2);
}

TEST_CASE("mean over region") {
  const auto sys = pendulum_system();
  const BarrierNet zero({2, 4, 1}, Eigen::VectorXd::Zero(BarrierNet::param_count({2, 4, 1})));
  CHECK(mean_over_region(zero, sys.domain, sys.safe, 100, 1) == 0.0);
  const auto net = test::random_net({2, 8, 1}, 2);
  CHECK(mean_over_region(net, sys.domain, sys.unsafe, 200, 4) == mean_over_region(net, sys.domain, sys.unsafe, 200, 4));
}

TEST_CASE("audit on the zero network: W = 0 is never active") {
  const auto sys = unicycle_system(0.5);
  const BarrierNet zero({3, 4, 1}, Eigen::VectorXd::Zero(BarrierNet::param_count({3, 4, 1})));
  AuditConfig cfg;
  cfg.samples = 500;
  const auto rep = audit_safety_condition(zero, sys, UnicycleReference(Eigen::Vector2d(1, 1), 3.0),
                                          SafetyFilterConfig{}, cfg);
  CHECK(rep.samples == 500);
  CHECK(rep.draws == 500);
  CHECK(rep.active == 0);
  CHECK(rep.violations == 0);
  CHECK(rep.zero_lgb == 500);
  CHECK(rep.zero_lgb_fraction == 1.0);
}

TEST_CASE("property: audit violations need a tiny or zero L_gB") {
  // with epsilon = tol the post-filter margin is s eps / (|lgb|^2 + eps), so
  // states with |lgb|^2 >= 1 and s <= 1 can never violate
  const auto sys = unicycle_system(0.5);
  const UnicycleReference ref(Eigen::Vector2d(1, 1), 3.0);
  for (int k = 0; k < 5; ++k) {
    const auto net = test::random_net({3, 16, 16, 1}, 80 + k, 0.8);
    AuditConfig cfg;
    cfg.samples = 2000;
    cfg.seed = k;
    const auto rep = audit_safety_condition(net, sys, ref, SafetyFilterConfig{}, cfg);
    CHECK(rep.violations == rep.violations_zero_lgb + rep.violations_nonzero_lgb);
    CHECK(rep.violation_fraction == doctest::Approx(rep.violations / 2000.0));
  }
}

TEST_CASE("grid and svg files") {
  test::TempDir dir("grid");
  const auto sys = pendulum_system();
  const auto net = test::random_net({2, 8, 1}, 9);
  const auto slice = GridSlice::over_domain(sys.domain, 0, 1, 11);
  const auto grid = evaluate_grid(net, slice);
  write_grid(dir.path() / "g.txt", slice, grid);
  std::ifstream is(dir.path() / "g.txt");
  std::string l1, l2, l3;
  std::getline(is, l1);
  std::getline(is, l2);
  std::getline(is, l3);
  CHECK(l1 == "# axes 0 1");
  CHECK(l2.rfind("# ranges ", 0) == 0);
  CHECK(l3 == "# resolution 11 11");
  int rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 10);
  }
  CHECK(rows == 11);

  const std::vector<double> gammas{0.3, 0.6};
  write_contour_svg(dir.path() / "c.svg", slice, grid, gammas);
  std::ifstream svg(dir.path() / "c.svg");
  const std::string text((std::istreambuf_iterator<char>(svg)), {});
  CHECK(text.rfind("<svg", 0) == 0);
  CHECK(text.find("</svg>") != std::string::npos);
}
