#ifndef ZCBF_GRID_EVAL_HPP
#define ZCBF_GRID_EVAL_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "zcbf/barrier_control.hpp"
#include "zcbf/dynamics.hpp"
#include "zcbf/net.hpp"

namespace zcbf {

/// 2-D slice through the state space: axes i and j vary over a regular grid,
/// every other coordinate is held at `fixed`.
struct GridSlice {
  int axis_i = 0;
  int axis_j = 1;
  StateVector fixed;  // full state; entries on axis_i/axis_j are ignored
  int res_i = 201;
  int res_j = 201;
  double lo_i = 0.0, hi_i = 1.0;
  double lo_j = 0.0, hi_j = 1.0;

  /// Default slice: the given axes over the full domain, the rest at zero.
  static GridSlice over_domain(const DomainBox& domain, int axis_i, int axis_j, int resolution = 201);

  void validate(const DomainBox& domain) const;
  StateVector node(int r, int c) const;
  double cell_area() const;
};

/// W at every node; entry (r, c) is node r along axis_i and c along axis_j.
Eigen::MatrixXd evaluate_grid(const BarrierNet& net, const GridSlice& slice);

struct LevelSetReport {
  double gamma = 0.0;
  long cell_count_below = 0;
  double area_estimate = 0.0;
};

/// Node counts and areas of {W <= gamma}. Gammas must be strictly
/// increasing and lie in (0, 1).
std::vector<LevelSetReport> sublevel_report(const Eigen::MatrixXd& grid, const GridSlice& slice,
                                            std::span<const double> gammas);

struct AuditConfig {
  int samples = 10000;
  double gamma = 0.9;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct AuditReport {
  int samples = 0;
  long draws = 0;                 // domain draws needed to collect the samples
  int active = 0;                 // s > 0 under u_ref
  int zero_lgb = 0;               // states with L_gB == 0
  int violations = 0;             // L_fB + L_gB u > kappa h + tol after filtering
  int violations_zero_lgb = 0;
  int violations_nonzero_lgb = 0;
  double violation_fraction = 0.0;
  double zero_lgb_fraction = 0.0;
  double worst_margin = 0.0;      // max of L_fB + L_gB u - kappa h
};

/// Draws states uniformly from the domain with W < gamma and checks the
/// barrier condition under the closed-form filtered control.
AuditReport audit_safety_condition(const BarrierNet& net, const ControlAffineSystem& sys,
                                   const ReferenceController& ref, const SafetyFilterConfig& filter,
                                   const AuditConfig& cfg);

/// Mean of W over `count` states drawn uniformly from region within the box.
double mean_over_region(const BarrierNet& net, const DomainBox& box, const RegionSpec& region, int count,
                        std::uint64_t seed);

/// Number of strict increases along the area chain.
int strict_increases(const std::vector<LevelSetReport>& chain);

/// Header: "# axes i j", "# ranges lo_i hi_i lo_j hi_j", "# resolution ni nj",
/// then res_i comma-separated rows of res_j values.
void write_grid(const std::filesystem::path& path, const GridSlice& slice, const Eigen::MatrixXd& grid);

/// Heat map plus marching-squares contours at each gamma, as standalone SVG.
void write_contour_svg(const std::filesystem::path& path, const GridSlice& slice, const Eigen::MatrixXd& grid,
                       std::span<const double> gammas);

}  // namespace zcbf

#endif  // ZCBF_GRID_EVAL_HPP
