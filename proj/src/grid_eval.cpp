#include "zcbf/grid_eval.hpp"

#include "zcbf/zubov.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

namespace zcbf {

GridSlice GridSlice::over_domain(const DomainBox& domain, int axis_i, int axis_j, int resolution) {
  if (axis_i < 0 || axis_i >= domain.dim() || axis_j < 0 || axis_j >= domain.dim()) {
    throw std::invalid_argument("grid slice: axis out of range");
  }
  GridSlice s;
  s.axis_i = axis_i;
  s.axis_j = axis_j;
  s.fixed = StateVector::Zero(domain.dim());
  s.res_i = resolution;
  s.res_j = resolution;
  s.lo_i = domain.lower[axis_i];
  s.hi_i = domain.upper[axis_i];
  s.lo_j = domain.lower[axis_j];
  s.hi_j = domain.upper[axis_j];
  return s;
}

void GridSlice::validate(const DomainBox& domain) const {
  const int n = domain.dim();
  if (axis_i < 0 || axis_i >= n || axis_j < 0 || axis_j >= n) {
    throw std::invalid_argument("grid slice: axis out of range");
  }
  if (axis_i == axis_j) throw std::invalid_argument("grid slice: axes must differ");
  if (res_i < 2 || res_j < 2) throw std::invalid_argument("grid slice: resolution must be at least 2");
  if (fixed.size() != n) throw std::invalid_argument("grid slice: fixed state has the wrong dimension");
  if (!(lo_i < hi_i) || !(lo_j < hi_j)) throw std::invalid_argument("grid slice: empty range");
  if (lo_i < domain.lower[axis_i] || hi_i > domain.upper[axis_i] || lo_j < domain.lower[axis_j] ||
      hi_j > domain.upper[axis_j]) {
    throw std::invalid_argument("grid slice: range leaves the domain");
  }
}

StateVector GridSlice::node(int r, int c) const {
  StateVector x = fixed;
  x[axis_i] = lo_i + (hi_i - lo_i) * r / (res_i - 1);
  x[axis_j] = lo_j + (hi_j - lo_j) * c / (res_j - 1);
  return x;
}

double GridSlice::cell_area() const {
  return (hi_i - lo_i) / (res_i - 1) * (hi_j - lo_j) / (res_j - 1);
}

Eigen::MatrixXd evaluate_grid(const BarrierNet& net, const GridSlice& slice) {
  if (slice.fixed.size() != net.input_dim()) throw std::invalid_argument("grid: slice/network dimension mismatch");
  Eigen::MatrixXd grid(slice.res_i, slice.res_j);
  for (int r = 0; r < slice.res_i; ++r) {
    for (int c = 0; c < slice.res_j; ++c) grid(r, c) = net.forward(slice.node(r, c));
  }
  return grid;
}

std::vector<LevelSetReport> sublevel_report(const Eigen::MatrixXd& grid, const GridSlice& slice,
                                            std::span<const double> gammas) {
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    if (!(gammas[k] > 0.0 && gammas[k] < 1.0)) throw std::invalid_argument("sublevel: gamma must lie in (0, 1)");
    if (k > 0 && !(gammas[k] > gammas[k - 1])) throw std::invalid_argument("sublevel: gammas must increase");
  }
  std::vector<LevelSetReport> out;
  out.reserve(gammas.size());
  for (double g : gammas) {
    const long count = (grid.array() <= g).count();
    out.push_back({g, count, static_cast<double>(count) * slice.cell_area()});
  }
  return out;
}

AuditReport audit_safety_condition(const BarrierNet& net, const ControlAffineSystem& sys,
                                   const ReferenceController& ref, const SafetyFilterConfig& filter,
                                   const AuditConfig& cfg) {
  if (cfg.samples <= 0) throw std::invalid_argument("audit: samples must be positive");
  filter.validate();
  const auto controller = ref.clone();
  controller->reset();

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long max_draws = 1000L * cfg.samples;

  AuditReport rep;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  StateVector x(sys.n);
  while (rep.samples < cfg.samples) {
    if (++rep.draws > max_draws) throw std::runtime_error("audit: too few states below gamma");
    for (int i = 0; i < sys.n; ++i) {
      x[i] = sys.domain.lower[i] + unit(rng) * (sys.domain.upper[i] - sys.domain.lower[i]);
    }
    if (!(net.forward(x) < cfg.gamma)) continue;
    ++rep.samples;

    const ControlVector u_ref = controller->evaluate(x);
    const FilterResult fr = filtered_control(net, sys, filter, x, u_ref);
    const auto& d = fr.diag;
    const bool zero_lgb = d.lgb.squaredNorm() == 0.0;
    if (d.s > 0.0) ++rep.active;
    if (zero_lgb) ++rep.zero_lgb;
    const double margin = d.lfb + d.lgb.dot(fr.u) - filter.kappa * d.h;
    rep.worst_margin = std::max(rep.worst_margin, margin);
    if (margin > cfg.tol) {
      ++rep.violations;
      ++(zero_lgb ? rep.violations_zero_lgb : rep.violations_nonzero_lgb);
    }
  }
  rep.violation_fraction = static_cast<double>(rep.violations) / rep.samples;
  rep.zero_lgb_fraction = static_cast<double>(rep.zero_lgb) / rep.samples;
  return rep;
}

double mean_over_region(const BarrierNet& net, const DomainBox& box, const RegionSpec& region, int count,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd pts = sample_region(box, region, count, rng);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < pts.cols(); ++j) sum += net.forward(pts.col(j));
  return sum / static_cast<double>(pts.cols());
}

int strict_increases(const std::vector<LevelSetReport>& chain) {
  int n = 0;
  for (std::size_t k = 1; k < chain.size(); ++k) {
    if (chain[k].area_estimate > chain[k - 1].area_estimate) ++n;
  }
  return n;
}

void write_grid(const std::filesystem::path& path, const GridSlice& slice, const Eigen::MatrixXd& grid) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("grid: cannot open " + path.string());
  char buf[40];
  os << "# axes " << slice.axis_i << ' ' << slice.axis_j << '\n';
  std::snprintf(buf, sizeof buf, "%.10g", slice.lo_i);
  os << "# ranges " << buf;
  std::snprintf(buf, sizeof buf, "%.10g", slice.hi_i);
  os << ' ' << buf;
  std::snprintf(buf, sizeof buf, "%.10g", slice.lo_j);
  os << ' ' << buf;
  std::snprintf(buf, sizeof buf, "%.10g", slice.hi_j);
  os << ' ' << buf << '\n';
  os << "# resolution " << slice.res_i << ' ' << slice.res_j << '\n';
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.10g", grid(r, c));
      os << (c ? "," : "") << buf;
    }
    os << '\n';
  }
}

namespace {

// Blue (W = 0) to red (W = 1).
std::array<int, 3> heat_color(double w) {
  const double t = std::clamp(w, 0.0, 1.0);
  return {static_cast<int>(40 + 200 * t), static_cast<int>(70 + 80 * (1.0 - std::abs(2 * t - 1))),
          static_cast<int>(240 - 200 * t)};
}

}  // namespace

void write_contour_svg(const std::filesystem::path& path, const GridSlice& slice, const Eigen::MatrixXd& grid,
                       std::span<const double> gammas) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("contour: cannot open " + path.string());
  constexpr double size = 600.0;
  const auto ni = static_cast<int>(grid.rows());
  const auto nj = static_cast<int>(grid.cols());
  // axis_i runs left to right, axis_j bottom to top.
  auto px = [&](double r) { return size * r / (ni - 1); };
  auto py = [&](double c) { return size * (1.0 - c / (nj - 1)); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  os << "<title>W over x" << slice.axis_i << " in [" << slice.lo_i << ", " << slice.hi_i << "] (right), x"
     << slice.axis_j << " in [" << slice.lo_j << ", " << slice.hi_j << "] (up)</title>\n";
  const int step = std::max(1, std::max(ni, nj) / 100);
  for (int r = 0; r + step < ni; r += step) {
    for (int c = 0; c + step < nj; c += step) {
      const auto col = heat_color(grid(r, c));
      os << "<rect x=\"" << px(r) << "\" y=\"" << py(c + step) << "\" width=\"" << px(step) + 0.5
         << "\" height=\"" << (size - py(step)) + 0.5 << "\" fill=\"rgb(" << col[0] << ',' << col[1] << ','
         << col[2] << ")\"/>\n";
    }
  }

  for (double g : gammas) {
    os << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\"><title>gamma=" << g << "</title>\n";
    for (int r = 0; r + 1 < ni; ++r) {
      for (int c = 0; c + 1 < nj; ++c) {
        // corners counter-clockwise: (r,c) (r+1,c) (r+1,c+1) (r,c+1)
        const double v[4] = {grid(r, c), grid(r + 1, c), grid(r + 1, c + 1), grid(r, c + 1)};
        const double cr[4] = {0, 1, 1, 0};
        const double cc[4] = {0, 0, 1, 1};
        std::array<std::pair<double, double>, 4> hits;
        int nh = 0;
        for (int e = 0; e < 4; ++e) {
          const int a = e, b = (e + 1) % 4;
          if ((v[a] <= g) == (v[b] <= g)) continue;
          const double t = (g - v[a]) / (v[b] - v[a]);
          hits[nh++] = {r + cr[a] + t * (cr[b] - cr[a]), c + cc[a] + t * (cc[b] - cc[a])};
        }
        for (int k = 0; k + 1 < nh; k += 2) {
          os << "<line x1=\"" << px(hits[k].first) << "\" y1=\"" << py(hits[k].second) << "\" x2=\""
             << px(hits[k + 1].first) << "\" y2=\"" << py(hits[k + 1].second) << "\"/>\n";
        }
      }
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
}

}  // namespace zcbf
