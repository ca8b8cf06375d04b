#include "bifikle/models.hpp"

#include <cmath>
#include <vector>

#include "bifikle/common.hpp"

namespace bifikle {

namespace {

Eigen::Vector2d vec2(double a, double b) { return Eigen::Vector2d(a, b); }

}  // namespace

Field pulse_hf(const GridPtr& grid, double a, double b) {
  Field f;
  f.grid = grid;
  f.values.resize(grid->points());
  for (int i = 0; i < grid->nx; ++i) {
    double x = grid->xs[static_cast<std::size_t>(i)];
    f.values(i) = std::exp(-a * x) * std::sin(b * x);
  }
  return f;
}

Field pulse_lf_c1(const GridPtr& grid, double a, double b, bool series_replaces_sine) {
  Field f;
  f.grid = grid;
  f.values.resize(grid->points());
  for (int i = 0; i < grid->nx; ++i) {
    double x = grid->xs[static_cast<std::size_t>(i)];
    double bx = b * x;
    double series = bx - std::pow(bx, 3) / 6.0 + std::pow(bx, 5) / 120.0;
    double osc = series_replaces_sine ? series : std::sin(series);
    f.values(i) = std::exp(-a * x) * osc;
  }
  return f;
}

Field pulse_lf_c2(const GridPtr& grid, double a, double b) {
  Field f;
  f.grid = grid;
  f.values.resize(grid->points());
  for (int i = 0; i < grid->nx; ++i) {
    double x = grid->xs[static_cast<std::size_t>(i)];
    double g = b * x * 180.0 / M_PI;
    double gg = g * (180.0 - g);
    f.values(i) = std::exp(-a * x) * (3.5 * gg) / (15000.0 - gg);
  }
  return f;
}

ParamBounds pulse_bounds_c1() { return {vec2(40.0, 60.0), vec2(60.0, 80.0)}; }

ParamBounds pulse_bounds_c2() { return {vec2(40.0, 30.0), vec2(60.0, 50.0)}; }

GridPtr pulse_grid() {
  static GridPtr grid = make_uniform_grid_1d(256, 0.0, 0.1);
  return grid;
}

ParamBounds convdiff_bounds() {
  Eigen::VectorXd lo(4), hi(4);
  lo << 0.01, 0.05, 0.3, 0.55;
  hi << 0.05, 0.08, 0.7, 0.85;
  return {lo, hi};
}

ConvDiffFidelity convdiff_fidelity(int n) {
  if (n == 128) return {128, 0.0012};
  if (n == 32) return {32, 0.02};
  double dx = 1.0 / n;
  return {n, kConvDiffCfl * dx * dx / (4.0 * kConvDiffAlpha)};
}

std::pair<Field, Field> velocity_field(const GridPtr& grid) {
  Field u, v;
  u.grid = grid;
  v.grid = grid;
  u.values.resize(grid->points());
  v.values.resize(grid->points());
  for (int i = 0; i < grid->nx; ++i) {
    double x = grid->xs[static_cast<std::size_t>(i)];
    double sx = std::sin(M_PI * x);
    double cx = std::cos(M_PI * x);
    for (int j = 0; j < grid->ny; ++j) {
      double y = grid->ys[static_cast<std::size_t>(j)];
      double sm = std::sin(M_PI * (y - 0.05));
      double cm = std::cos(M_PI * (y - 0.05));
      double sp = std::sin(M_PI * (y + 0.05));
      double cp = std::cos(M_PI * (y + 0.05));
      int idx = grid->index(i, j);
      u.values(idx) = 0.1 - sx * sx * (sm * cm - sp * cp);
      v.values(idx) = sx * cx * (sm * sm - sp * sp);
    }
  }
  return {u, v};
}

Field source_field(const ConvDiffParams& p, const GridPtr& grid) {
  Field s;
  s.grid = grid;
  s.values.resize(grid->points());
  const double scale = p.strength / (2.0 * M_PI * p.width * p.width);
  const double inv2h2 = 1.0 / (2.0 * p.width * p.width);
  for (int i = 0; i < grid->nx; ++i) {
    double x = grid->xs[static_cast<std::size_t>(i)];
    for (int j = 0; j < grid->ny; ++j) {
      double y = grid->ys[static_cast<std::size_t>(j)];
      double d1 = (x - p.cx) * (x - p.cx) + (y - p.cy) * (y - p.cy);
      double d2 = (x - p.cx + 0.05) * (x - p.cx + 0.05) + (y - p.cy + 0.05) * (y - p.cy + 0.05);
      s.values(grid->index(i, j)) = scale * (std::exp(-d1 * inv2h2) - std::exp(-d2 * inv2h2));
    }
  }
  return s;
}

double convdiff_cfl_number(const ConvDiffFidelity& fidelity) {
  GridPtr grid = make_uniform_grid_2d(fidelity.n, fidelity.n);
  auto [u, v] = velocity_field(grid);
  const double inv_dx = fidelity.n;  // dx = dy = 1/n
  double worst = 0.0;
  for (int idx = 0; idx < grid->points(); ++idx) {
    double c = (std::abs(u.values(idx)) + std::abs(v.values(idx))) * inv_dx * fidelity.dt;
    worst = std::max(worst, c);
  }
  return worst;
}

Field convdiff_solve(const ConvDiffParams& p, const ConvDiffFidelity& fidelity) {
  // Bounds enforcement happens at the driver level; the solver accepts any
  // finite parameters (synthetic degenerate sources included).
  const int n = fidelity.n;
  GridPtr grid = make_uniform_grid_2d(n, n);
  auto [uf, vf] = velocity_field(grid);
  Field src = source_field(p, grid);

  const double inv_h = static_cast<double>(n);
  const double alpha_over_h = kConvDiffAlpha * inv_h;

  // Face-normal velocities averaged from adjacent cell centers (periodic).
  // uface(i,j) lives between cells (i-1,j) and (i,j); same for vface in y.
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd uface(n, n), vface(n, n);
  auto at = [&](const Eigen::VectorXd& vals, int i, int j) { return vals(i * n + j); };
  for (int i = 0; i < n; ++i) {
    int im = (i + n - 1) % n;
    for (int j = 0; j < n; ++j) {
      int jm = (j + n - 1) % n;
      uface(i, j) = 0.5 * (at(uf.values, im, j) + at(uf.values, i, j));
      vface(i, j) = 0.5 * (at(vf.values, i, jm) + at(vf.values, i, j));
    }
  }
  Eigen::MatrixXd source(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) source(i, j) = at(src.values, i, j);

  Eigen::MatrixXd fx(n, n), fy(n, n);  // total flux through the low face of each cell
  Eigen::MatrixXd next(n, n);

  double t = 0.0;
  long step = 0;
  while (t < kConvDiffEndTime - 1e-12) {
    double dt = std::min(fidelity.dt, kConvDiffEndTime - t);
    for (int i = 0; i < n; ++i) {
      int im = (i + n - 1) % n;
      for (int j = 0; j < n; ++j) {
        int jm = (j + n - 1) % n;
        double uw = uface(i, j);
        double upwind_x = uw >= 0.0 ? phi(im, j) : phi(i, j);
        fx(i, j) = uw * upwind_x - alpha_over_h * (phi(i, j) - phi(im, j));
        double vs = vface(i, j);
        double upwind_y = vs >= 0.0 ? phi(i, jm) : phi(i, j);
        fy(i, j) = vs * upwind_y - alpha_over_h * (phi(i, j) - phi(i, jm));
      }
    }
    for (int i = 0; i < n; ++i) {
      int ip = (i + 1) % n;
      for (int j = 0; j < n; ++j) {
        int jp = (j + 1) % n;
        next(i, j) = phi(i, j) -
                     dt * inv_h * (fx(ip, j) - fx(i, j) + fy(i, jp) - fy(i, j)) +
                     dt * source(i, j);
      }
    }
    phi.swap(next);
    t += dt;
    ++step;
    if (phi.cwiseAbs().maxCoeff() > 1e6)
      throw InstabilityError("convection-diffusion blow-up at step " + std::to_string(step),
                             step);
  }

  Field out;
  out.grid = grid;
  out.values.resize(grid->points());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.values(grid->index(i, j)) = phi(i, j);
  return out;
}

}  // namespace bifikle
