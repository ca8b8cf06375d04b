#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace bifikle {

// Spatial grid with per-point integration weights. Immutable after
// construction; shared across snapshots and surrogates.
struct Grid {
  int dim = 1;
  int nx = 0;
  int ny = 1;  // 1 for 1D grids
  std::vector<double> xs;       // axis coordinates, strictly increasing
  std::vector<double> ys;       // empty for 1D
  Eigen::VectorXd weights;      // per point, linearized index = ix * ny + iy
  bool periodic = false;
  double lo_x = 0.0, hi_x = 1.0;
  double lo_y = 0.0, hi_y = 1.0;

  int points() const { return nx * ny; }
  int index(int ix, int iy) const { return ix * ny + iy; }
  double measure() const {
    return dim == 1 ? (hi_x - lo_x) : (hi_x - lo_x) * (hi_y - lo_y);
  }
};

using GridPtr = std::shared_ptr<const Grid>;

struct Field {
  GridPtr grid;
  Eigen::VectorXd values;  // one scalar per grid point
};

// Equispaced nodes on [lo, hi] with composite-trapezoid weights.
GridPtr make_uniform_grid_1d(int n_points, double lo, double hi);

// Cell-centered unit-square grid, uniform weights 1/(nx*ny), periodic.
GridPtr make_uniform_grid_2d(int nx, int ny);

bool same_grid(const Grid& a, const Grid& b);

// Block-average a fine cell-centered field onto a coarser cell-centered
// grid; extents must divide exactly. Conserves the weighted integral.
Field restrict_field(const Field& fine, const GridPtr& coarse);

double domain_integral(const Field& f);
double weighted_norm(const Grid& grid, const Eigen::VectorXd& values);
inline double weighted_norm(const Field& f) { return weighted_norm(*f.grid, f.values); }

// Field CSV: key-value header lines describing the grid, then one `value`
// row per point.
void write_field_csv(const std::filesystem::path& path, const Field& field);
Field read_field_csv(const std::filesystem::path& path);

GridPtr grid_from_meta(const std::map<std::string, std::string>& meta);
std::vector<std::pair<std::string, std::string>> grid_meta(const Grid& grid);

}  // namespace bifikle
