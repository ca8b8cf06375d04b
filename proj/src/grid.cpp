#include "bifikle/grid.hpp"

#include <cmath>
#include <map>

#include "bifikle/common.hpp"
#include "bifikle/io.hpp"

namespace bifikle {

GridPtr make_uniform_grid_1d(int n_points, double lo, double hi) {
  if (n_points < 2) throw InvalidArgument("1D grid needs at least 2 points");
  if (!(lo < hi)) throw InvalidArgument("degenerate interval: lo must be < hi");
  auto g = std::make_shared<Grid>();
  g->dim = 1;
  g->nx = n_points;
  g->ny = 1;
  g->lo_x = lo;
  g->hi_x = hi;
  g->lo_y = 0.0;
  g->hi_y = 1.0;
  g->xs.resize(static_cast<std::size_t>(n_points));
  const double h = (hi - lo) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) g->xs[static_cast<std::size_t>(i)] = lo + h * i;
  g->xs.back() = hi;
  g->weights.resize(n_points);
  g->weights.setConstant(h);
  g->weights(0) = 0.5 * h;
  g->weights(n_points - 1) = 0.5 * h;
  return g;
}

GridPtr make_uniform_grid_2d(int nx, int ny) {
  if (nx < 2 || ny < 2) throw InvalidArgument("2D grid needs extents >= 2");
  auto g = std::make_shared<Grid>();
  g->dim = 2;
  g->nx = nx;
  g->ny = ny;
  g->periodic = true;
  g->lo_x = 0.0;
  g->hi_x = 1.0;
  g->lo_y = 0.0;
  g->hi_y = 1.0;
  g->xs.resize(static_cast<std::size_t>(nx));
  g->ys.resize(static_cast<std::size_t>(ny));
  for (int i = 0; i < nx; ++i) g->xs[static_cast<std::size_t>(i)] = (i + 0.5) / nx;
  for (int j = 0; j < ny; ++j) g->ys[static_cast<std::size_t>(j)] = (j + 0.5) / ny;
  g->weights.resize(nx * ny);
  g->weights.setConstant(1.0 / (static_cast<double>(nx) * ny));
  return g;
}

bool same_grid(const Grid& a, const Grid& b) {
  if (&a == &b) return true;
  return a.dim == b.dim && a.nx == b.nx && a.ny == b.ny && a.lo_x == b.lo_x &&
         a.hi_x == b.hi_x && a.lo_y == b.lo_y && a.hi_y == b.hi_y &&
         a.periodic == b.periodic;
}

Field restrict_field(const Field& fine, const GridPtr& coarse) {
  const Grid& f = *fine.grid;
  const Grid& c = *coarse;
  if (f.dim != 2 || c.dim != 2)
    throw IncompatibleGrids("restriction is defined for 2D cell-centered grids");
  if (f.nx % c.nx != 0 || f.ny % c.ny != 0)
    throw IncompatibleGrids("fine extents must be integer multiples of coarse extents");
  const int rx = f.nx / c.nx;
  const int ry = f.ny / c.ny;
  Field out;
  out.grid = coarse;
  out.values.resize(c.points());
  const double inv = 1.0 / (static_cast<double>(rx) * ry);
  for (int ci = 0; ci < c.nx; ++ci) {
    for (int cj = 0; cj < c.ny; ++cj) {
      double sum = 0.0;
      for (int di = 0; di < rx; ++di)
        for (int dj = 0; dj < ry; ++dj)
          sum += fine.values(f.index(ci * rx + di, cj * ry + dj));
      out.values(c.index(ci, cj)) = sum * inv;
    }
  }
  return out;
}

double domain_integral(const Field& f) { return f.grid->weights.dot(f.values); }

double weighted_norm(const Grid& grid, const Eigen::VectorXd& values) {
  return std::sqrt(grid.weights.dot(values.cwiseAbs2()));
}

std::vector<std::pair<std::string, std::string>> grid_meta(const Grid& grid) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("dim", std::to_string(grid.dim));
  meta.emplace_back("nx", std::to_string(grid.nx));
  meta.emplace_back("ny", std::to_string(grid.ny));
  meta.emplace_back("lo_x", format_double(grid.lo_x));
  meta.emplace_back("hi_x", format_double(grid.hi_x));
  meta.emplace_back("lo_y", format_double(grid.lo_y));
  meta.emplace_back("hi_y", format_double(grid.hi_y));
  meta.emplace_back("periodic", grid.periodic ? "true" : "false");
  return meta;
}

GridPtr grid_from_meta(const std::map<std::string, std::string>& meta) {
  auto need = [&](const std::string& k) {
    auto it = meta.find(k);
    if (it == meta.end()) throw DataError("grid metadata missing key `" + k + "`");
    return it->second;
  };
  int dim = std::stoi(need("dim"));
  if (dim == 1) {
    return make_uniform_grid_1d(std::stoi(need("nx")), parse_double(need("lo_x"), "lo_x"),
                                parse_double(need("hi_x"), "hi_x"));
  }
  if (dim == 2) return make_uniform_grid_2d(std::stoi(need("nx")), std::stoi(need("ny")));
  throw DataError("unsupported grid dim " + std::to_string(dim));
}

void write_field_csv(const std::filesystem::path& path, const Field& field) {
  write_matrix_csv(path, field.values, {"value"}, grid_meta(*field.grid));
}

Field read_field_csv(const std::filesystem::path& path) {
  CsvMatrix csv = read_matrix_csv(path);
  if (csv.columns.size() != 1 || csv.columns[0] != "value")
    throw DataError(path.string() + ": expected a single `value` column");
  Field f;
  f.grid = grid_from_meta(csv.meta);
  if (csv.values.rows() != f.grid->points())
    throw DataError(path.string() + ": value count does not match grid point count");
  f.values = csv.values.col(0);
  if (!f.values.allFinite()) throw DataError(path.string() + ": non-finite field value");
  return f;
}

}  // namespace bifikle
