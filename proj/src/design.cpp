#include "bifikle/design.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "bifikle/common.hpp"
#include "bifikle/io.hpp"

namespace bifikle {

Eigen::VectorXd ParamBounds::to_normalized(const Eigen::VectorXd& theta) const {
  return (2.0 * (theta - lo).array() / (hi - lo).array() - 1.0).matrix();
}

Eigen::VectorXd ParamBounds::to_physical(const Eigen::VectorXd& xi) const {
  return (lo.array() + 0.5 * (xi.array() + 1.0) * (hi - lo).array()).matrix();
}

bool ParamBounds::contains(const Eigen::VectorXd& theta, double tol) const {
  for (int i = 0; i < dims(); ++i) {
    double span = hi(i) - lo(i);
    if (theta(i) < lo(i) - tol * span || theta(i) > hi(i) + tol * span) return false;
  }
  return true;
}

void ParamBounds::validate() const {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw InvalidArgument("parameter bounds must be non-empty and consistent");
  for (int i = 0; i < dims(); ++i)
    if (!std::isfinite(lo(i)) || !std::isfinite(hi(i)) || !(lo(i) < hi(i)))
      throw InvalidArgument("parameter bounds must be finite with lo < hi");
}

Design latin_hypercube(int n, int dims, std::uint64_t seed) {
  if (n < 1 || dims < 1) throw InvalidArgument("latin_hypercube needs n >= 1, dims >= 1");
  Design d;
  d.kind = "lhs";
  d.seed = seed;
  d.points.resize(n, dims);
  for (int j = 0; j < dims; ++j) {
    Rng rng = Rng::stream(seed, {0x1a50u, static_cast<std::uint64_t>(j)});
    std::vector<int> strata(static_cast<std::size_t>(n));
    std::iota(strata.begin(), strata.end(), 0);
    rng.shuffle(strata);
    for (int i = 0; i < n; ++i) {
      // stratum center +/- up to half a stratum width
      double u = rng.next_double() - 0.5;
      double pos = (strata[static_cast<std::size_t>(i)] + 0.5 + u) / n;
      d.points(i, j) = 2.0 * pos - 1.0;
    }
  }
  return d;
}

Design random_design(int n, int dims, std::uint64_t seed) {
  if (n < 1 || dims < 1) throw InvalidArgument("random_design needs n >= 1, dims >= 1");
  Design d;
  d.kind = "random";
  d.seed = seed;
  d.points.resize(n, dims);
  Rng rng = Rng::stream(seed, {0x7a4du});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dims; ++j) d.points(i, j) = rng.uniform(-1.0, 1.0);
  return d;
}

std::vector<int> maximin_subset(const Eigen::MatrixXd& parent, int m) {
  const int n = static_cast<int>(parent.rows());
  if (m > n) throw InvalidArgument("maximin subset size exceeds parent design size");
  if (m < 1) throw InvalidArgument("maximin subset size must be >= 1");

  Eigen::RowVectorXd centroid = parent.colwise().mean();
  int first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double dist = (parent.row(i) - centroid).squaredNorm();
    if (dist < best) {
      best = dist;
      first = i;
    }
  }

  std::vector<int> chosen{first};
  std::vector<double> min_dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    min_dist[static_cast<std::size_t>(i)] = (parent.row(i) - parent.row(first)).squaredNorm();

  while (static_cast<int>(chosen.size()) < m) {
    int pick = -1;
    double pick_dist = -1.0;
    for (int i = 0; i < n; ++i) {
      double dist = min_dist[static_cast<std::size_t>(i)];
      if (dist > pick_dist) {
        pick_dist = dist;
        pick = i;
      }
    }
    chosen.push_back(pick);
    for (int i = 0; i < n; ++i) {
      double dist = (parent.row(i) - parent.row(pick)).squaredNorm();
      if (dist < min_dist[static_cast<std::size_t>(i)])
        min_dist[static_cast<std::size_t>(i)] = dist;
    }
  }
  return chosen;
}

void write_design_csv(const std::filesystem::path& path, const Design& design,
                      const ParamBounds& bounds) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("kind", design.kind);
  meta.emplace_back("seed", std::to_string(design.seed));
  std::string lo, hi;
  for (int i = 0; i < bounds.dims(); ++i) {
    if (i) {
      lo += ' ';
      hi += ' ';
    }
    lo += format_double(bounds.lo(i));
    hi += format_double(bounds.hi(i));
  }
  meta.emplace_back("bounds_lo", lo);
  meta.emplace_back("bounds_hi", hi);
  std::vector<std::string> columns;
  for (int j = 0; j < design.points.cols(); ++j) columns.push_back("xi" + std::to_string(j + 1));
  write_matrix_csv(path, design.points, columns, meta);
}

std::pair<Design, ParamBounds> read_design_csv(const std::filesystem::path& path) {
  CsvMatrix csv = read_matrix_csv(path);
  Design d;
  d.points = csv.values;
  auto it = csv.meta.find("kind");
  d.kind = it == csv.meta.end() ? "subset" : it->second;
  it = csv.meta.find("seed");
  d.seed = it == csv.meta.end() ? 0 : std::stoull(it->second);

  auto parse_vec = [&](const std::string& key) {
    auto m = csv.meta.find(key);
    if (m == csv.meta.end()) throw DataError(path.string() + ": design missing `" + key + "` meta");
    std::vector<double> vals;
    std::string cur;
    for (char c : m->second + " ") {
      if (c == ' ') {
        if (!cur.empty()) vals.push_back(parse_double(cur, key));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())).eval();
  };
  ParamBounds b{parse_vec("bounds_lo"), parse_vec("bounds_hi")};
  b.validate();
  if (b.dims() != d.points.cols())
    throw DataError(path.string() + ": bounds dimension does not match design columns");
  return {d, b};
}

}  // namespace bifikle
