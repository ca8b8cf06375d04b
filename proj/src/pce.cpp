#include "bifikle/pce.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bifikle/common.hpp"
#include "bifikle/io.hpp"

namespace bifikle {

namespace {

constexpr double kDomainTol = 1e-12;

void append_indices_of_degree(int dims, int total, std::vector<int>& prefix,
                              std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == dims - 1) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  // Within a degree block, leading coordinate descends (grlex monomial order).
  for (int lead = total; lead >= 0; --lead) {
    prefix.push_back(lead);
    append_indices_of_degree(dims, total - lead, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

MultiIndexSet total_order_index_set(int n_s, int p) {
  if (n_s < 1) throw InvalidArgument("index set needs dimension >= 1");
  if (p < 0) throw InvalidArgument("index set needs degree >= 0");
  MultiIndexSet set;
  set.dims = n_s;
  set.degree = p;
  std::vector<int> prefix;
  for (int total = 0; total <= p; ++total)
    append_indices_of_degree(n_s, total, prefix, set.indices);
  return set;
}

double legendre_orthonormal(int degree, double xi) {
  if (degree < 0) throw InvalidArgument("Legendre degree must be >= 0");
  if (std::abs(xi) > 1.0 + kDomainTol)
    throw OutOfDomain("Legendre argument outside [-1,1]: " + format_double(xi));
  double pkm1 = 1.0;  // P_0
  if (degree == 0) return 1.0;
  double pk = xi;  // P_1
  for (int k = 1; k < degree; ++k) {
    double pkp1 = ((2.0 * k + 1.0) * xi * pk - k * pkm1) / (k + 1.0);
    pkm1 = pk;
    pk = pkp1;
  }
  return std::sqrt(2.0 * degree + 1.0) * pk;
}

Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& design, const MultiIndexSet& idx) {
  const int n = static_cast<int>(design.rows());
  const int dims = static_cast<int>(design.cols());
  if (dims != idx.dims) throw InvalidArgument("design dimension does not match index set");

  // Univariate values up to max degree per point and dimension, then products.
  const int p = idx.degree;
  Eigen::MatrixXd a(n, idx.count());
  std::vector<double> uni(static_cast<std::size_t>(dims * (p + 1)));
  for (int r = 0; r < n; ++r) {
    for (int d = 0; d < dims; ++d) {
      double xi = design(r, d);
      if (std::abs(xi) > 1.0 + kDomainTol)
        throw OutOfDomain("design entry outside [-1,1]: " + format_double(xi));
      for (int q = 0; q <= p; ++q)
        uni[static_cast<std::size_t>(d * (p + 1) + q)] = legendre_orthonormal(q, xi);
    }
    for (int j = 0; j < idx.count(); ++j) {
      double prod = 1.0;
      const auto& beta = idx.indices[static_cast<std::size_t>(j)];
      for (int d = 0; d < dims; ++d)
        prod *= uni[static_cast<std::size_t>(d * (p + 1) + beta[static_cast<std::size_t>(d)])];
      a(r, j) = prod;
    }
  }
  return a;
}

Eigen::MatrixXd first_difference_matrix(int n) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(std::max(0, n - 1), n);
  for (int i = 0; i + 1 < n; ++i) {
    g(i, i) = -1.0;
    g(i, i + 1) = 1.0;
  }
  return g;
}

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& a, const Eigen::VectorXd& c, double tau) {
  if (tau < 0.0) throw InvalidArgument("regularization weight must be >= 0");
  if (!a.allFinite() || !c.allFinite())
    throw InvalidArgument("regression system contains non-finite entries");
  if (a.rows() != c.size()) throw InvalidArgument("regression row count mismatch");
  const int n_t = static_cast<int>(a.cols());

  if (tau == 0.0) {
    // Minimum-norm least squares covers the rank-deficient N < n_t case.
    return a.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(c);
  }

  Eigen::MatrixXd gamma = first_difference_matrix(n_t);
  Eigen::MatrixXd normal = a.transpose() * a + tau * gamma.transpose() * gamma;
  Eigen::VectorXd rhs = a.transpose() * c;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() == Eigen::Success) {
    Eigen::VectorXd b = ldlt.solve(rhs);
    if (b.allFinite()) return b;
  }
  // PSD-singular fallback: stacked least squares on [A; sqrt(tau) Gamma].
  Eigen::MatrixXd stacked(a.rows() + gamma.rows(), n_t);
  stacked << a, std::sqrt(tau) * gamma;
  Eigen::VectorXd stacked_rhs = Eigen::VectorXd::Zero(stacked.rows());
  stacked_rhs.head(a.rows()) = c;
  return stacked.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(stacked_rhs);
}

double select_tau(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                  const std::vector<double>& tau_grid, int folds, std::uint64_t seed) {
  if (tau_grid.empty()) throw InvalidArgument("tau grid must not be empty");
  if (tau_grid.size() == 1) return tau_grid.front();
  const int n = static_cast<int>(a.rows());
  if (folds < 2) throw InvalidArgument("tau selection needs k >= 2 folds");
  if (n < folds) throw InvalidArgument("tau selection needs N >= k samples");

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::stream(seed, {0x7a11u});
  rng.shuffle(perm);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i % folds;

  double best_tau = tau_grid.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (double tau : tau_grid) {
    double sum_sq = 0.0;
    int count = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train, test;
      for (int i = 0; i < n; ++i)
        (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
      if (train.empty() || test.empty()) continue;
      Eigen::MatrixXd at(static_cast<Eigen::Index>(train.size()), a.cols());
      Eigen::VectorXd ct(static_cast<Eigen::Index>(train.size()));
      for (std::size_t r = 0; r < train.size(); ++r) {
        at.row(static_cast<Eigen::Index>(r)) = a.row(train[r]);
        ct(static_cast<Eigen::Index>(r)) = c(train[r]);
      }
      Eigen::VectorXd b = fit_ridge(at, ct, tau);
      for (int i : test) {
        double resid = a.row(i).dot(b) - c(i);
        sum_sq += resid * resid;
        ++count;
      }
    }
    double err = count > 0 ? sum_sq / count : std::numeric_limits<double>::infinity();
    // Ties break toward more regularization (grid scanned in given order,
    // which callers keep ascending).
    if (err <= best_err) {
      best_err = err;
      best_tau = tau;
    }
  }
  return best_tau;
}

std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  const int n = 25;
  const double lo = std::log10(1e-8), hi = std::log10(1e2);
  for (int i = 0; i < n; ++i) grid.push_back(std::pow(10.0, lo + (hi - lo) * i / (n - 1)));
  return grid;
}

Eigen::VectorXd PceModel::predict(const Eigen::VectorXd& xi) const {
  Eigen::MatrixXd row = basis_matrix(xi.transpose(), indices);
  return (row * coefficients).transpose();
}

Eigen::MatrixXd PceModel::predict_batch(const Eigen::MatrixXd& design) const {
  return basis_matrix(design, indices) * coefficients;
}

void save_pce_model(const std::filesystem::path& dir, const PceModel& model) {
  std::filesystem::create_directories(dir);
  if (model.modes() > 0) {
    std::vector<std::string> cols;
    for (int k = 0; k < model.modes(); ++k) cols.push_back("mode" + std::to_string(k + 1));
    write_matrix_csv(dir / "coefficients.csv", model.coefficients, cols);
  }
  KeyValueFile meta;
  meta.set_int("n_s", model.indices.dims);
  meta.set_int("degree", model.indices.degree);
  meta.set_double("tau", model.tau);
  meta.set_int("modes", model.modes());
  meta.set("index_ordering", kIndexOrderingVersion);
  meta.write_file(dir / "meta.txt");
}

PceModel load_pce_model(const std::filesystem::path& dir) {
  KeyValueFile meta = KeyValueFile::parse_file(dir / "meta.txt");
  if (meta.get_or("index_ordering", kIndexOrderingVersion) != kIndexOrderingVersion)
    throw DataError("unsupported PCE index ordering in " + dir.string());
  PceModel model;
  model.indices = total_order_index_set(static_cast<int>(meta.get_int("n_s")),
                                        static_cast<int>(meta.get_int("degree")));
  model.tau = meta.get_double("tau");
  int modes = static_cast<int>(meta.get_int("modes"));
  if (modes > 0) {
    model.coefficients = read_matrix_csv(dir / "coefficients.csv").values;
    if (model.coefficients.rows() != model.indices.count() || model.coefficients.cols() != modes)
      throw DataError("PCE coefficient shape mismatch in " + dir.string());
  } else {
    model.coefficients.resize(model.indices.count(), 0);
  }
  return model;
}

}  // namespace bifikle
