#include "bifikle/kle.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "bifikle/common.hpp"
#include "bifikle/io.hpp"

namespace bifikle {

namespace {
// Modes below this eigenvalue fraction are numerical zeros (the SVD noise
// floor sits near 1e-32 lambda_1); everything above is kept so a rho = 1
// basis reproduces its training set to round-off.
constexpr double kZeroModeCutoff = 1e-24;  // relative to lambda_1
}

void SnapshotSet::validate() const {
  if (!grid) throw InvalidArgument("snapshot set has no grid");
  if (values.rows() != grid->points())
    throw IncompatibleGrids("snapshot rows do not match grid point count");
  if (values.cols() != design.rows())
    throw PairingError("snapshot count does not match design row count");
  if (!values.allFinite() || !design.allFinite())
    throw InvalidArgument("snapshot set contains non-finite entries");
}

std::pair<Field, SnapshotSet> center_snapshots(const SnapshotSet& snaps) {
  snaps.validate();
  if (snaps.samples() < 2) throw InsufficientData("centering needs at least 2 snapshots");
  Field mean;
  mean.grid = snaps.grid;
  mean.values = snaps.values.rowwise().mean();
  SnapshotSet centered = snaps;
  centered.values.colwise() -= mean.values;
  return {std::move(mean), std::move(centered)};
}

KleBasis fit_kle(const SnapshotSet& centered, double rho, const Field* mean) {
  centered.validate();
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("variance fraction must be in (0,1]");

  const int n_g = centered.grid->points();
  const int n = centered.samples();
  if (n < 2) throw InsufficientData("KLE fit needs at least 2 snapshots");

  KleBasis basis;
  basis.variance_fraction = rho;
  if (mean) {
    basis.mean = *mean;
  } else {
    basis.mean.grid = centered.grid;
    basis.mean.values = Eigen::VectorXd::Zero(n_g);
  }

  const Eigen::ArrayXd w = centered.grid->weights.array();
  const Eigen::ArrayXd sqrt_w = w.sqrt();
  Eigen::MatrixXd b = (centered.values.array().colwise() * sqrt_w).matrix() /
                      std::sqrt(static_cast<double>(n - 1));

  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU);
  const Eigen::VectorXd sigma = svd.singularValues();
  Eigen::VectorXd lambda = sigma.cwiseAbs2();
  basis.total_variance = lambda.sum();

  if (basis.total_variance <= 0.0) {
    basis.eigenvalues.resize(0);
    basis.modes.resize(n_g, 0);
    return basis;
  }

  const double cutoff = kZeroModeCutoff * lambda(0);
  int live = 0;
  while (live < lambda.size() && lambda(live) >= cutoff) ++live;

  int k_t;
  if (rho >= 1.0) {
    k_t = live;  // full rank: every mode above the numerical-zero floor
  } else {
    const double target = rho * basis.total_variance;
    double cum = 0.0;
    k_t = 0;
    while (k_t < live && cum < target * (1.0 - 1e-14)) {
      cum += lambda(k_t);
      ++k_t;
    }
    if (k_t == 0) k_t = 1;  // always retain the leading mode of nonzero data
  }

  basis.eigenvalues = lambda.head(k_t);
  basis.modes = (svd.matrixU().leftCols(k_t).array().colwise() / sqrt_w).matrix();

  // Deterministic sign: largest-magnitude entry of each mode is positive.
  for (int k = 0; k < k_t; ++k) {
    Eigen::Index imax;
    basis.modes.col(k).cwiseAbs().maxCoeff(&imax);
    if (basis.modes(imax, k) < 0.0) basis.modes.col(k) = -basis.modes.col(k);
  }
  return basis;
}

Eigen::VectorXd project_coefficients(const KleBasis& basis,
                                     const Eigen::VectorXd& centered_values) {
  if (basis.retained() < 1) throw InvalidArgument("projection needs at least one retained mode");
  if (centered_values.size() != basis.modes.rows())
    throw IncompatibleGrids("field length does not match basis grid");
  for (int k = 0; k < basis.retained(); ++k)
    if (!(basis.eigenvalues(k) > 0.0))
      throw DegenerateMode("retained mode has zero eigenvalue");
  Eigen::VectorXd weighted = basis.mean.grid->weights.cwiseProduct(centered_values);
  Eigen::VectorXd raw = basis.modes.transpose() * weighted;
  return raw.array() / basis.eigenvalues.array().sqrt();
}

Eigen::MatrixXd project_training(const KleBasis& basis, const SnapshotSet& centered) {
  if (basis.retained() < 1) return Eigen::MatrixXd(0, centered.samples());
  for (int k = 0; k < basis.retained(); ++k)
    if (!(basis.eigenvalues(k) > 0.0))
      throw DegenerateMode("retained mode has zero eigenvalue");
  Eigen::MatrixXd weighted =
      (centered.values.array().colwise() * basis.mean.grid->weights.array()).matrix();
  Eigen::MatrixXd raw = basis.modes.transpose() * weighted;  // k_t x N
  return (raw.array().colwise() / basis.eigenvalues.array().sqrt()).matrix();
}

Field reconstruct(const KleBasis& basis, const Eigen::VectorXd& zeta, bool include_mean) {
  if (zeta.size() != basis.retained())
    throw InvalidArgument("coefficient length does not match retained mode count");
  Field out;
  out.grid = basis.mean.grid;
  out.values = include_mean ? basis.mean.values
                            : Eigen::VectorXd::Zero(basis.mean.values.size()).eval();
  if (basis.retained() > 0)
    out.values += basis.modes * (basis.eigenvalues.array().sqrt() * zeta.array()).matrix();
  return out;
}

void save_kle_basis(const std::filesystem::path& dir, const KleBasis& basis) {
  std::filesystem::create_directories(dir);
  write_field_csv(dir / "mean.csv", basis.mean);
  write_matrix_csv(dir / "eigenvalues.csv", basis.eigenvalues, {"eigenvalue"});
  if (basis.retained() > 0) {
    std::vector<std::string> cols;
    for (int k = 0; k < basis.retained(); ++k) cols.push_back("mode" + std::to_string(k + 1));
    write_matrix_csv(dir / "modes.csv", basis.modes, cols);
  }
  KeyValueFile meta;
  meta.set_int("k_t", basis.retained());
  meta.set_double("variance_fraction", basis.variance_fraction);
  meta.set_double("total_variance", basis.total_variance);
  meta.write_file(dir / "meta.txt");
}

KleBasis load_kle_basis(const std::filesystem::path& dir) {
  KleBasis basis;
  basis.mean = read_field_csv(dir / "mean.csv");
  CsvMatrix eig = read_matrix_csv(dir / "eigenvalues.csv");
  basis.eigenvalues = eig.values.rows() > 0 ? eig.values.col(0).eval()
                                            : Eigen::VectorXd(0);
  if (std::filesystem::exists(dir / "modes.csv")) {
    basis.modes = read_matrix_csv(dir / "modes.csv").values;
  } else {
    basis.modes.resize(basis.mean.values.size(), 0);
  }
  KeyValueFile meta = KeyValueFile::parse_file(dir / "meta.txt");
  basis.variance_fraction = meta.get_double("variance_fraction");
  basis.total_variance = meta.get_double("total_variance");
  if (basis.modes.cols() != basis.eigenvalues.size())
    throw DataError("KLE bundle mode/eigenvalue count mismatch in " + dir.string());
  return basis;
}

}  // namespace bifikle
