#include "bifikle/surrogate.hpp"

#include <cmath>
#include <limits>

#include "bifikle/common.hpp"
#include "bifikle/io.hpp"

namespace bifikle {

namespace {

void check_in_bounds(const ParamBounds& bounds, const Eigen::VectorXd& theta) {
  if (theta.size() != bounds.dims())
    throw InvalidArgument("parameter dimension does not match surrogate bounds");
  if (!bounds.contains(theta))
    throw OutOfDomain("parameter outside surrogate bounds; Legendre PCEs do not extrapolate");
}

}  // namespace

Field KlePceComponent::predict_normalized(const Eigen::VectorXd& xi) const {
  if (basis.retained() == 0) return {basis.mean.grid, basis.mean.values};
  Eigen::VectorXd zeta = pce.predict(xi);
  return reconstruct(basis, zeta, true);
}

Field KlePceComponent::predict(const Eigen::VectorXd& theta) const {
  check_in_bounds(bounds, theta);
  return predict_normalized(bounds.to_normalized(theta));
}

Eigen::MatrixXd KlePceComponent::predict_batch_normalized(const Eigen::MatrixXd& design) const {
  const Eigen::Index n = design.rows();
  if (basis.retained() == 0) return basis.mean.values.replicate(1, n);
  Eigen::MatrixXd zeta = pce.predict_batch(design);  // N x k_t
  Eigen::MatrixXd scaled_modes =
      (basis.modes.array().rowwise() * basis.eigenvalues.transpose().array().sqrt()).matrix();
  Eigen::MatrixXd fields = scaled_modes * zeta.transpose();  // n_g x N
  fields.colwise() += basis.mean.values;
  return fields;
}

KlePceComponent build_component(const SnapshotSet& snaps, const ParamBounds& bounds,
                                const BuildConfig& config) {
  bounds.validate();
  if (snaps.samples() < 2) throw InsufficientData("component build needs at least 2 snapshots");
  auto [mean, centered] = center_snapshots(snaps);
  KlePceComponent comp;
  comp.bounds = bounds;
  comp.basis = fit_kle(centered, config.rho, &mean);
  comp.pce.indices = total_order_index_set(static_cast<int>(snaps.design.cols()), config.degree);
  comp.pce.tau = 0.0;
  if (comp.basis.retained() == 0) {
    comp.pce.coefficients.resize(comp.pce.indices.count(), 0);
    return comp;
  }

  Eigen::MatrixXd zeta = project_training(comp.basis, centered);  // k_t x N
  Eigen::MatrixXd a = basis_matrix(snaps.design, comp.pce.indices);

  // One tau shared across modes, selected on the leading mode: higher modes
  // carry less energy, so the leading mode dominates prediction error.
  std::vector<double> grid = config.tau_grid.empty() ? default_tau_grid() : config.tau_grid;
  double tau = grid.front();
  if (grid.size() > 1) {
    int folds = std::min<int>(config.tau_folds, snaps.samples());
    if (folds >= 2) tau = select_tau(a, zeta.row(0).transpose(), grid, folds, config.tau_seed);
  }

  comp.pce.tau = tau;
  comp.pce.coefficients.resize(comp.pce.indices.count(), comp.basis.retained());
  for (int k = 0; k < comp.basis.retained(); ++k)
    comp.pce.coefficients.col(k) = fit_ridge(a, zeta.row(k).transpose(), tau);
  return comp;
}

Field BifidelitySurrogate::predict(const Eigen::VectorXd& theta) const {
  check_in_bounds(lf.bounds, theta);
  Eigen::VectorXd xi = lf.bounds.to_normalized(theta);
  Field f_lf = lf.predict_normalized(xi);
  Field f_delta = delta.predict_normalized(xi);
  return {grid, f_lf.values + f_delta.values};
}

Eigen::MatrixXd BifidelitySurrogate::predict_batch_normalized(
    const Eigen::MatrixXd& design) const {
  return lf.predict_batch_normalized(design) + delta.predict_batch_normalized(design);
}

BifidelitySurrogate build_bifidelity(const SnapshotSet& lf_snaps, const SnapshotSet& paired_hf,
                                     const SnapshotSet& paired_lf, const ParamBounds& bounds,
                                     const BuildConfig& config) {
  lf_snaps.validate();
  paired_hf.validate();
  paired_lf.validate();
  if (paired_hf.design.rows() != paired_lf.design.rows() || paired_hf.design != paired_lf.design)
    throw PairingError("paired HF and LF sets must share identical design rows");
  if (!same_grid(*lf_snaps.grid, *paired_hf.grid) || !same_grid(*lf_snaps.grid, *paired_lf.grid))
    throw IncompatibleGrids("bifidelity build requires a common grid (restrict HF first)");

  BifidelitySurrogate surr;
  surr.grid = lf_snaps.grid;
  surr.lf = build_component(lf_snaps, bounds, config);

  SnapshotSet delta_snaps;
  delta_snaps.grid = paired_hf.grid;
  delta_snaps.design = paired_hf.design;
  delta_snaps.values = paired_hf.values - paired_lf.values;
  surr.delta = build_component(delta_snaps, bounds, config);

  surr.n_lf_runs = lf_snaps.samples() + paired_lf.samples();
  surr.n_hf_runs = paired_hf.samples();
  return surr;
}

namespace {

std::pair<Field, Field> moments_from_fields(const GridPtr& grid, const Eigen::MatrixXd& fields) {
  const Eigen::Index m = fields.cols();
  Field mean{grid, fields.rowwise().mean()};
  Eigen::MatrixXd centered = fields.colwise() - mean.values;
  Field stddev{grid, (centered.cwiseAbs2().rowwise().sum() / static_cast<double>(m - 1))
                         .cwiseSqrt()};
  return {std::move(mean), std::move(stddev)};
}

}  // namespace

std::pair<Field, Field> propagate_uq(const BifidelitySurrogate& surr, int m_samples,
                                     std::uint64_t seed) {
  if (m_samples < 2) throw InvalidArgument("UQ propagation needs at least 2 samples");
  Design draws = random_design(m_samples, surr.bounds().dims(), seed);
  return moments_from_fields(surr.grid, surr.predict_batch_normalized(draws.points));
}

std::pair<Field, Field> propagate_uq(const KlePceComponent& component, int m_samples,
                                     std::uint64_t seed) {
  if (m_samples < 2) throw InvalidArgument("UQ propagation needs at least 2 samples");
  Design draws = random_design(m_samples, component.bounds.dims(), seed);
  return moments_from_fields(component.basis.mean.grid,
                             component.predict_batch_normalized(draws.points));
}

Field correlation_field(const SnapshotSet& lf_snaps, const SnapshotSet& hf_snaps) {
  lf_snaps.validate();
  hf_snaps.validate();
  if (lf_snaps.design.rows() != hf_snaps.design.rows() || lf_snaps.design != hf_snaps.design)
    throw PairingError("correlation requires identical designs");
  const int n = lf_snaps.samples();
  if (n < 3) throw InsufficientData("correlation needs at least 3 paired samples");

  Field out;
  out.grid = lf_snaps.grid;
  out.values.resize(lf_snaps.grid->points());
  for (int j = 0; j < lf_snaps.grid->points(); ++j) {
    Eigen::VectorXd a = lf_snaps.values.row(j);
    Eigen::VectorXd b = hf_snaps.values.row(j);
    double ma = a.mean(), mb = b.mean();
    double cov = ((a.array() - ma) * (b.array() - mb)).sum();
    double va = (a.array() - ma).square().sum();
    double vb = (b.array() - mb).square().sum();
    out.values(j) = (va > 0.0 && vb > 0.0) ? cov / std::sqrt(va * vb)
                                           : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

namespace {

std::string bounds_to_string(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v(i));
  }
  return s;
}

Eigen::VectorXd parse_space_vector(const std::string& text) {
  std::vector<double> vals;
  std::string cur;
  for (char c : text + " ") {
    if (c == ' ') {
      if (!cur.empty()) vals.push_back(parse_double(cur, "bounds"));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())).eval();
}

}  // namespace

void save_component(const std::filesystem::path& dir, const KlePceComponent& comp) {
  std::filesystem::create_directories(dir);
  save_kle_basis(dir / "kle", comp.basis);
  save_pce_model(dir / "pce", comp.pce);
  KeyValueFile meta;
  meta.set("bounds_lo", bounds_to_string(comp.bounds.lo));
  meta.set("bounds_hi", bounds_to_string(comp.bounds.hi));
  meta.write_file(dir / "bounds.txt");
}

KlePceComponent load_component(const std::filesystem::path& dir) {
  KlePceComponent comp;
  comp.basis = load_kle_basis(dir / "kle");
  comp.pce = load_pce_model(dir / "pce");
  KeyValueFile meta = KeyValueFile::parse_file(dir / "bounds.txt");
  comp.bounds.lo = parse_space_vector(meta.get("bounds_lo"));
  comp.bounds.hi = parse_space_vector(meta.get("bounds_hi"));
  comp.bounds.validate();
  if (comp.basis.retained() != comp.pce.modes())
    throw DataError("component bundle KLE/PCE mode mismatch in " + dir.string());
  return comp;
}

void save_surrogate(const std::filesystem::path& dir, const BifidelitySurrogate& surr,
                    const BuildConfig& config) {
  std::filesystem::create_directories(dir);
  save_component(dir / "lf", surr.lf);
  save_component(dir / "delta", surr.delta);
  KeyValueFile manifest;
  manifest.set("tool_version", kToolVersion);
  manifest.set_double("rho", config.rho);
  manifest.set_int("degree", config.degree);
  manifest.set_double("lf_tau", surr.lf.pce.tau);
  manifest.set_double("delta_tau", surr.delta.pce.tau);
  manifest.set_int("n_lf_runs", surr.n_lf_runs);
  manifest.set_int("n_hf_runs", surr.n_hf_runs);
  manifest.set("lf_hash", hash_hex(fnv1a64(read_text_file(dir / "lf" / "kle" / "mean.csv") +
                                           read_text_file(dir / "lf" / "pce" / "meta.txt"))));
  manifest.set("delta_hash",
               hash_hex(fnv1a64(read_text_file(dir / "delta" / "kle" / "mean.csv") +
                                read_text_file(dir / "delta" / "pce" / "meta.txt"))));
  manifest.write_file(dir / "manifest.txt");
}

BifidelitySurrogate load_surrogate(const std::filesystem::path& dir) {
  BifidelitySurrogate surr;
  surr.lf = load_component(dir / "lf");
  surr.delta = load_component(dir / "delta");
  surr.grid = surr.lf.basis.mean.grid;
  KeyValueFile manifest = KeyValueFile::parse_file(dir / "manifest.txt");
  surr.n_lf_runs = static_cast<int>(manifest.get_int_or("n_lf_runs", 0));
  surr.n_hf_runs = static_cast<int>(manifest.get_int_or("n_hf_runs", 0));
  return surr;
}

}  // namespace bifikle
