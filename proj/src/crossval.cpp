#include "bifikle/crossval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "bifikle/common.hpp"
#include "bifikle/io.hpp"

namespace bifikle {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

int CvErrors::valid_count() const {
  int n = 0;
  for (auto m : missing)
    if (!m) ++n;
  return n;
}

double CvErrors::max_valid() const {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < errors.size(); ++i)
    if (!missing[static_cast<std::size_t>(i)]) best = std::max(best, errors(i));
  return best;
}

double CvErrors::mean_valid() const {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < errors.size(); ++i)
    if (!missing[static_cast<std::size_t>(i)]) {
      sum += errors(i);
      ++n;
    }
  return n > 0 ? sum / n : kNaN;
}

double relative_field_error(const Grid& grid, const Eigen::VectorXd& y_true,
                            const Eigen::VectorXd& y_pred) {
  double num = weighted_norm(grid, y_true - y_pred);
  double den = weighted_norm(grid, y_true);
  double floor = 1e-12 * y_true.cwiseAbs().maxCoeff();
  if (den < floor) den = floor;
  if (den == 0.0) den = 1.0;  // identically-zero truth: fall back to absolute error
  return num / den;
}

std::vector<int> kfold_partition(int n, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("k-fold CV needs k >= 2");
  if (n < k) throw InvalidArgument("k-fold CV needs at least k samples");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::stream(seed, {0xf01du});
  rng.shuffle(perm);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i % k;
  return fold_of;
}

namespace {

SnapshotSet subset_snapshots(const SnapshotSet& snaps, const std::vector<int>& rows) {
  SnapshotSet out;
  out.grid = snaps.grid;
  out.values.resize(snaps.values.rows(), static_cast<Eigen::Index>(rows.size()));
  out.design.resize(static_cast<Eigen::Index>(rows.size()), snaps.design.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.values.col(static_cast<Eigen::Index>(r)) = snaps.values.col(rows[r]);
    out.design.row(static_cast<Eigen::Index>(r)) = snaps.design.row(rows[r]);
  }
  return out;
}

// Exact design-row match of each pair in the LF pool (pairs were appended
// from the same arrays, so bitwise equality holds).
std::vector<int> match_pair_rows(const Eigen::MatrixXd& lf_design,
                                 const Eigen::MatrixXd& pair_design) {
  std::vector<int> match(static_cast<std::size_t>(pair_design.rows()), -1);
  for (Eigen::Index i = 0; i < pair_design.rows(); ++i)
    for (Eigen::Index r = 0; r < lf_design.rows(); ++r)
      if (lf_design.row(r) == pair_design.row(i)) {
        match[static_cast<std::size_t>(i)] = static_cast<int>(r);
        break;
      }
  return match;
}

}  // namespace

CvErrors kfold_errors(const SnapshotSet& lf_snaps, const SnapshotSet& paired_hf,
                      const SnapshotSet& paired_lf, const ParamBounds& bounds,
                      const CvConfig& config) {
  lf_snaps.validate();
  paired_hf.validate();
  paired_lf.validate();
  if (paired_hf.design.rows() != paired_lf.design.rows() || paired_hf.design != paired_lf.design)
    throw PairingError("paired HF and LF sets must share identical design rows");

  const int n = paired_hf.samples();
  CvErrors cv;
  cv.k = config.k;
  cv.seed = config.seed;
  cv.fold_of = kfold_partition(n, config.k, config.seed);
  cv.errors = Eigen::VectorXd::Constant(n, kNaN);
  cv.missing.assign(static_cast<std::size_t>(n), 1);

  const std::vector<int> lf_row_of_pair = match_pair_rows(lf_snaps.design, paired_hf.design);
  const int pilot_count = config.lf_pilot_count < 0 ? lf_snaps.samples() : config.lf_pilot_count;

  // The full-pool LF component is reused whenever a fold drops no LF rows.
  KlePceComponent lf_full = build_component(lf_snaps, bounds, config.build);

  auto run_fold = [&](int f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i)
      (cv.fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    if (test.empty()) return;

    std::vector<int> drop_lf_rows;
    for (int i : test) {
      int row = lf_row_of_pair[static_cast<std::size_t>(i)];
      if (row >= pilot_count) drop_lf_rows.push_back(row);
    }

    try {
      if (static_cast<int>(train.size()) < 2)
        throw InsufficientData("fold leaves fewer than 2 discrepancy pairs");

      BifidelitySurrogate surr;
      surr.grid = lf_snaps.grid;
      if (drop_lf_rows.empty()) {
        surr.lf = lf_full;
      } else {
        std::vector<int> keep;
        for (int r = 0; r < lf_snaps.samples(); ++r)
          if (std::find(drop_lf_rows.begin(), drop_lf_rows.end(), r) == drop_lf_rows.end())
            keep.push_back(r);
        surr.lf = build_component(subset_snapshots(lf_snaps, keep), bounds, config.build);
      }
      SnapshotSet delta_train = subset_snapshots(paired_hf, train);
      SnapshotSet lf_train = subset_snapshots(paired_lf, train);
      delta_train.values -= lf_train.values;
      surr.delta = build_component(delta_train, bounds, config.build);

      Eigen::MatrixXd xi(static_cast<Eigen::Index>(test.size()), paired_hf.design.cols());
      for (std::size_t t = 0; t < test.size(); ++t) xi.row(static_cast<Eigen::Index>(t)) = paired_hf.design.row(test[t]);
      Eigen::MatrixXd pred = surr.predict_batch_normalized(xi);
      for (std::size_t t = 0; t < test.size(); ++t) {
        int i = test[t];
        cv.errors(i) = relative_field_error(*lf_snaps.grid, paired_hf.values.col(i),
                                            pred.col(static_cast<Eigen::Index>(t)));
        cv.missing[static_cast<std::size_t>(i)] = 0;
      }
    } catch (const Error& e) {
      std::fprintf(stderr, "warning: CV fold %d skipped: %s\n", f, e.what());
    }
  };

  parallel_for(config.k, run_fold, std::max(1, config.threads));
  return cv;
}

CvErrors multi_qoi_loo_errors(const std::vector<QoiData>& qois, const ParamBounds& bounds,
                              const BuildConfig& build, int threads) {
  if (qois.empty()) throw InvalidArgument("multi-QoI LOO needs at least one QoI");
  const Eigen::MatrixXd& design = qois.front().paired_hf.design;
  for (const auto& q : qois) {
    if (q.paired_hf.design.rows() != design.rows() || q.paired_hf.design != design)
      throw PairingError("all QoIs must share the same paired design");
    if (q.lf_snaps.design.rows() != qois.front().lf_snaps.design.rows() ||
        q.lf_snaps.design != qois.front().lf_snaps.design)
      throw PairingError("all QoIs must share the same LF design");
  }

  const int n = static_cast<int>(design.rows());
  CvErrors total;
  total.k = n;
  total.seed = 0;
  total.fold_of.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) total.fold_of[static_cast<std::size_t>(i)] = i;
  total.errors = Eigen::VectorXd::Zero(n);
  total.missing.assign(static_cast<std::size_t>(n), 0);

  for (const auto& q : qois) {
    CvConfig cfg;
    cfg.k = n;  // LOO is the k = N_delta fold split
    cfg.seed = 0;
    cfg.lf_pilot_count = q.lf_pilot_count;
    cfg.build = build;
    cfg.threads = threads;
    CvErrors one = kfold_errors(q.lf_snaps, q.paired_hf, q.paired_lf, bounds, cfg);
    for (int i = 0; i < n; ++i) {
      if (one.missing[static_cast<std::size_t>(i)])
        total.missing[static_cast<std::size_t>(i)] = 1;
      else
        total.errors(i) += one.errors(i);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (total.missing[static_cast<std::size_t>(i)])
      total.errors(i) = kNaN;
    else
      total.errors(i) /= static_cast<double>(qois.size());
  }
  return total;
}

Eigen::MatrixXd QuadratureRule::nodes(int dims) const {
  if (kind == Kind::Grid) {
    double count = std::pow(static_cast<double>(grid_per_dim), dims);
    if (count > 2e7)
      throw InvalidArgument("grid quadrature too large; use the Monte Carlo rule");
    const int total = static_cast<int>(count);
    Eigen::MatrixXd nodes(total, dims);
    for (int idx = 0; idx < total; ++idx) {
      int rem = idx;
      for (int d = 0; d < dims; ++d) {
        int cell = rem % grid_per_dim;
        rem /= grid_per_dim;
        nodes(idx, d) = -1.0 + 2.0 * (cell + 0.5) / grid_per_dim;
      }
    }
    return nodes;
  }
  return random_design(mc_samples, dims, seed).points;
}

IntegratedError integrated_relative_error(const BifidelitySurrogate& surr,
                                          const HfOracle& hf_oracle,
                                          const QuadratureRule& rule) {
  const int dims = surr.bounds().dims();
  Eigen::MatrixXd nodes = rule.nodes(dims);
  const int total = static_cast<int>(nodes.rows());

  IntegratedError result;
  result.nodes = total;
  double sum = 0.0;
  int used = 0;
  const int chunk = 1024;
  for (int start = 0; start < total; start += chunk) {
    int count = std::min(chunk, total - start);
    Eigen::MatrixXd pred = surr.predict_batch_normalized(nodes.middleRows(start, count));
    for (int c = 0; c < count; ++c) {
      Eigen::VectorXd theta = surr.bounds().to_physical(nodes.row(start + c).transpose());
      try {
        Field truth = hf_oracle(theta);
        sum += relative_field_error(*surr.grid, truth.values, pred.col(c));
        ++used;
      } catch (const Error&) {
        ++result.skipped;
      }
    }
  }
  if (used == 0) throw NumericalError("oracle failed at every quadrature node");
  result.value = sum / used;
  result.flagged = result.skipped > total / 100;
  return result;
}

IntegratedError integrated_relative_error_cached(const BifidelitySurrogate& surr,
                                                 const Eigen::MatrixXd& nodes,
                                                 const Eigen::MatrixXd& oracle_fields) {
  if (nodes.rows() != oracle_fields.cols())
    throw InvalidArgument("oracle cache node/field count mismatch");
  IntegratedError result;
  result.nodes = static_cast<int>(nodes.rows());
  double sum = 0.0;
  const int chunk = 1024;
  for (int start = 0; start < result.nodes; start += chunk) {
    int count = std::min(chunk, result.nodes - start);
    Eigen::MatrixXd pred = surr.predict_batch_normalized(nodes.middleRows(start, count));
    for (int c = 0; c < count; ++c)
      sum += relative_field_error(*surr.grid, oracle_fields.col(start + c), pred.col(c));
  }
  result.value = sum / result.nodes;
  return result;
}

void write_cv_errors_csv(const std::filesystem::path& path, const CvErrors& cv,
                         const Eigen::MatrixXd& design) {
  const int n = static_cast<int>(cv.errors.size());
  Eigen::MatrixXd table(n, design.cols() + 4);
  for (int i = 0; i < n; ++i) {
    table(i, 0) = i;
    table.block(i, 1, 1, design.cols()) = design.row(i);
    table(i, design.cols() + 1) = cv.fold_of[static_cast<std::size_t>(i)];
    table(i, design.cols() + 2) = cv.errors(i);
    table(i, design.cols() + 3) = cv.missing[static_cast<std::size_t>(i)];
  }
  std::vector<std::string> columns{"sample"};
  for (Eigen::Index j = 0; j < design.cols(); ++j) columns.push_back("xi" + std::to_string(j + 1));
  columns.push_back("fold");
  columns.push_back("error");
  columns.push_back("missing");
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("k", std::to_string(cv.k));
  meta.emplace_back("seed", std::to_string(cv.seed));
  write_matrix_csv(path, table, columns, meta);
}

}  // namespace bifikle
