#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "bifikle/surrogate.hpp"

namespace bifikle {

// Per-sample scalar relative errors from a fold partition. Missing entries
// (folds whose rebuild collapsed) carry NaN and a missing flag.
struct CvErrors {
  Eigen::VectorXd errors;       // one per paired sample
  std::vector<int> fold_of;     // fold index per sample
  std::vector<std::uint8_t> missing;
  std::uint64_t seed = 0;
  int k = 0;

  int valid_count() const;
  double max_valid() const;
  double mean_valid() const;
};

struct CvConfig {
  int k = 5;
  std::uint64_t seed = 0;
  // LF rows with index < lf_pilot_count are never dropped during fold
  // rebuilds; later rows are acquisition-paired and rotate out with their
  // fold. Negative means "retain everything".
  int lf_pilot_count = -1;
  BuildConfig build;
  int threads = 1;
};

// Weighted relative L2 error with the near-zero denominator floored at
// 1e-12 * max|y_true|.
double relative_field_error(const Grid& grid, const Eigen::VectorXd& y_true,
                            const Eigen::VectorXd& y_pred);

// Shuffled k-fold partition (sizes differ by at most one), deterministic
// given the seed.
std::vector<int> kfold_partition(int n, int k, std::uint64_t seed);

// Relative k-fold CV errors of the bifidelity surrogate: each fold's pairs
// are held out, the discrepancy component is rebuilt from the rest, and
// held-out HF fields are compared against the reduced surrogate.
CvErrors kfold_errors(const SnapshotSet& lf_snaps, const SnapshotSet& paired_hf,
                      const SnapshotSet& paired_lf, const ParamBounds& bounds,
                      const CvConfig& config);

struct QoiData {
  SnapshotSet lf_snaps;
  SnapshotSet paired_hf;
  SnapshotSet paired_lf;
  int lf_pilot_count = -1;
};

// LOO errors averaged over QoIs sharing one design.
CvErrors multi_qoi_loo_errors(const std::vector<QoiData>& qois, const ParamBounds& bounds,
                              const BuildConfig& build, int threads = 1);

struct QuadratureRule {
  enum class Kind { Grid, MonteCarlo } kind = Kind::Grid;
  int grid_per_dim = 200;
  int mc_samples = 1000;
  std::uint64_t seed = 0;

  static QuadratureRule grid(int per_dim) { return {Kind::Grid, per_dim, 0, 0}; }
  static QuadratureRule monte_carlo(int m, std::uint64_t seed) {
    return {Kind::MonteCarlo, 0, m, seed};
  }
  // Normalized quadrature nodes over [-1,1]^dims (midpoint cells for the
  // grid rule) and the node count.
  Eigen::MatrixXd nodes(int dims) const;
};

using HfOracle = std::function<Field(const Eigen::VectorXd& theta)>;

struct IntegratedError {
  double value = 0.0;
  int nodes = 0;
  int skipped = 0;       // oracle failures
  bool flagged = false;  // > 1% of nodes skipped
};

// Parameter-space average of the per-theta relative L2 error between the
// surrogate and the oracle over the quadrature set.
IntegratedError integrated_relative_error(const BifidelitySurrogate& surr,
                                          const HfOracle& hf_oracle,
                                          const QuadratureRule& rule);

// Same metric against oracle fields precomputed at rule.nodes() (column per
// node); the cache makes per-stage metric evaluation cheap.
IntegratedError integrated_relative_error_cached(const BifidelitySurrogate& surr,
                                                 const Eigen::MatrixXd& nodes,
                                                 const Eigen::MatrixXd& oracle_fields);

void write_cv_errors_csv(const std::filesystem::path& path, const CvErrors& cv,
                         const Eigen::MatrixXd& design);

}  // namespace bifikle
