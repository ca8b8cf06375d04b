#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <utility>

#include "bifikle/grid.hpp"

namespace bifikle {

// Field realizations (one column per sample) paired with their design.
struct SnapshotSet {
  GridPtr grid;
  Eigen::MatrixXd values;  // n_g x N
  Eigen::MatrixXd design;  // N x n_s, normalized [-1,1]

  int samples() const { return static_cast<int>(values.cols()); }
  void validate() const;
};

// Truncated weighted Karhunen-Loeve basis. Modes are orthonormal under the
// grid weights; eigenvalues descend.
struct KleBasis {
  Field mean;
  Eigen::VectorXd eigenvalues;  // k_t, descending, nonnegative
  Eigen::MatrixXd modes;        // n_g x k_t
  double variance_fraction = 0.99;  // retention target rho
  double total_variance = 0.0;      // sum of the full spectrum

  int retained() const { return static_cast<int>(eigenvalues.size()); }
};

// Columnwise mean plus the centered set (columns sum back to the originals).
std::pair<Field, SnapshotSet> center_snapshots(const SnapshotSet& snaps);

// SVD of B = W^{1/2} S / sqrt(N-1): eigenvalues are squared singular values,
// modes come back through W^{-1/2}. Modes with eigenvalue below
// 1e-12 * lambda_1 are treated as numerically zero and dropped before the
// cumulative-fraction truncation at rho. Signs are fixed so the
// largest-magnitude entry of each mode is positive.
KleBasis fit_kle(const SnapshotSet& centered, double rho, const Field* mean = nullptr);

// zeta_k = (1/sqrt(lambda_k)) sum_j w_j y0(x_j) q_kj
Eigen::VectorXd project_coefficients(const KleBasis& basis,
                                     const Eigen::VectorXd& centered_values);

// Coefficients for every column of a centered set; k_t x N.
Eigen::MatrixXd project_training(const KleBasis& basis, const SnapshotSet& centered);

// mean * include_mean + sum_k sqrt(lambda_k) q_k zeta_k
Field reconstruct(const KleBasis& basis, const Eigen::VectorXd& zeta, bool include_mean);

void save_kle_basis(const std::filesystem::path& dir, const KleBasis& basis);
KleBasis load_kle_basis(const std::filesystem::path& dir);

}  // namespace bifikle
