#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace bifikle {

// Total-order multi-index set in graded-lexicographic order; the zero tuple
// comes first and the ordering is what the first-difference penalty acts on.
struct MultiIndexSet {
  int dims = 0;
  int degree = 0;
  std::vector<std::vector<int>> indices;

  int count() const { return static_cast<int>(indices.size()); }
};

inline constexpr const char* kIndexOrderingVersion = "graded-lex-1";

MultiIndexSet total_order_index_set(int n_s, int p);

// sqrt(2d+1) * P_d(xi), orthonormal under U(-1,1).
double legendre_orthonormal(int degree, double xi);

// Regression feature matrix: entry (n, j) = prod_i psi_{beta_j[i]}(xi_n[i]).
Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& design, const MultiIndexSet& idx);

// argmin ||A b - c||^2 + tau ||Gamma b||^2 with Gamma the first-difference
// matrix over adjacent coefficients. tau = 0 with a rank-deficient system
// returns the minimum-norm least-squares solution.
Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& a, const Eigen::VectorXd& c, double tau);

Eigen::MatrixXd first_difference_matrix(int n);

// Grid value minimizing mean held-out squared error over a fixed-seed k-fold
// partition; ties break toward larger tau.
double select_tau(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                  const std::vector<double>& tau_grid, int folds, std::uint64_t seed);

std::vector<double> default_tau_grid();  // 25 log-spaced points in [1e-8, 1e2]

struct PceModel {
  MultiIndexSet indices;
  Eigen::MatrixXd coefficients;  // n_t x k_t, one column per KLE mode
  double tau = 0.0;

  int modes() const { return static_cast<int>(coefficients.cols()); }
  Eigen::VectorXd predict(const Eigen::VectorXd& xi) const;            // length k_t
  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& design) const;  // N x k_t
};

void save_pce_model(const std::filesystem::path& dir, const PceModel& model);
PceModel load_pce_model(const std::filesystem::path& dir);

}  // namespace bifikle
