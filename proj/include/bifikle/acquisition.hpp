#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bifikle/gpr.hpp"

namespace bifikle {

struct AcquisitionConfig {
  int candidates = 4096;      // low-discrepancy seed set over [-1,1]^d
  int refine_top = 10;        // candidates polished by local pattern search
  double min_separation = 1e-6;
};

// Closed-form EI for maximization over the error field:
// (m - eps*) Phi(z) + sigma phi(z), z = (m - eps*) / sigma.
// Degenerates to max(m - eps*, 0) when sigma < 1e-12.
double ei_closed_form(double mean, double sigma, double eps_star);
double expected_improvement(const GpModel& model, const Eigen::VectorXd& theta,
                            double eps_star);

double normal_cdf(double z);
double normal_pdf(double z);

struct OptimumResult {
  Eigen::VectorXd point;
  double ei = 0.0;
  bool variance_fallback = false;  // flat EI landscape, used max posterior variance
};

// Deterministic scheme: score Halton candidates, refine the best few with a
// bounded pattern search, keep min_separation from avoid points (training
// inputs plus any batch points already chosen).
OptimumResult maximize_ei(const GpModel& model, double eps_star,
                          const Eigen::MatrixXd& avoid_points,
                          const AcquisitionConfig& config = {});

// Argmin counterpart: the anti-informative baseline policy.
OptimumResult minimize_ei(const GpModel& model, double eps_star,
                          const Eigen::MatrixXd& avoid_points,
                          const AcquisitionConfig& config = {});

struct BelieverEntry {
  Eigen::VectorXd point;
  double ei = 0.0;
  double eps_star_used = 0.0;
  double believed_value = 0.0;
};

struct AcquisitionResult {
  Eigen::MatrixXd points;  // q x n_s
  Eigen::VectorXd ei_values;
  double eps_star = 0.0;   // incumbent entering the batch
  std::vector<BelieverEntry> believer_log;
  bool any_fallback = false;
};

// Kriging Believer batching: after each selection the posterior mean is
// appended as a pseudo-observation and the incumbent is raised to the max of
// observed and believed values. Hyperparameters stay frozen.
AcquisitionResult kriging_believer_batch(const GpModel& model, double eps_star, int q,
                                         const AcquisitionConfig& config = {},
                                         bool minimize = false);

}  // namespace bifikle
