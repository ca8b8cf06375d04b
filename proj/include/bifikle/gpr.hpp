#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <utility>

namespace bifikle {

struct GpHyper {
  double signal_variance = 1.0;
  Eigen::VectorXd length_scales;  // per input dimension
  double nugget = 1e-6;
};

// Matern-5/2 with anisotropic scaled distance r:
// sigma^2 (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r).
double matern52(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const GpHyper& hyper);

struct GpConfig {
  int starts = 8;
  double ls_lo = 1e-2, ls_hi = 1e1;
  double sv_lo = 1e-3, sv_hi = 1e1;
  double ng_lo = 1e-8, ng_hi = 1e-1;
  bool log_targets = false;  // fit log(eps + 1e-12) instead of raw errors
};

// Gaussian process over normalized inputs with standardized targets and a
// zero-mean prior. Immutable after construction.
class GpModel {
 public:
  // MLE hyperparameters via deterministic multi-start Nelder-Mead in a
  // smooth reparameterization of the log-bounded box.
  static GpModel fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                     const GpConfig& config = {});

  // Conditioning only, hyperparameters given (believer updates, tests).
  static GpModel condition(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                           const GpHyper& hyper);

  // New model conditioned on this one's data plus (x, target); keeps the
  // frozen hyperparameters and standardization.
  GpModel augmented(const Eigen::VectorXd& x, double target) const;

  // De-standardized posterior mean and variance; variance clamped at >= 0.
  std::pair<double, double> posterior(const Eigen::VectorXd& theta_star) const;

  const GpHyper& hyper() const { return hyper_; }
  double log_likelihood() const { return loglik_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  Eigen::VectorXd raw_targets() const;
  double target_shift() const { return shift_; }
  double target_scale() const { return scale_; }
  int size() const { return static_cast<int>(inputs_.rows()); }

 private:
  GpModel() = default;
  void factorize();

  Eigen::MatrixXd inputs_;
  Eigen::VectorXd targets_std_;
  double shift_ = 0.0;
  double scale_ = 1.0;
  GpHyper hyper_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;  // K^{-1} targets_std
  double loglik_ = 0.0;
};

void save_gp_bundle(const std::filesystem::path& path, const GpModel& model);

}  // namespace bifikle
