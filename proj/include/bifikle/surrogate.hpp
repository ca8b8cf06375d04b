#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "bifikle/design.hpp"
#include "bifikle/kle.hpp"
#include "bifikle/pce.hpp"

namespace bifikle {

struct BuildConfig {
  double rho = 0.99;
  int degree = 3;
  std::vector<double> tau_grid;  // empty -> default_tau_grid()
  int tau_folds = 5;
  std::uint64_t tau_seed = 0;
};

// One KLE+PCE surrogate term (the LF surrogate or the discrepancy
// surrogate). A zero-variance fit degenerates to k_t = 0 and predicts the
// mean everywhere.
struct KlePceComponent {
  KleBasis basis;
  PceModel pce;
  ParamBounds bounds;

  Field predict(const Eigen::VectorXd& theta) const;
  Field predict_normalized(const Eigen::VectorXd& xi) const;
  // Fields as columns, one per design row (normalized inputs).
  Eigen::MatrixXd predict_batch_normalized(const Eigen::MatrixXd& design) const;
};

KlePceComponent build_component(const SnapshotSet& snaps, const ParamBounds& bounds,
                                const BuildConfig& config);

// Additive bifidelity surrogate: LF component plus HF-LF discrepancy
// component on a shared grid.
struct BifidelitySurrogate {
  KlePceComponent lf;
  KlePceComponent delta;
  GridPtr grid;
  int n_lf_runs = 0;  // N_1 + N_delta LF evaluations
  int n_hf_runs = 0;  // N_delta HF evaluations

  Field predict(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd predict_batch_normalized(const Eigen::MatrixXd& design) const;
  const ParamBounds& bounds() const { return lf.bounds; }
};

// paired_hf and paired_lf must share design rows exactly; the discrepancy
// component is fitted to their difference.
BifidelitySurrogate build_bifidelity(const SnapshotSet& lf_snaps,
                                     const SnapshotSet& paired_hf,
                                     const SnapshotSet& paired_lf,
                                     const ParamBounds& bounds, const BuildConfig& config);

// Monte-Carlo pointwise mean and (M-1)-normalized standard deviation over M
// uniform parameter draws; deterministic given the seed.
std::pair<Field, Field> propagate_uq(const BifidelitySurrogate& surr, int m_samples,
                                     std::uint64_t seed);
std::pair<Field, Field> propagate_uq(const KlePceComponent& component, int m_samples,
                                     std::uint64_t seed);

// Per-point Pearson correlation between paired LF and HF snapshot values.
// Points with zero sample variance are NaN (flagged missing on export).
Field correlation_field(const SnapshotSet& lf_snaps, const SnapshotSet& hf_snaps);

void save_component(const std::filesystem::path& dir, const KlePceComponent& comp);
KlePceComponent load_component(const std::filesystem::path& dir);
void save_surrogate(const std::filesystem::path& dir, const BifidelitySurrogate& surr,
                    const BuildConfig& config);
BifidelitySurrogate load_surrogate(const std::filesystem::path& dir);

}  // namespace bifikle
