#pragma once

#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bifikle/acquisition.hpp"
#include "bifikle/crossval.hpp"
#include "bifikle/io.hpp"
#include "bifikle/problems.hpp"

namespace bifikle {

struct CampaignConfig {
  std::string problem = "pulse_c2";  // pulse_c1 | pulse_c2 | convdiff | external
  std::filesystem::path out;
  std::uint64_t seed = 0;

  int pilot_lf = 200;    // N_LF^P
  int pilot_pairs = 5;   // N_Delta^P
  int budget = 65;       // B, total HF evaluations
  int batch = 1;         // q
  // Non-overshooting loop guard by default: acquire only full batches while
  // n_hf + q <= B. The literal "while n_hf <= B" reading can overshoot by
  // q-1 and is config-selectable.
  bool allow_budget_overshoot = false;

  std::string cv_mode = "kfold";  // kfold | loo
  int cv_folds = 5;

  BuildConfig build;
  GpConfig gp;
  AcquisitionConfig acquisition;

  std::string policy = "ei_max";        // ei_max | ei_min | random
  std::vector<std::string> policies;    // replicates-mode override, else {policy}
  int replicates = 1;

  std::string metric_rule = "auto";  // grid | mc | none | auto
  int metric_grid = 200;             // per-dim nodes for the grid rule
  int metric_mc = 1000;
  std::uint64_t metric_seed = 0;
  bool metric_every_stage = true;

  int convdiff_hf_n = 128;
  int convdiff_lf_n = 32;
  bool pulse_c1_series_replaces_sine = false;

  std::vector<ExternalQoiSource> external_sources;

  int uq_samples = 2000;
  std::uint64_t uq_seed = 1;
  int threads = 0;  // 0 = auto (BIFIKLE_THREADS overrides)

  static CampaignConfig from_kv(const KeyValueFile& kv);
  KeyValueFile to_kv() const;
  void validate() const;
  QuadratureRule metric_quadrature(int dims) const;
};

struct StageRecord {
  int stage = 0;
  int n_hf = 0;
  CvErrors cv;
  Eigen::MatrixXd acquired;  // q x n_s normalized, empty at the pilot stage
  double mean_cv = 0.0;
  double max_cv = 0.0;
  double mu_eps = std::numeric_limits<double>::quiet_NaN();
  int mu_skipped = 0;
  bool acquisition_fallback = false;
  double wall_seconds = 0.0;
};

struct AlHistory {
  CampaignConfig config;
  ParamBounds bounds;
  int pilot_lf_count = 0;
  int pilot_pair_count = 0;
  Eigen::MatrixXd lf_design;    // cumulative, normalized
  Eigen::MatrixXd pair_design;  // cumulative, normalized
  std::vector<SnapshotSet> lf_snaps;   // per QoI
  std::vector<SnapshotSet> hf_snaps;   // per QoI (paired rows)
  std::vector<SnapshotSet> lf_paired;  // per QoI
  std::vector<StageRecord> stages;
  std::vector<BifidelitySurrogate> surrogates;  // per QoI, current stage
  std::string status;  // completed | awaiting_data

  int n_hf() const { return static_cast<int>(pair_design.rows()); }
};

// Oracle fields cached at fixed quadrature nodes; shareable across
// replicates since nodes depend only on the rule and oracle on the problem.
struct OracleCache {
  Eigen::MatrixXd nodes;          // normalized
  Eigen::MatrixXd oracle_fields;  // n_g x nodes (QoI 0)
};
std::shared_ptr<const OracleCache> build_oracle_cache(const Problem& problem,
                                                      const QuadratureRule& rule,
                                                      int threads);

// Algorithm: pilot build -> CV errors -> loop { GP fit, acquire, evaluate
// HF+LF, augment, rebuild, CV } until the HF budget is exhausted. Every
// stage persists under config.out; resume picks up after the last complete
// stage and reproduces the uninterrupted run exactly.
AlHistory run_campaign(const CampaignConfig& config, bool resume = false,
                       std::shared_ptr<const OracleCache> oracle_cache = nullptr);

// Reconstructs a history from a campaign directory's completed stages
// without evaluating any model.
AlHistory load_campaign(const std::filesystem::path& dir);

struct PolicyAggregate {
  std::string policy;
  std::vector<double> stage_mean_mu;   // per stage, mean over replicates
  std::vector<double> stage_std_mu;
  std::vector<double> stage_mean_cv;
  int completed = 0;
  int failed = 0;
};

struct ReplicateSummary {
  std::vector<PolicyAggregate> policies;
  bool complete = true;  // false if any replicate failed
};

// R campaigns per policy with derived seeds; pilot data and CV partitions
// are shared across policies within a replicate for comparability.
ReplicateSummary run_replicates(const CampaignConfig& config, int replicates);

struct CrossPolicyTable {
  // Errors of surrogate A evaluated at B's acquired points and vice versa,
  // overlapping points excluded.
  std::vector<double> errors_a_on_b;
  std::vector<double> errors_b_on_a;
  Eigen::MatrixXd points_a_on_b;  // normalized test points used
  Eigen::MatrixXd points_b_on_a;
  int overlap_excluded = 0;
};
CrossPolicyTable cross_policy_test(const AlHistory& a, const AlHistory& b);

}  // namespace bifikle
