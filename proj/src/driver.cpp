#include "bifikle/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "bifikle/common.hpp"

namespace bifikle {

namespace {

// RNG stream purposes; stage and replicate indices extend the key.
enum StreamTag : std::uint64_t {
  kTagLhs = 0x11,
  kTagCv = 0x22,
  kTagRandomAcq = 0x33,
  kTagReplicate = 0x44,
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

std::vector<double> parse_tau_grid(const std::string& spec) {
  // "lo:hi:count" log-spaced, or a comma list of explicit values.
  if (spec.find(':') != std::string::npos) {
    std::string s = spec;
    std::replace(s.begin(), s.end(), ':', ',');
    auto nums = split_list(s);
    if (nums.size() != 3) throw ConfigError("tau grid spec must be lo:hi:count");
    double lo = parse_double(nums[0], "pce.tau_grid");
    double hi = parse_double(nums[1], "pce.tau_grid");
    int count = static_cast<int>(parse_double(nums[2], "pce.tau_grid"));
    if (!(lo > 0.0) || !(hi > lo) || count < 2)
      throw ConfigError("tau grid spec needs 0 < lo < hi and count >= 2");
    std::vector<double> grid;
    for (int i = 0; i < count; ++i)
      grid.push_back(std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i /
                                        (count - 1)));
    return grid;
  }
  std::vector<double> grid;
  for (const auto& v : split_list(spec)) grid.push_back(parse_double(v, "pce.tau_grid"));
  if (grid.empty()) throw ConfigError("tau grid must not be empty");
  return grid;
}

std::string tau_grid_to_string(const std::vector<double>& grid) {
  std::string out;
  for (double v : grid) {
    if (!out.empty()) out += ',';
    out += format_double(v);
  }
  return out;
}

std::filesystem::path stage_path(const std::filesystem::path& out, int stage) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "stage_%04d", stage);
  return out / buf;
}

int exact_row_match(const Eigen::MatrixXd& pool, const Eigen::RowVectorXd& row) {
  for (Eigen::Index r = 0; r < pool.rows(); ++r)
    if (pool.row(r) == row) return static_cast<int>(r);
  return -1;
}

Eigen::MatrixXd append_rows(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

Eigen::MatrixXd append_cols(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() == 0) return b;
  if (b.cols() == 0) return a;
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

}  // namespace

CampaignConfig CampaignConfig::from_kv(const KeyValueFile& kv) {
  CampaignConfig c;
  c.problem = kv.get("problem");
  c.out = kv.get_or("out", "campaign");
  c.seed = static_cast<std::uint64_t>(kv.get_int_or("seed", 0));
  c.pilot_lf = static_cast<int>(kv.get_int_or("pilot.lf", c.pilot_lf));
  c.pilot_pairs = static_cast<int>(kv.get_int_or("pilot.pairs", c.pilot_pairs));
  c.budget = static_cast<int>(kv.get_int_or("budget", c.budget));
  c.batch = static_cast<int>(kv.get_int_or("batch", c.batch));
  c.allow_budget_overshoot = kv.get_bool_or("allow_budget_overshoot", false);
  c.cv_mode = kv.get_or("cv.mode", "kfold");
  c.cv_folds = static_cast<int>(kv.get_int_or("cv.folds", c.cv_folds));
  c.build.rho = kv.get_double_or("kle.rho", c.build.rho);
  c.build.degree = static_cast<int>(kv.get_int_or("pce.degree", c.build.degree));
  if (kv.has("pce.tau_grid")) c.build.tau_grid = parse_tau_grid(kv.get("pce.tau_grid"));
  c.build.tau_folds = static_cast<int>(kv.get_int_or("pce.tau_folds", c.build.tau_folds));
  c.build.tau_seed = static_cast<std::uint64_t>(kv.get_int_or("pce.tau_seed", 0));
  c.gp.starts = static_cast<int>(kv.get_int_or("gp.starts", c.gp.starts));
  c.gp.log_targets = kv.get_bool_or("gp.log_targets", false);
  c.acquisition.candidates =
      static_cast<int>(kv.get_int_or("acquisition.candidates", c.acquisition.candidates));
  c.acquisition.refine_top =
      static_cast<int>(kv.get_int_or("acquisition.refine_top", c.acquisition.refine_top));
  c.acquisition.min_separation =
      kv.get_double_or("acquisition.min_separation", c.acquisition.min_separation);
  c.policy = kv.get_or("policy", c.policy);
  if (kv.has("policies")) c.policies = split_list(kv.get("policies"));
  c.replicates = static_cast<int>(kv.get_int_or("replicates", 1));
  c.metric_rule = kv.get_or("metrics.rule", "auto");
  c.metric_grid = static_cast<int>(kv.get_int_or("metrics.grid", c.metric_grid));
  c.metric_mc = static_cast<int>(kv.get_int_or("metrics.mc", c.metric_mc));
  c.metric_seed = static_cast<std::uint64_t>(kv.get_int_or("metrics.seed", 0));
  c.metric_every_stage = kv.get_bool_or("metrics.every_stage", true);
  c.convdiff_hf_n = static_cast<int>(kv.get_int_or("convdiff.hf_n", c.convdiff_hf_n));
  c.convdiff_lf_n = static_cast<int>(kv.get_int_or("convdiff.lf_n", c.convdiff_lf_n));
  c.pulse_c1_series_replaces_sine = kv.get_bool_or("pulse.c1_series_replaces_sine", false);
  if (kv.has("external.qois")) {
    for (const auto& name : split_list(kv.get("external.qois")))
      c.external_sources.push_back({name, kv.get("external." + name + ".lf_bundle"),
                                    kv.get("external." + name + ".hf_bundle")});
  } else if (kv.has("external.lf_bundle")) {
    c.external_sources.push_back(
        {"qoi", kv.get("external.lf_bundle"), kv.get("external.hf_bundle")});
  }
  c.uq_samples = static_cast<int>(kv.get_int_or("uq.samples", c.uq_samples));
  c.uq_seed = static_cast<std::uint64_t>(kv.get_int_or("uq.seed", c.uq_seed));
  c.threads = static_cast<int>(kv.get_int_or("threads", 0));
  c.validate();
  return c;
}

KeyValueFile CampaignConfig::to_kv() const {
  KeyValueFile kv;
  kv.set("problem", problem);
  kv.set("out", out.string());
  kv.set_int("seed", static_cast<long>(seed));
  kv.set_int("pilot.lf", pilot_lf);
  kv.set_int("pilot.pairs", pilot_pairs);
  kv.set_int("budget", budget);
  kv.set_int("batch", batch);
  kv.set("allow_budget_overshoot", allow_budget_overshoot ? "true" : "false");
  kv.set("cv.mode", cv_mode);
  kv.set_int("cv.folds", cv_folds);
  kv.set_double("kle.rho", build.rho);
  kv.set_int("pce.degree", build.degree);
  if (!build.tau_grid.empty()) kv.set("pce.tau_grid", tau_grid_to_string(build.tau_grid));
  kv.set_int("pce.tau_folds", build.tau_folds);
  kv.set_int("pce.tau_seed", static_cast<long>(build.tau_seed));
  kv.set_int("gp.starts", gp.starts);
  kv.set("gp.log_targets", gp.log_targets ? "true" : "false");
  kv.set_int("acquisition.candidates", acquisition.candidates);
  kv.set_int("acquisition.refine_top", acquisition.refine_top);
  kv.set_double("acquisition.min_separation", acquisition.min_separation);
  kv.set("policy", policy);
  if (!policies.empty()) kv.set("policies", join_list(policies));
  kv.set_int("replicates", replicates);
  kv.set("metrics.rule", metric_rule);
  kv.set_int("metrics.grid", metric_grid);
  kv.set_int("metrics.mc", metric_mc);
  kv.set_int("metrics.seed", static_cast<long>(metric_seed));
  kv.set("metrics.every_stage", metric_every_stage ? "true" : "false");
  if (problem == "convdiff") {
    kv.set_int("convdiff.hf_n", convdiff_hf_n);
    kv.set_int("convdiff.lf_n", convdiff_lf_n);
  }
  if (problem == "pulse_c1")
    kv.set("pulse.c1_series_replaces_sine", pulse_c1_series_replaces_sine ? "true" : "false");
  if (!external_sources.empty()) {
    std::vector<std::string> names;
    for (const auto& s : external_sources) names.push_back(s.name);
    kv.set("external.qois", join_list(names));
    for (const auto& s : external_sources) {
      kv.set("external." + s.name + ".lf_bundle", s.lf_bundle.string());
      kv.set("external." + s.name + ".hf_bundle", s.hf_bundle.string());
    }
  }
  kv.set_int("uq.samples", uq_samples);
  kv.set_int("uq.seed", static_cast<long>(uq_seed));
  kv.set_int("threads", threads);
  return kv;
}

void CampaignConfig::validate() const {
  if (problem != "pulse_c1" && problem != "pulse_c2" && problem != "convdiff" &&
      problem != "external")
    throw ConfigError("key `problem` must be pulse_c1 | pulse_c2 | convdiff | external");
  if (pilot_lf < 2) throw ConfigError("key `pilot.lf` must be >= 2");
  if (pilot_pairs < 2) throw ConfigError("key `pilot.pairs` must be >= 2");
  if (pilot_pairs > pilot_lf) throw ConfigError("key `pilot.pairs` must be <= pilot.lf");
  if (pilot_pairs > budget) throw ConfigError("key `budget` must be >= pilot.pairs");
  if (batch < 1) throw ConfigError("key `batch` must be >= 1");
  if (cv_mode != "kfold" && cv_mode != "loo")
    throw ConfigError("key `cv.mode` must be kfold | loo");
  if (cv_mode == "kfold" && (cv_folds < 2 || cv_folds > pilot_pairs))
    throw ConfigError("key `cv.folds` must satisfy 2 <= k <= pilot.pairs");
  if (policy != "ei_max" && policy != "ei_min" && policy != "random")
    throw ConfigError("key `policy` must be ei_max | ei_min | random");
  for (const auto& p : policies)
    if (p != "ei_max" && p != "ei_min" && p != "random")
      throw ConfigError("key `policies` entries must be ei_max | ei_min | random");
  if (!(build.rho > 0.0 && build.rho <= 1.0))
    throw ConfigError("key `kle.rho` must be in (0, 1]");
  if (replicates < 1) throw ConfigError("key `replicates` must be >= 1");
  if (metric_rule != "auto" && metric_rule != "grid" && metric_rule != "mc" &&
      metric_rule != "none")
    throw ConfigError("key `metrics.rule` must be auto | grid | mc | none");
  if (problem == "external" && external_sources.empty())
    throw ConfigError("external problem needs `external.lf_bundle`/`external.hf_bundle` "
                      "or named `external.qois` bundles");
  if (problem == "convdiff" && convdiff_hf_n % convdiff_lf_n != 0)
    throw ConfigError("key `convdiff.hf_n` must be a multiple of `convdiff.lf_n`");
}

QuadratureRule CampaignConfig::metric_quadrature(int dims) const {
  std::string rule = metric_rule;
  if (rule == "auto") rule = (problem == "convdiff") ? "mc" : "grid";
  if (rule == "grid") {
    if (std::pow(static_cast<double>(metric_grid), dims) > 2e7) rule = "mc";
  }
  if (rule == "grid") return QuadratureRule::grid(metric_grid);
  return QuadratureRule::monte_carlo(metric_mc, metric_seed);
}

namespace {

std::unique_ptr<Problem> make_problem(const CampaignConfig& c) {
  if (c.problem == "pulse_c1") return make_pulse_problem(false, c.pulse_c1_series_replaces_sine);
  if (c.problem == "pulse_c2") return make_pulse_problem(true);
  if (c.problem == "convdiff") return make_convdiff_problem(c.convdiff_hf_n, c.convdiff_lf_n);
  return make_external_problem(c.external_sources);
}

// Evaluates a model (lf or hf) at every design row, per QoI; one matrix of
// field columns per QoI. Rows evaluate concurrently.
std::vector<Eigen::MatrixXd> evaluate_rows(const Problem& problem, const ParamBounds& bounds,
                                           const Eigen::MatrixXd& design_rows, bool hf,
                                           int threads) {
  const int n = static_cast<int>(design_rows.rows());
  std::vector<Eigen::MatrixXd> fields(static_cast<std::size_t>(problem.qoi_count()));
  for (int q = 0; q < problem.qoi_count(); ++q)
    fields[static_cast<std::size_t>(q)].resize(problem.grid(q)->points(), n);
  parallel_for(
      n,
      [&](int i) {
        Eigen::VectorXd theta = bounds.to_physical(design_rows.row(i).transpose());
        for (int q = 0; q < problem.qoi_count(); ++q) {
          Field f = hf ? problem.eval_hf(q, theta) : problem.eval_lf(q, theta);
          fields[static_cast<std::size_t>(q)].col(i) = f.values;
        }
      },
      threads);
  return fields;
}

struct CampaignRun {
  const CampaignConfig& config;
  std::unique_ptr<Problem> problem;
  AlHistory history;
  std::shared_ptr<const OracleCache> oracle;
  int threads = 1;

  explicit CampaignRun(const CampaignConfig& c) : config(c), problem(make_problem(c)) {
    history.config = c;
    history.bounds = problem->bounds();
    history.pilot_lf_count = c.pilot_lf;
    history.pilot_pair_count = c.pilot_pairs;
    const int qois = problem->qoi_count();
    history.lf_snaps.resize(static_cast<std::size_t>(qois));
    history.hf_snaps.resize(static_cast<std::size_t>(qois));
    history.lf_paired.resize(static_cast<std::size_t>(qois));
    for (int q = 0; q < qois; ++q) {
      auto& lf = history.lf_snaps[static_cast<std::size_t>(q)];
      lf.grid = problem->grid(q);
      lf.values.resize(lf.grid->points(), 0);
      history.hf_snaps[static_cast<std::size_t>(q)] = lf;
      history.lf_paired[static_cast<std::size_t>(q)] = lf;
    }
  }

  int dims() const { return history.bounds.dims(); }

  // ---- persistence -------------------------------------------------------

  void persist_new_data(int stage, const Eigen::MatrixXd& lf_new,
                        const Eigen::MatrixXd& pairs_new,
                        const std::vector<Eigen::MatrixXd>& lf_fields,
                        const std::vector<Eigen::MatrixXd>& hf_fields) const {
    auto dir = stage_path(config.out, stage);
    std::filesystem::create_directories(dir);
    write_design_csv(dir / "design_lf_new.csv", {lf_new, "subset", config.seed},
                     history.bounds);
    write_design_csv(dir / "design_pairs_new.csv", {pairs_new, "subset", config.seed},
                     history.bounds);
    for (int q = 0; q < problem->qoi_count(); ++q) {
      auto qdir = dir / ("qoi_" + std::to_string(q));
      std::filesystem::create_directories(qdir);
      std::vector<std::string> lf_cols, hf_cols;
      for (int i = 0; i < lf_fields[static_cast<std::size_t>(q)].cols(); ++i)
        lf_cols.push_back("s" + std::to_string(i + 1));
      for (int i = 0; i < hf_fields[static_cast<std::size_t>(q)].cols(); ++i)
        hf_cols.push_back("s" + std::to_string(i + 1));
      write_matrix_csv(qdir / "lf_new.csv", lf_fields[static_cast<std::size_t>(q)], lf_cols,
                       grid_meta(*problem->grid(q)));
      write_matrix_csv(qdir / "hf_new.csv", hf_fields[static_cast<std::size_t>(q)], hf_cols,
                       grid_meta(*problem->grid(q)));
    }
  }

  void persist_stage_tail(const StageRecord& rec) const {
    auto dir = stage_path(config.out, rec.stage);
    write_cv_errors_csv(dir / "cv_errors.csv", rec.cv,
                        history.pair_design.topRows(rec.cv.errors.size()));
    KeyValueFile m;
    m.set_int("stage", rec.stage);
    m.set_int("n_hf", rec.n_hf);
    m.set_double("mean_cv", rec.mean_cv);
    m.set_double("max_cv", rec.max_cv);
    m.set_double("mu_eps", rec.mu_eps);
    m.set_int("mu_skipped", rec.mu_skipped);
    m.set("acquisition_fallback", rec.acquisition_fallback ? "true" : "false");
    m.set_double("wall_seconds", rec.wall_seconds);
    m.write_file(dir / "metrics.txt");
    write_text_file(dir / "complete.marker", "ok\n");
    rewrite_root_metrics();
  }

  // Root metrics stay fully deterministic; wall-clock lives in the per-stage
  // metrics.txt so resume reproduces this file bitwise.
  void rewrite_root_metrics() const {
    std::ostringstream os;
    os << "stage,n_hf,mean_cv,max_cv,mu_eps,mu_skipped\n";
    for (const auto& r : history.stages)
      os << r.stage << ',' << r.n_hf << ',' << format_double(r.mean_cv) << ','
         << format_double(r.max_cv) << ',' << format_double(r.mu_eps) << ',' << r.mu_skipped
         << "\n";
    write_text_file(config.out / "metrics.csv", os.str());
  }

  void write_manifest(const std::string& status) {
    history.status = status;
    KeyValueFile m;
    m.set("tool_version", kToolVersion);
    m.set("rng", Rng::kName);
    m.set("config_hash", hash_hex(fnv1a64(config.to_kv().serialize())));
    for (const auto& s : config.external_sources) {
      m.set("digest." + s.name + ".lf",
            hash_hex(fnv1a64_file(s.lf_bundle / "snapshots.csv")));
      m.set("digest." + s.name + ".hf",
            hash_hex(fnv1a64_file(s.hf_bundle / "snapshots.csv")));
    }
    m.set_int("stages_complete", static_cast<long>(history.stages.size()));
    m.set_int("n_hf", history.n_hf());
    m.set("status", status);
    m.set_int("timestamp",
              static_cast<long>(std::chrono::duration_cast<std::chrono::seconds>(
                                    std::chrono::system_clock::now().time_since_epoch())
                                    .count()));
    m.write_file(config.out / "manifest.txt");
  }

  // ---- state updates ------------------------------------------------------

  void append_data(const Eigen::MatrixXd& lf_new, const Eigen::MatrixXd& pairs_new,
                   const std::vector<Eigen::MatrixXd>& lf_fields,
                   const std::vector<Eigen::MatrixXd>& hf_fields) {
    history.lf_design = append_rows(history.lf_design, lf_new);
    history.pair_design = append_rows(history.pair_design, pairs_new);
    for (int q = 0; q < problem->qoi_count(); ++q) {
      auto& lf = history.lf_snaps[static_cast<std::size_t>(q)];
      lf.values = append_cols(lf.values, lf_fields[static_cast<std::size_t>(q)]);
      lf.design = history.lf_design;
      auto& hf = history.hf_snaps[static_cast<std::size_t>(q)];
      hf.values = append_cols(hf.values, hf_fields[static_cast<std::size_t>(q)]);
      hf.design = history.pair_design;
    }
    rebuild_paired_lf();
  }

  // Paired LF values are served from the LF pool by exact design-row match,
  // so pairs and pool never drift apart.
  void rebuild_paired_lf() {
    for (int q = 0; q < problem->qoi_count(); ++q) {
      auto& paired = history.lf_paired[static_cast<std::size_t>(q)];
      const auto& lf = history.lf_snaps[static_cast<std::size_t>(q)];
      paired.grid = lf.grid;
      paired.design = history.pair_design;
      paired.values.resize(lf.grid->points(), history.pair_design.rows());
      for (Eigen::Index i = 0; i < history.pair_design.rows(); ++i) {
        int row = exact_row_match(history.lf_design, history.pair_design.row(i));
        if (row < 0) throw PairingError("paired design row missing from the LF design");
        paired.values.col(i) = lf.values.col(row);
      }
    }
  }

  void rebuild_surrogates() {
    history.surrogates.clear();
    for (int q = 0; q < problem->qoi_count(); ++q)
      history.surrogates.push_back(build_bifidelity(
          history.lf_snaps[static_cast<std::size_t>(q)],
          history.hf_snaps[static_cast<std::size_t>(q)],
          history.lf_paired[static_cast<std::size_t>(q)], history.bounds, config.build));
  }

  CvErrors compute_cv(int stage) {
    const int n_pairs = history.n_hf();
    if (problem->qoi_count() > 1 || config.cv_mode == "loo") {
      std::vector<QoiData> qois;
      for (int q = 0; q < problem->qoi_count(); ++q)
        qois.push_back({history.lf_snaps[static_cast<std::size_t>(q)],
                        history.hf_snaps[static_cast<std::size_t>(q)],
                        history.lf_paired[static_cast<std::size_t>(q)],
                        history.pilot_lf_count});
      return multi_qoi_loo_errors(qois, history.bounds, config.build, threads);
    }
    CvConfig cv;
    cv.k = std::min(config.cv_folds, n_pairs);
    cv.seed = Rng::stream(config.seed, {kTagCv, static_cast<std::uint64_t>(stage)}).next_u64();
    cv.lf_pilot_count = history.pilot_lf_count;
    cv.build = config.build;
    cv.threads = threads;
    return kfold_errors(history.lf_snaps[0], history.hf_snaps[0], history.lf_paired[0],
                        history.bounds, cv);
  }

  StageRecord make_record(int stage, const CvErrors& cv, const Eigen::MatrixXd& acquired,
                          bool fallback, double wall) {
    StageRecord rec;
    rec.stage = stage;
    rec.n_hf = history.n_hf();
    rec.cv = cv;
    rec.acquired = acquired;
    rec.mean_cv = cv.mean_valid();
    rec.max_cv = cv.valid_count() > 0 ? cv.max_valid() : std::numeric_limits<double>::quiet_NaN();
    rec.acquisition_fallback = fallback;
    rec.wall_seconds = wall;
    if (oracle && (config.metric_every_stage || last_stage_upcoming(stage))) {
      IntegratedError err = integrated_relative_error_cached(history.surrogates[0],
                                                             oracle->nodes,
                                                             oracle->oracle_fields);
      rec.mu_eps = err.value;
      rec.mu_skipped = err.skipped;
    }
    return rec;
  }

  bool last_stage_upcoming(int) const {
    int remaining = config.budget - history.n_hf();
    return config.allow_budget_overshoot ? remaining < 0 : remaining < config.batch;
  }

  // ---- resume -------------------------------------------------------------

  bool stage_complete(int stage) const {
    return std::filesystem::exists(stage_path(config.out, stage) / "complete.marker");
  }

  void load_stage(int stage) {
    auto dir = stage_path(config.out, stage);
    Design lf_new = read_design_csv(dir / "design_lf_new.csv").first;
    Design pairs_new = read_design_csv(dir / "design_pairs_new.csv").first;
    std::vector<Eigen::MatrixXd> lf_fields, hf_fields;
    for (int q = 0; q < problem->qoi_count(); ++q) {
      auto qdir = dir / ("qoi_" + std::to_string(q));
      lf_fields.push_back(read_matrix_csv(qdir / "lf_new.csv").values);
      hf_fields.push_back(read_matrix_csv(qdir / "hf_new.csv").values);
    }
    if (stage == 0) {
      history.pilot_lf_count = static_cast<int>(lf_new.points.rows());
      history.pilot_pair_count = static_cast<int>(pairs_new.points.rows());
    }
    append_data(lf_new.points, pairs_new.points, lf_fields, hf_fields);

    CsvMatrix cvcsv = read_matrix_csv(dir / "cv_errors.csv");
    CvErrors cv;
    const int n = static_cast<int>(cvcsv.values.rows());
    cv.k = std::stoi(cvcsv.meta.at("k"));
    cv.seed = std::stoull(cvcsv.meta.at("seed"));
    cv.errors.resize(n);
    cv.fold_of.resize(static_cast<std::size_t>(n));
    cv.missing.resize(static_cast<std::size_t>(n));
    const Eigen::Index err_col = cvcsv.values.cols() - 2;
    const Eigen::Index fold_col = cvcsv.values.cols() - 3;
    const Eigen::Index missing_col = cvcsv.values.cols() - 1;
    for (int i = 0; i < n; ++i) {
      cv.errors(i) = cvcsv.values(i, err_col);
      cv.fold_of[static_cast<std::size_t>(i)] = static_cast<int>(cvcsv.values(i, fold_col));
      cv.missing[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(cvcsv.values(i, missing_col) != 0.0);
    }

    KeyValueFile m = KeyValueFile::parse_file(dir / "metrics.txt");
    StageRecord rec;
    rec.stage = stage;
    rec.n_hf = static_cast<int>(m.get_int("n_hf"));
    rec.cv = cv;
    rec.acquired = stage == 0 ? Eigen::MatrixXd(0, dims()) : pairs_new.points;
    rec.mean_cv = m.get_double("mean_cv");
    rec.max_cv = m.get_double("max_cv");
    rec.mu_eps = m.get_double("mu_eps");
    rec.mu_skipped = static_cast<int>(m.get_int("mu_skipped"));
    rec.acquisition_fallback = m.get_bool_or("acquisition_fallback", false);
    rec.wall_seconds = m.get_double("wall_seconds");
    history.stages.push_back(rec);
  }

  // ---- acquisition ---------------------------------------------------------

  Eigen::MatrixXd random_batch(int stage) {
    Rng rng = Rng::stream(config.seed, {kTagRandomAcq, static_cast<std::uint64_t>(stage)});
    Eigen::MatrixXd pts(config.batch, dims());
    int placed = 0;
    int attempts = 0;
    while (placed < config.batch && attempts < 1000 * config.batch) {
      ++attempts;
      Eigen::VectorXd x(dims());
      for (int j = 0; j < dims(); ++j) x(j) = rng.uniform(-1.0, 1.0);
      bool ok = true;
      for (Eigen::Index r = 0; r < history.pair_design.rows() && ok; ++r)
        ok = (history.pair_design.row(r).transpose() - x).norm() >=
             config.acquisition.min_separation;
      for (int r = 0; r < placed && ok; ++r)
        ok = (pts.row(r).transpose() - x).norm() >= config.acquisition.min_separation;
      if (ok) pts.row(placed++) = x.transpose();
    }
    if (placed < config.batch)
      throw NumericalError("random acquisition could not place a separated batch");
    return pts;
  }

  // Selects the next batch, writes the proposal checkpoint, and returns the
  // points. Reuses a pending proposal left by an interrupted run.
  Eigen::MatrixXd propose_batch(int next_stage, const CvErrors& cv, bool* fallback) {
    auto dir = stage_path(config.out, next_stage);
    auto proposal_file = dir / "proposed_design.csv";
    if (std::filesystem::exists(proposal_file))
      return read_design_csv(proposal_file).first.points;

    Eigen::MatrixXd pts;
    *fallback = false;
    if (config.policy == "random") {
      pts = random_batch(next_stage);
    } else {
      // GP over valid CV errors only.
      std::vector<int> valid;
      for (Eigen::Index i = 0; i < cv.errors.size(); ++i)
        if (!cv.missing[static_cast<std::size_t>(i)]) valid.push_back(static_cast<int>(i));
      if (static_cast<int>(valid.size()) < 2) {
        std::fprintf(stderr, "warning: stage %d has <2 valid CV errors; random fallback\n",
                     next_stage);
        pts = random_batch(next_stage);
        *fallback = true;
      } else {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(valid.size()), dims());
        Eigen::VectorXd y(static_cast<Eigen::Index>(valid.size()));
        for (std::size_t i = 0; i < valid.size(); ++i) {
          x.row(static_cast<Eigen::Index>(i)) = history.pair_design.row(valid[i]);
          y(static_cast<Eigen::Index>(i)) = cv.errors(valid[i]);
        }
        GpModel gp = GpModel::fit(x, y, config.gp);
        double eps_star = y.maxCoeff();
        AcquisitionResult acq = kriging_believer_batch(gp, eps_star, config.batch,
                                                       config.acquisition,
                                                       config.policy == "ei_min");
        pts = acq.points;
        *fallback = acq.any_fallback;
        save_gp_bundle(dir / "gp.csv", gp);
        // Audit log: one row per selected point.
        Eigen::MatrixXd log(config.batch, dims() + 4);
        for (int b = 0; b < config.batch; ++b) {
          log(b, 0) = next_stage;
          log.block(b, 1, 1, dims()) = acq.points.row(b);
          log(b, dims() + 1) = acq.ei_values(b);
          log(b, dims() + 2) = acq.believer_log[static_cast<std::size_t>(b)].eps_star_used;
          log(b, dims() + 3) = acq.believer_log[static_cast<std::size_t>(b)].believed_value;
        }
        std::vector<std::string> cols{"stage"};
        for (int j = 0; j < dims(); ++j) cols.push_back("xi" + std::to_string(j + 1));
        cols.push_back("ei");
        cols.push_back("eps_star");
        cols.push_back("believed");
        write_matrix_csv(dir / "acquisition.csv", log, cols);
      }
    }
    write_design_csv(proposal_file, {pts, "proposal", config.seed}, history.bounds);
    return pts;
  }

  // ---- main loop ------------------------------------------------------------

  AlHistory load_only() {
    int stage = 0;
    while (stage_complete(stage)) {
      load_stage(stage);
      ++stage;
    }
    if (stage == 0) throw DataError("no completed stages in " + config.out.string());
    rebuild_surrogates();
    history.status = "loaded";
    return history;
  }

  AlHistory run(bool resume, std::shared_ptr<const OracleCache> cache) {
    threads = effective_threads(config.threads);

    std::filesystem::create_directories(config.out);
    auto config_file = config.out / "config.txt";
    std::string canonical = config.to_kv().serialize();
    if (std::filesystem::exists(config_file)) {
      if (!resume)
        throw ConfigError("campaign directory already exists; pass --resume to continue: " +
                          config.out.string());
      if (read_text_file(config_file) != canonical)
        throw ConfigError("config does not match the existing campaign snapshot in " +
                          config.out.string());
    } else {
      write_text_file(config_file, canonical);
    }

    if (oracle_needed()) {
      oracle = cache ? cache
                     : build_oracle_cache(*problem, config.metric_quadrature(dims()), threads);
    }

    // Stage 0: pilot designs and data. Built-in problems draw an LHS pilot
    // with a maximin pair subset; external problems supply both from their
    // ingested bundles.
    int stage = 0;
    if (stage_complete(0)) {
      load_stage(0);
      rebuild_surrogates();
    } else {
      auto t0 = std::chrono::steady_clock::now();
      Eigen::MatrixXd lf_points, pairs;
      std::vector<Eigen::MatrixXd> lf_fields, hf_fields;
      if (problem->provides_pilot()) {
        problem->pilot_data(lf_points, pairs, lf_fields, hf_fields);
      } else {
        Design lf_design = latin_hypercube(config.pilot_lf, dims(),
                                           Rng::stream(config.seed, {kTagLhs}).next_u64());
        lf_points = lf_design.points;
        std::vector<int> pair_rows = maximin_subset(lf_points, config.pilot_pairs);
        pairs.resize(config.pilot_pairs, dims());
        for (int i = 0; i < config.pilot_pairs; ++i)
          pairs.row(i) = lf_points.row(pair_rows[static_cast<std::size_t>(i)]);
        lf_fields = evaluate_rows(*problem, history.bounds, lf_points, false, threads);
        hf_fields = evaluate_rows(*problem, history.bounds, pairs, true, threads);
      }
      history.pilot_lf_count = static_cast<int>(lf_points.rows());
      history.pilot_pair_count = static_cast<int>(pairs.rows());
      persist_new_data(0, lf_points, pairs, lf_fields, hf_fields);
      append_data(lf_points, pairs, lf_fields, hf_fields);
      rebuild_surrogates();
      CvErrors cv = compute_cv(0);
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      history.stages.push_back(make_record(0, cv, Eigen::MatrixXd(0, dims()), false, wall));
      persist_stage_tail(history.stages.back());
    }

    // Acquisition loop.
    while (stage_within_budget()) {
      ++stage;
      if (stage_complete(stage)) {
        load_stage(stage);
        rebuild_surrogates();
        continue;
      }
      auto t0 = std::chrono::steady_clock::now();
      bool fallback = false;
      Eigen::MatrixXd pts = propose_batch(stage, history.stages.back().cv, &fallback);

      std::vector<Eigen::MatrixXd> lf_fields, hf_fields;
      try {
        lf_fields = evaluate_rows(*problem, history.bounds, pts, false, threads);
        hf_fields = evaluate_rows(*problem, history.bounds, pts, true, threads);
      } catch (const AwaitingData& e) {
        write_manifest("awaiting_data");
        std::fprintf(stderr, "campaign paused at stage %d: %s\n", stage, e.what());
        return history;
      }

      persist_new_data(stage, pts, pts, lf_fields, hf_fields);
      append_data(pts, pts, lf_fields, hf_fields);
      rebuild_surrogates();
      CvErrors cv = compute_cv(stage);
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      history.stages.push_back(make_record(stage, cv, pts, fallback, wall));
      persist_stage_tail(history.stages.back());
    }

    for (int q = 0; q < problem->qoi_count(); ++q)
      save_surrogate(config.out / "final_surrogate" / ("qoi_" + std::to_string(q)),
                     history.surrogates[static_cast<std::size_t>(q)], config.build);
    write_manifest("completed");
    return history;
  }

  bool oracle_needed() const {
    if (!problem->has_oracle()) return false;
    if (config.metric_rule == "none") return false;
    return true;
  }

  bool stage_within_budget() const {
    return config.allow_budget_overshoot ? history.n_hf() <= config.budget
                                         : history.n_hf() + config.batch <= config.budget;
  }
};

}  // namespace

std::shared_ptr<const OracleCache> build_oracle_cache(const Problem& problem,
                                                      const QuadratureRule& rule, int threads) {
  auto cache = std::make_shared<OracleCache>();
  ParamBounds bounds = problem.bounds();
  cache->nodes = rule.nodes(bounds.dims());
  cache->oracle_fields.resize(problem.grid(0)->points(), cache->nodes.rows());
  parallel_for(
      static_cast<int>(cache->nodes.rows()),
      [&](int i) {
        Eigen::VectorXd theta = bounds.to_physical(cache->nodes.row(i).transpose());
        cache->oracle_fields.col(i) = problem.eval_hf(0, theta).values;
      },
      threads);
  return cache;
}

AlHistory run_campaign(const CampaignConfig& config, bool resume,
                       std::shared_ptr<const OracleCache> oracle_cache) {
  config.validate();
  CampaignRun run(config);
  return run.run(resume, std::move(oracle_cache));
}

AlHistory load_campaign(const std::filesystem::path& dir) {
  CampaignConfig config = CampaignConfig::from_kv(KeyValueFile::parse_file(dir / "config.txt"));
  config.out = dir;  // the snapshot may carry a relative path; trust the caller's
  CampaignRun run(config);
  return run.load_only();
}

ReplicateSummary run_replicates(const CampaignConfig& config, int replicates) {
  config.validate();
  if (replicates < 1) throw ConfigError("replicate count must be >= 1");
  std::vector<std::string> policies =
      config.policies.empty() ? std::vector<std::string>{config.policy} : config.policies;

  std::shared_ptr<const OracleCache> cache;
  {
    auto problem = make_problem(config);
    if (problem->has_oracle() && config.metric_rule != "none")
      cache = build_oracle_cache(*problem, config.metric_quadrature(problem->bounds().dims()),
                                 effective_threads(config.threads));
  }

  const int jobs = static_cast<int>(policies.size()) * replicates;
  std::vector<std::vector<StageRecord>> results(static_cast<std::size_t>(jobs));
  std::vector<std::uint8_t> ok(static_cast<std::size_t>(jobs), 0);

  parallel_for(
      jobs,
      [&](int j) {
        int p = j / replicates;
        int r = j % replicates;
        CampaignConfig c = config;
        c.policy = policies[static_cast<std::size_t>(p)];
        c.policies.clear();
        c.replicates = 1;
        // Replicates share pilot data and CV partitions across policies.
        c.seed = Rng::stream(config.seed, {kTagReplicate, static_cast<std::uint64_t>(r)})
                     .next_u64();
        c.out = config.out / c.policy / ("rep_" + std::to_string(r));
        c.threads = 1;
        try {
          AlHistory h = run_campaign(c, true, cache);
          results[static_cast<std::size_t>(j)] = h.stages;
          ok[static_cast<std::size_t>(j)] = h.status == "completed";
        } catch (const Error& e) {
          std::fprintf(stderr, "replicate %s/%d failed: %s\n", c.policy.c_str(), r, e.what());
        }
      },
      effective_threads(config.threads));

  ReplicateSummary summary;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    PolicyAggregate agg;
    agg.policy = policies[p];
    std::size_t n_stages = 0;
    for (int r = 0; r < replicates; ++r) {
      std::size_t j = p * static_cast<std::size_t>(replicates) + static_cast<std::size_t>(r);
      if (ok[j]) n_stages = std::max(n_stages, results[j].size());
    }
    agg.stage_mean_mu.assign(n_stages, std::numeric_limits<double>::quiet_NaN());
    agg.stage_std_mu.assign(n_stages, std::numeric_limits<double>::quiet_NaN());
    agg.stage_mean_cv.assign(n_stages, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t s = 0; s < n_stages; ++s) {
      double sum = 0.0, sum_sq = 0.0, cv_sum = 0.0;
      int count = 0;
      for (int r = 0; r < replicates; ++r) {
        std::size_t j = p * static_cast<std::size_t>(replicates) + static_cast<std::size_t>(r);
        if (!ok[j] || s >= results[j].size()) continue;
        double mu = results[j][s].mu_eps;
        if (std::isnan(mu)) continue;
        sum += mu;
        sum_sq += mu * mu;
        cv_sum += results[j][s].mean_cv;
        ++count;
      }
      if (count > 0) {
        double mean = sum / count;
        agg.stage_mean_mu[s] = mean;
        agg.stage_std_mu[s] =
            count > 1 ? std::sqrt(std::max(0.0, (sum_sq - count * mean * mean) / (count - 1)))
                      : 0.0;
        agg.stage_mean_cv[s] = cv_sum / count;
      }
    }
    for (int r = 0; r < replicates; ++r) {
      std::size_t j = p * static_cast<std::size_t>(replicates) + static_cast<std::size_t>(r);
      if (ok[j])
        ++agg.completed;
      else
        ++agg.failed;
    }
    summary.complete = summary.complete && agg.failed == 0;
    summary.policies.push_back(std::move(agg));
  }

  // Aggregate CSV per policy.
  for (const auto& agg : summary.policies) {
    std::ostringstream os;
    os << "stage,mean_mu_eps,std_mu_eps,mean_cv\n";
    for (std::size_t s = 0; s < agg.stage_mean_mu.size(); ++s)
      os << s << ',' << format_double(agg.stage_mean_mu[s]) << ','
         << format_double(agg.stage_std_mu[s]) << ',' << format_double(agg.stage_mean_cv[s])
         << "\n";
    write_text_file(config.out / ("aggregate_" + agg.policy + ".csv"), os.str());
  }
  return summary;
}

CrossPolicyTable cross_policy_test(const AlHistory& a, const AlHistory& b) {
  if (a.config.problem != b.config.problem)
    throw PairingError("cross-policy test requires the same problem");
  if (a.bounds.lo != b.bounds.lo || a.bounds.hi != b.bounds.hi)
    throw PairingError("cross-policy test requires identical bounds");

  CrossPolicyTable table;
  auto evaluate = [&](const AlHistory& surr_side, const AlHistory& test_side,
                      std::vector<double>& errors, Eigen::MatrixXd& used_points) {
    std::vector<int> rows;
    for (Eigen::Index i = test_side.pilot_pair_count; i < test_side.pair_design.rows(); ++i) {
      if (exact_row_match(surr_side.pair_design, test_side.pair_design.row(i)) >= 0) {
        ++table.overlap_excluded;
        continue;
      }
      rows.push_back(static_cast<int>(i));
    }
    used_points.resize(static_cast<Eigen::Index>(rows.size()), test_side.pair_design.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      used_points.row(static_cast<Eigen::Index>(r)) = test_side.pair_design.row(rows[r]);
    if (rows.empty()) return;
    for (std::size_t q = 0; q < surr_side.surrogates.size(); ++q) {
      Eigen::MatrixXd pred = surr_side.surrogates[q].predict_batch_normalized(used_points);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        double err = relative_field_error(
            *surr_side.surrogates[q].grid,
            test_side.hf_snaps[q].values.col(rows[r]),
            pred.col(static_cast<Eigen::Index>(r)));
        if (q == 0)
          errors.push_back(err);
        else
          errors[r] += err;
      }
    }
    const double nq = static_cast<double>(surr_side.surrogates.size());
    for (auto& e : errors) e /= nq;
  };
  evaluate(a, b, table.errors_a_on_b, table.points_a_on_b);
  evaluate(b, a, table.errors_b_on_a, table.points_b_on_a);
  return table;
}

}  // namespace bifikle
