#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>

#include "bifikle/common.hpp"
#include "bifikle/driver.hpp"
#include "bifikle/report.hpp"

namespace fs = std::filesystem;
using namespace bifikle;

namespace {

CampaignConfig load_config(const std::string& path, const std::string& out_override,
                           long seed_override, const std::string& policy_override) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  if (!out_override.empty()) kv.set("out", out_override);
  if (seed_override >= 0) kv.set_int("seed", seed_override);
  if (!policy_override.empty()) kv.set("policy", policy_override);
  return CampaignConfig::from_kv(kv);
}

int cmd_run(const std::string& config_path, const std::string& out, long seed,
            const std::string& policy, bool resume) {
  CampaignConfig config = load_config(config_path, out, seed, policy);
  AlHistory history = run_campaign(config, resume);
  if (history.status == "awaiting_data") {
    std::printf("campaign paused awaiting ingested snapshots; resume with --resume\n");
    return 0;
  }
  std::printf("campaign complete: %d stages, %d HF evaluations, output in %s\n",
              static_cast<int>(history.stages.size()), history.n_hf(),
              config.out.string().c_str());
  return 0;
}

int cmd_replicates(const std::string& config_path, const std::string& out, long seed) {
  CampaignConfig config = load_config(config_path, out, seed, "");
  ReplicateSummary summary = run_replicates(config, config.replicates);
  for (const auto& agg : summary.policies) {
    double final_mu = agg.stage_mean_mu.empty() ? std::nan("") : agg.stage_mean_mu.back();
    std::printf("policy %-8s replicates ok=%d failed=%d final mean mu_eps=%s\n",
                agg.policy.c_str(), agg.completed, agg.failed,
                format_double(final_mu).c_str());
  }
  return summary.complete ? 0 : 4;
}

int cmd_ingest(const std::string& design_path, const std::string& grid_path,
               const std::string& out_dir, const std::vector<std::string>& snapshot_paths) {
  auto [design, bounds] = read_design_csv(design_path);

  for (Eigen::Index i = 0; i < design.points.rows(); ++i)
    for (Eigen::Index j = i + 1; j < design.points.rows(); ++j)
      if (design.points.row(i) == design.points.row(j))
        throw DataError("duplicate design rows " + std::to_string(i) + " and " +
                        std::to_string(j) + " in " + design_path);

  GridPtr grid;
  if (!grid_path.empty()) {
    KeyValueFile kv = KeyValueFile::parse_file(grid_path);
    std::map<std::string, std::string> meta;
    for (const auto& [k, v] : kv.entries()) meta[k] = v;
    grid = grid_from_meta(meta);
  }

  std::vector<Eigen::VectorXd> columns;
  for (const auto& path : snapshot_paths) {
    CsvMatrix csv = read_matrix_csv(path);
    if (!grid && !csv.meta.empty()) grid = grid_from_meta(csv.meta);
    if (!grid) throw DataError("no grid metadata: pass --grid or use field CSVs with headers");
    if (csv.values.rows() != grid->points())
      throw DataError(path + ": " + std::to_string(csv.values.rows()) +
                      " rows do not match the grid's " + std::to_string(grid->points()) +
                      " points");
    for (Eigen::Index c = 0; c < csv.values.cols(); ++c) {
      if (!csv.values.col(c).allFinite()) {
        for (Eigen::Index r = 0; r < csv.values.rows(); ++r)
          if (!std::isfinite(csv.values(r, c)))
            throw DataError(path + ": non-finite value in column " + std::to_string(c + 1) +
                            ", data row " + std::to_string(r + 1));
      }
      columns.push_back(csv.values.col(c));
    }
  }
  if (static_cast<Eigen::Index>(columns.size()) != design.points.rows())
    throw DataError("snapshot count (" + std::to_string(columns.size()) +
                    ") does not match design row count (" +
                    std::to_string(design.points.rows()) + ")");

  SnapshotSet snaps;
  snaps.grid = grid;
  snaps.design = design.points;
  snaps.values.resize(grid->points(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c)
    snaps.values.col(static_cast<Eigen::Index>(c)) = columns[c];
  write_bundle(out_dir, snaps, bounds);
  std::printf("bundle written: %s (%d snapshots, %d grid points)\n", out_dir.c_str(),
              snaps.samples(), grid->points());
  return 0;
}

int cmd_report(const std::string& campaign_dir, const std::string& out_dir) {
  fs::path out = out_dir.empty() ? fs::path(campaign_dir) / "report" : fs::path(out_dir);
  write_report(campaign_dir, out);
  std::printf("report written to %s\n", out.string().c_str());
  return 0;
}

int cmd_models_eval(const std::string& model, const std::string& design_path,
                    const std::string& out_dir) {
  auto [design, bounds] = read_design_csv(design_path);
  std::unique_ptr<Problem> problem;
  bool hf = false;
  if (model == "pulse_c1_hf" || model == "pulse_c1_lf") {
    problem = make_pulse_problem(false);
    hf = model == "pulse_c1_hf";
  } else if (model == "pulse_c2_hf" || model == "pulse_c2_lf") {
    problem = make_pulse_problem(true);
    hf = model == "pulse_c2_hf";
  } else if (model == "convdiff_hf" || model == "convdiff_lf") {
    problem = make_convdiff_problem(128, 32);
    hf = model == "convdiff_hf";
  } else {
    throw ConfigError("unknown model `" + model +
                      "`; expected pulse_c{1,2}_{hf,lf} or convdiff_{hf,lf}");
  }
  ParamBounds pb = problem->bounds();
  if (pb.dims() != design.points.cols())
    throw DataError("design dimension does not match the model's parameter count");

  fs::create_directories(out_dir);
  KeyValueFile manifest;
  manifest.set("tool_version", kToolVersion);
  manifest.set("model", model);
  manifest.set_int("samples", design.points.rows());
  for (Eigen::Index i = 0; i < design.points.rows(); ++i) {
    Eigen::VectorXd theta = pb.to_physical(design.points.row(i).transpose());
    Field f = hf ? problem->eval_hf(0, theta) : problem->eval_lf(0, theta);
    char name[32];
    std::snprintf(name, sizeof(name), "snapshot_%05d.csv", static_cast<int>(i));
    write_field_csv(fs::path(out_dir) / name, f);
    manifest.set("file." + std::to_string(i), name);
  }
  manifest.set("design_hash", hash_hex(fnv1a64_file(design_path)));
  manifest.write_file(fs::path(out_dir) / "manifest.txt");
  std::printf("wrote %d snapshots to %s\n", static_cast<int>(design.points.rows()),
              out_dir.c_str());
  return 0;
}

int cmd_uq(const std::string& surrogate_dir, const std::string& out_path, int samples,
           long seed) {
  BifidelitySurrogate surr = load_surrogate(surrogate_dir);
  auto [mean, stddev] = propagate_uq(surr, samples, static_cast<std::uint64_t>(seed));
  Eigen::MatrixXd table(surr.grid->points(), 4);
  table.col(0) = mean.values;
  table.col(1) = mean.values - stddev.values;
  table.col(2) = mean.values + stddev.values;
  table.col(3) = stddev.values;
  write_matrix_csv(out_path, table, {"mean", "lo", "hi", "std"}, grid_meta(*surr.grid));
  std::printf("UQ bands written to %s (M=%d)\n", out_path.c_str(), samples);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bifidelity KLE surrogate modeling with active learning"};
  app.require_subcommand(1);

  std::string config_path, out, policy, campaign_dir, design_path, grid_path, model,
      surrogate_dir, uq_out;
  long seed = -1;
  bool resume = false;
  int uq_samples = 2000;
  long uq_seed = 1;
  std::vector<std::string> snapshot_paths;

  auto* run = app.add_subcommand("run", "Run one campaign from a config file");
  run->add_option("--config", config_path, "flat key-value config file")->required();
  run->add_option("--out", out, "override the output directory");
  run->add_option("--seed", seed, "override the master seed");
  run->add_option("--policy", policy, "override the acquisition policy");
  run->add_flag("--resume", resume, "continue an interrupted campaign");

  auto* reps = app.add_subcommand("replicates", "Run replicated campaigns per policy");
  reps->add_option("--config", config_path, "flat key-value config file")->required();
  reps->add_option("--out", out, "override the output directory");
  reps->add_option("--seed", seed, "override the master seed");

  auto* ingest = app.add_subcommand("ingest", "Validate snapshots into a campaign bundle");
  ingest->add_option("--design", design_path, "design CSV with bounds metadata")->required();
  ingest->add_option("--grid", grid_path, "grid key-value file (optional)");
  ingest->add_option("--out", out, "bundle output directory")->required();
  ingest->add_option("snapshots", snapshot_paths, "snapshot CSV files")->required();

  auto* report = app.add_subcommand("report", "Emit plot-ready CSV data for a campaign");
  report->add_option("--campaign", campaign_dir, "campaign or replicates directory")
      ->required();
  report->add_option("--out", out, "report output directory");

  auto* models = app.add_subcommand("models", "Built-in model utilities");
  auto* eval = models->add_subcommand("eval", "Evaluate a built-in model over a design");
  eval->add_option("--model", model, "pulse_c{1,2}_{hf,lf} | convdiff_{hf,lf}")->required();
  eval->add_option("--design", design_path, "design CSV with bounds metadata")->required();
  eval->add_option("--out", out, "snapshot output directory")->required();

  auto* uq = app.add_subcommand("uq", "Propagate uncertainty through a saved surrogate");
  uq->add_option("--surrogate", surrogate_dir, "surrogate bundle directory")->required();
  uq->add_option("--out", uq_out, "output CSV path")->required();
  uq->add_option("--samples", uq_samples, "Monte Carlo sample count");
  uq->add_option("--seed", uq_seed, "Monte Carlo seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // command-line mistakes are config errors
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out, seed, policy, resume);
    if (reps->parsed()) return cmd_replicates(config_path, out, seed);
    if (ingest->parsed()) return cmd_ingest(design_path, grid_path, out, snapshot_paths);
    if (report->parsed()) return cmd_report(campaign_dir, out);
    if (models->parsed()) {
      if (!eval->parsed()) throw ConfigError("usage: bifikle models eval ...");
      return cmd_models_eval(model, design_path, out);
    }
    if (uq->parsed()) return cmd_uq(surrogate_dir, uq_out, uq_samples, uq_seed);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
