#include "bifikle/problems.hpp"

#include <cmath>

#include "bifikle/common.hpp"
#include "bifikle/design.hpp"
#include "bifikle/io.hpp"

namespace bifikle {

void Problem::pilot_data(Eigen::MatrixXd&, Eigen::MatrixXd&, std::vector<Eigen::MatrixXd>&,
                         std::vector<Eigen::MatrixXd>&) const {
  throw InvalidArgument("problem does not provide pilot data");
}

void write_bundle(const std::filesystem::path& dir, const SnapshotSet& snaps,
                  const ParamBounds& bounds) {
  snaps.validate();
  std::filesystem::create_directories(dir);
  Design d{snaps.design, "subset", 0};
  write_design_csv(dir / "design.csv", d, bounds);
  KeyValueFile grid_kv;
  for (const auto& [k, v] : grid_meta(*snaps.grid)) grid_kv.set(k, v);
  grid_kv.write_file(dir / "grid.txt");
  std::vector<std::string> cols;
  for (int i = 0; i < snaps.samples(); ++i) cols.push_back("s" + std::to_string(i + 1));
  write_matrix_csv(dir / "snapshots.csv", snaps.values, cols);
  KeyValueFile manifest;
  manifest.set("tool_version", kToolVersion);
  manifest.set("design_hash", hash_hex(fnv1a64_file(dir / "design.csv")));
  manifest.set("grid_hash", hash_hex(fnv1a64_file(dir / "grid.txt")));
  manifest.set("snapshots_hash", hash_hex(fnv1a64_file(dir / "snapshots.csv")));
  manifest.write_file(dir / "manifest.txt");
}

SnapshotBundle read_bundle(const std::filesystem::path& dir) {
  SnapshotBundle bundle;
  auto [design, bounds] = read_design_csv(dir / "design.csv");
  bundle.bounds = bounds;
  KeyValueFile grid_kv = KeyValueFile::parse_file(dir / "grid.txt");
  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : grid_kv.entries()) meta[k] = v;
  bundle.snaps.grid = grid_from_meta(meta);
  bundle.snaps.design = design.points;
  bundle.snaps.values = read_matrix_csv(dir / "snapshots.csv").values;
  bundle.snaps.validate();
  return bundle;
}

namespace {

class PulseProblem final : public Problem {
 public:
  PulseProblem(bool case2, bool series_replaces_sine)
      : case2_(case2), series_replaces_sine_(series_replaces_sine), grid_(pulse_grid()) {}

  std::string id() const override { return case2_ ? "pulse_c2" : "pulse_c1"; }
  ParamBounds bounds() const override { return case2_ ? pulse_bounds_c2() : pulse_bounds_c1(); }
  GridPtr grid(int) const override { return grid_; }
  Field eval_lf(int, const Eigen::VectorXd& theta) const override {
    return case2_ ? pulse_lf_c2(grid_, theta(0), theta(1))
                  : pulse_lf_c1(grid_, theta(0), theta(1), series_replaces_sine_);
  }
  Field eval_hf(int, const Eigen::VectorXd& theta) const override {
    return pulse_hf(grid_, theta(0), theta(1));
  }

 private:
  bool case2_;
  bool series_replaces_sine_;
  GridPtr grid_;
};

class ConvDiffProblem final : public Problem {
 public:
  ConvDiffProblem(int hf_n, int lf_n)
      : hf_(convdiff_fidelity(hf_n)), lf_(convdiff_fidelity(lf_n)),
        lf_grid_(make_uniform_grid_2d(lf_n, lf_n)) {
    if (hf_n % lf_n != 0)
      throw InvalidArgument("HF extent must be an integer multiple of the LF extent");
  }

  std::string id() const override { return "convdiff"; }
  ParamBounds bounds() const override { return convdiff_bounds(); }
  GridPtr grid(int) const override { return lf_grid_; }
  Field eval_lf(int, const Eigen::VectorXd& theta) const override {
    Field f = convdiff_solve(params(theta), lf_);
    return {lf_grid_, f.values};
  }
  Field eval_hf(int, const Eigen::VectorXd& theta) const override {
    Field fine = convdiff_solve(params(theta), hf_);
    return restrict_field(fine, lf_grid_);
  }

 private:
  static ConvDiffParams params(const Eigen::VectorXd& theta) {
    return {theta(0), theta(1), theta(2), theta(3)};
  }
  ConvDiffFidelity hf_, lf_;
  GridPtr lf_grid_;
};

class ExternalProblem final : public Problem {
 public:
  explicit ExternalProblem(const std::vector<ExternalQoiSource>& sources) {
    if (sources.empty()) throw ConfigError("external problem needs at least one QoI bundle");
    for (const auto& s : sources) {
      names_.push_back(s.name);
      lf_.push_back(read_bundle(s.lf_bundle));
      hf_.push_back(read_bundle(s.hf_bundle));
      if (!same_grid(*lf_.back().snaps.grid, *hf_.back().snaps.grid))
        throw IncompatibleGrids("external LF and HF bundles must share a grid (restrict first)");
    }
    bounds_ = lf_.front().bounds;
    for (const auto& b : lf_)
      if ((b.bounds.lo - bounds_.lo).cwiseAbs().maxCoeff() > 0 ||
          (b.bounds.hi - bounds_.hi).cwiseAbs().maxCoeff() > 0)
        throw PairingError("external QoI bundles disagree on parameter bounds");
  }

  std::string id() const override { return "external"; }
  ParamBounds bounds() const override { return bounds_; }
  int qoi_count() const override { return static_cast<int>(lf_.size()); }
  GridPtr grid(int qoi) const override { return lf_[static_cast<std::size_t>(qoi)].snaps.grid; }
  bool has_oracle() const override { return false; }

  Field eval_lf(int qoi, const Eigen::VectorXd& theta) const override {
    return lookup(lf_[static_cast<std::size_t>(qoi)], theta, "LF");
  }
  Field eval_hf(int qoi, const Eigen::VectorXd& theta) const override {
    return lookup(hf_[static_cast<std::size_t>(qoi)], theta, "HF");
  }

  bool provides_pilot() const override { return true; }

  void pilot_data(Eigen::MatrixXd& lf_design, Eigen::MatrixXd& pair_design,
                  std::vector<Eigen::MatrixXd>& lf_fields,
                  std::vector<Eigen::MatrixXd>& hf_fields) const override {
    lf_design = lf_.front().snaps.design;
    pair_design = hf_.front().snaps.design;
    lf_fields.clear();
    hf_fields.clear();
    for (std::size_t q = 0; q < lf_.size(); ++q) {
      if (lf_[q].snaps.design.rows() != lf_design.rows() || lf_[q].snaps.design != lf_design)
        throw PairingError("external QoI bundles disagree on the LF design");
      if (hf_[q].snaps.design.rows() != pair_design.rows() ||
          hf_[q].snaps.design != pair_design)
        throw PairingError("external QoI bundles disagree on the paired HF design");
      lf_fields.push_back(lf_[q].snaps.values);
      hf_fields.push_back(hf_[q].snaps.values);
    }
    for (Eigen::Index i = 0; i < pair_design.rows(); ++i) {
      bool found = false;
      for (Eigen::Index r = 0; r < lf_design.rows() && !found; ++r)
        found = lf_design.row(r) == pair_design.row(i);
      if (!found)
        throw PairingError("paired HF design row " + std::to_string(i) +
                           " has no exact match in the LF design");
    }
  }

 private:
  Field lookup(const SnapshotBundle& bundle, const Eigen::VectorXd& theta,
               const char* kind) const {
    Eigen::VectorXd xi = bounds_.to_normalized(theta);
    for (Eigen::Index r = 0; r < bundle.snaps.design.rows(); ++r) {
      if ((bundle.snaps.design.row(r).transpose() - xi).cwiseAbs().maxCoeff() < 1e-9)
        return {bundle.snaps.grid, bundle.snaps.values.col(r)};
    }
    throw AwaitingData(std::string(kind) +
                       " snapshot not ingested yet for the requested parameters");
  }

  std::vector<std::string> names_;
  std::vector<SnapshotBundle> lf_, hf_;
  ParamBounds bounds_;
};

}  // namespace

std::unique_ptr<Problem> make_pulse_problem(bool case2, bool series_replaces_sine) {
  return std::make_unique<PulseProblem>(case2, series_replaces_sine);
}

std::unique_ptr<Problem> make_convdiff_problem(int hf_n, int lf_n) {
  return std::make_unique<ConvDiffProblem>(hf_n, lf_n);
}

std::unique_ptr<Problem> make_external_problem(const std::vector<ExternalQoiSource>& sources) {
  return std::make_unique<ExternalProblem>(sources);
}

}  // namespace bifikle
