#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "bifikle/kle.hpp"
#include "bifikle/models.hpp"

namespace bifikle {

// Snapshot bundle on disk: design.csv + grid.txt + snapshots.csv + manifest.
// The campaign input format emitted by `ingest` and consumed by external
// problems; re-ingesting an emitted bundle reproduces it byte for byte.
struct SnapshotBundle {
  SnapshotSet snaps;
  ParamBounds bounds;
};

void write_bundle(const std::filesystem::path& dir, const SnapshotSet& snaps,
                  const ParamBounds& bounds);
SnapshotBundle read_bundle(const std::filesystem::path& dir);

// A campaign problem: parameter box, per-QoI training grid, and HF/LF
// evaluators returning fields on the training grid (HF restricted for the
// two-grid PDE problem). External problems serve ingested snapshots only and
// raise AwaitingData at unseen parameters.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::string id() const = 0;
  virtual ParamBounds bounds() const = 0;
  virtual int qoi_count() const { return 1; }
  virtual GridPtr grid(int qoi) const = 0;
  virtual Field eval_lf(int qoi, const Eigen::VectorXd& theta) const = 0;
  virtual Field eval_hf(int qoi, const Eigen::VectorXd& theta) const = 0;
  virtual bool has_oracle() const { return true; }

  // External problems supply the pilot directly from their ingested bundles
  // (the HF design rows must match LF design rows exactly).
  virtual bool provides_pilot() const { return false; }
  virtual void pilot_data(Eigen::MatrixXd& lf_design, Eigen::MatrixXd& pair_design,
                          std::vector<Eigen::MatrixXd>& lf_fields,
                          std::vector<Eigen::MatrixXd>& hf_fields) const;
};

std::unique_ptr<Problem> make_pulse_problem(bool case2, bool series_replaces_sine = false);
std::unique_ptr<Problem> make_convdiff_problem(int hf_n, int lf_n);

struct ExternalQoiSource {
  std::string name;
  std::filesystem::path lf_bundle;
  std::filesystem::path hf_bundle;
};
std::unique_ptr<Problem> make_external_problem(const std::vector<ExternalQoiSource>& sources);

}  // namespace bifikle
