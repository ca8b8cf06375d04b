#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bifikle {

// Physical parameter box with the affine map to normalized [-1,1] space.
struct ParamBounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dims() const { return static_cast<int>(lo.size()); }
  Eigen::VectorXd to_normalized(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd to_physical(const Eigen::VectorXd& xi) const;
  bool contains(const Eigen::VectorXd& theta, double tol = 1e-12) const;
  void validate() const;  // finite, lo < hi per coordinate
};

// Sampling design in normalized [-1,1]^{n_s} space.
struct Design {
  Eigen::MatrixXd points;  // N x n_s
  std::string kind;        // lhs | random | subset
  std::uint64_t seed = 0;
};

// One center-perturbed sample per equal-width stratum and coordinate.
Design latin_hypercube(int n, int dims, std::uint64_t seed);

// I.i.d. uniform on [-1,1]^dims.
Design random_design(int n, int dims, std::uint64_t seed);

// Greedy maximin selection: seed with the point nearest the centroid, then
// repeatedly add the parent point with the largest minimum distance to the
// chosen set. Deterministic (lowest index wins ties).
std::vector<int> maximin_subset(const Eigen::MatrixXd& parent, int m);

void write_design_csv(const std::filesystem::path& path, const Design& design,
                      const ParamBounds& bounds);
std::pair<Design, ParamBounds> read_design_csv(const std::filesystem::path& path);

}  // namespace bifikle
