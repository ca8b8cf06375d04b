#include "bifikle/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "bifikle/common.hpp"

namespace bifikle {

namespace {

Eigen::MatrixXd halton_candidates(int count, int dims) {
  Eigen::MatrixXd c(count, dims);
  for (int i = 0; i < count; ++i)
    for (int d = 0; d < dims; ++d)
      c(i, d) = 2.0 * halton_radical_inverse(static_cast<std::uint64_t>(i + 1),
                                             kHaltonPrimes[d % 12]) -
                1.0;
  return c;
}

double min_distance(const Eigen::VectorXd& x, const Eigen::MatrixXd& points) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    best = std::min(best, (points.row(i).transpose() - x).norm());
  return best;
}

// Compass pattern search inside [-1,1]^d; only accepts strict improvements,
// so the polished value never falls below the starting candidate's.
Eigen::VectorXd pattern_search(const std::function<double(const Eigen::VectorXd&)>& score,
                               Eigen::VectorXd x, double step0 = 0.1, double step_min = 1e-5) {
  const int d = static_cast<int>(x.size());
  double fx = score(x);
  double step = step0;
  while (step >= step_min) {
    bool improved = false;
    for (int i = 0; i < d; ++i) {
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd y = x;
        y(i) = std::min(1.0, std::max(-1.0, y(i) + sgn * step));
        double fy = score(y);
        if (fy > fx) {
          x = y;
          fx = fy;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return x;
}

OptimumResult optimize_ei(const GpModel& model, double eps_star,
                          const Eigen::MatrixXd& avoid_points,
                          const AcquisitionConfig& config, bool minimize) {
  const int dims = static_cast<int>(model.inputs().cols());
  const double sign = minimize ? -1.0 : 1.0;
  auto score = [&](const Eigen::VectorXd& x) {
    return sign * expected_improvement(model, x, eps_star);
  };

  Eigen::MatrixXd cand = halton_candidates(config.candidates, dims);
  std::vector<std::pair<double, int>> scored(static_cast<std::size_t>(cand.rows()));
  for (int i = 0; i < cand.rows(); ++i)
    scored[static_cast<std::size_t>(i)] = {score(cand.row(i).transpose()), i};
  // Stable order keeps the first candidate on ties (flat landscapes).
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const bool flat = !minimize && scored.front().first < 1e-300;
  if (flat) {
    // EI carries no signal; fall back to the point of maximum posterior
    // variance, still honoring the separation rule.
    auto var_score = [&](const Eigen::VectorXd& x) { return model.posterior(x).second; };
    std::vector<std::pair<double, int>> var_scored(static_cast<std::size_t>(cand.rows()));
    for (int i = 0; i < cand.rows(); ++i)
      var_scored[static_cast<std::size_t>(i)] = {var_score(cand.row(i).transpose()), i};
    std::stable_sort(var_scored.begin(), var_scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [v, i] : var_scored) {
      Eigen::VectorXd x = pattern_search(var_score, cand.row(i).transpose());
      if (min_distance(x, avoid_points) >= config.min_separation)
        return {x, expected_improvement(model, x, eps_star), true};
    }
    return {cand.row(var_scored.front().second).transpose(),
            expected_improvement(model, cand.row(var_scored.front().second).transpose(),
                                 eps_star),
            true};
  }

  const int top = std::min<int>(config.refine_top, static_cast<int>(scored.size()));
  Eigen::VectorXd best_x;
  double best_s = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < top; ++r) {
    Eigen::VectorXd x = pattern_search(score, cand.row(scored[static_cast<std::size_t>(r)].second).transpose());
    double s = score(x);
    if (s > best_s && min_distance(x, avoid_points) >= config.min_separation) {
      best_s = s;
      best_x = x;
    }
  }
  if (best_x.size() == 0) {
    // Every refined leader landed on an existing point; walk the remaining
    // candidates in score order until one clears the separation rule.
    for (const auto& [s, i] : scored) {
      Eigen::VectorXd x = cand.row(i).transpose();
      if (min_distance(x, avoid_points) >= config.min_separation) {
        best_x = pattern_search(score, x);
        if (min_distance(best_x, avoid_points) < config.min_separation) best_x = x;
        break;
      }
    }
    if (best_x.size() == 0) best_x = cand.row(scored.front().second).transpose();
  }
  return {best_x, expected_improvement(model, best_x, eps_star), false};
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

double ei_closed_form(double mean, double sigma, double eps_star) {
  double delta = mean - eps_star;
  if (sigma < 1e-12) return std::max(delta, 0.0);
  double z = delta / sigma;
  double ei = delta * normal_cdf(z) + sigma * normal_pdf(z);
  return std::max(ei, 0.0);
}

double expected_improvement(const GpModel& model, const Eigen::VectorXd& theta,
                            double eps_star) {
  auto [mean, var] = model.posterior(theta);
  return ei_closed_form(mean, std::sqrt(std::max(0.0, var)), eps_star);
}

OptimumResult maximize_ei(const GpModel& model, double eps_star,
                          const Eigen::MatrixXd& avoid_points,
                          const AcquisitionConfig& config) {
  return optimize_ei(model, eps_star, avoid_points, config, false);
}

OptimumResult minimize_ei(const GpModel& model, double eps_star,
                          const Eigen::MatrixXd& avoid_points,
                          const AcquisitionConfig& config) {
  return optimize_ei(model, eps_star, avoid_points, config, true);
}

AcquisitionResult kriging_believer_batch(const GpModel& model, double eps_star, int q,
                                         const AcquisitionConfig& config, bool minimize) {
  if (q < 1) throw InvalidArgument("batch size must be >= 1");
  const int dims = static_cast<int>(model.inputs().cols());

  AcquisitionResult result;
  result.eps_star = eps_star;
  result.points.resize(q, dims);
  result.ei_values.resize(q);

  GpModel current = model;  // conditioning set grows, hyperparameters frozen
  double incumbent = eps_star;
  for (int b = 0; b < q; ++b) {
    Eigen::MatrixXd avoid(current.inputs().rows() + b, dims);
    avoid.topRows(current.inputs().rows()) = current.inputs();
    for (int j = 0; j < b; ++j) avoid.row(current.inputs().rows() + j) = result.points.row(j);

    OptimumResult pick = minimize ? minimize_ei(current, incumbent, avoid, config)
                                  : maximize_ei(current, incumbent, avoid, config);
    result.points.row(b) = pick.point.transpose();
    result.ei_values(b) = pick.ei;
    result.any_fallback = result.any_fallback || pick.variance_fallback;

    double believed = current.posterior(pick.point).first;
    result.believer_log.push_back({pick.point, pick.ei, incumbent, believed});
    if (b + 1 < q) {
      current = current.augmented(pick.point, believed);
      incumbent = std::max(incumbent, believed);
    }
  }
  return result;
}

}  // namespace bifikle
