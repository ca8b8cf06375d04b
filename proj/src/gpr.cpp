#include "bifikle/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "bifikle/common.hpp"
#include "bifikle/io.hpp"

namespace bifikle {

namespace {

constexpr double kJitter = 1e-10;
constexpr double kSqrt5 = 2.2360679774997896;

double matern52_from_r(double r, double signal_variance) {
  return signal_variance * (1.0 + kSqrt5 * r + 5.0 * r * r / 3.0) * std::exp(-kSqrt5 * r);
}

double scaled_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& ls) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double d = (x(i) - y(i)) / ls(i);
    sum += d * d;
  }
  return std::sqrt(sum);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const GpHyper& h) {
  const Eigen::Index m = x.rows();
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    k(i, i) = h.signal_variance + h.nugget + kJitter;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double r = scaled_distance(x.row(i).transpose(), x.row(j).transpose(), h.length_scales);
      k(i, j) = k(j, i) = matern52_from_r(r, h.signal_variance);
    }
  }
  return k;
}

// Smooth box reparameterization: p = lo * (hi/lo)^sigmoid(z), unconstrained z.
double to_bounded(double z, double lo, double hi) {
  double s = 1.0 / (1.0 + std::exp(-z));
  return lo * std::pow(hi / lo, s);
}

double to_unbounded(double p, double lo, double hi) {
  double s = std::log(p / lo) / std::log(hi / lo);
  s = std::min(1.0 - 1e-9, std::max(1e-9, s));
  return std::log(s / (1.0 - s));
}

// Standard Nelder-Mead; deterministic, returns best vertex.
std::pair<Eigen::VectorXd, double> nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
    double step, int max_iter) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> fs(static_cast<std::size_t>(n + 1));
  for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i + 1)](i) += step;
  for (int i = 0; i <= n; ++i) fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);

  auto order = [&] {
    std::vector<int> idx(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return fs[static_cast<std::size_t>(a)] < fs[static_cast<std::size_t>(b)]; });
    std::vector<Eigen::VectorXd> xs2;
    std::vector<double> fs2;
    for (int i : idx) {
      xs2.push_back(xs[static_cast<std::size_t>(i)]);
      fs2.push_back(fs[static_cast<std::size_t>(i)]);
    }
    xs = std::move(xs2);
    fs = std::move(fs2);
  };

  order();
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(fs.back() - fs.front()) <= 1e-10 * (1.0 + std::abs(fs.front()))) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[static_cast<std::size_t>(i)];
    centroid /= n;

    Eigen::VectorXd xr = centroid + (centroid - xs.back());
    double fr = f(xr);
    if (fr < fs.front()) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs.back());
      double fe = f(xe);
      if (fe < fr) {
        xs.back() = xe;
        fs.back() = fe;
      } else {
        xs.back() = xr;
        fs.back() = fr;
      }
    } else if (fr < fs[static_cast<std::size_t>(n - 1)]) {
      xs.back() = xr;
      fs.back() = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (xs.back() - centroid);
      double fc = f(xc);
      if (fc < fs.back()) {
        xs.back() = xc;
        fs.back() = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          xs[static_cast<std::size_t>(i)] =
              xs.front() + 0.5 * (xs[static_cast<std::size_t>(i)] - xs.front());
          fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);
        }
      }
    }
    order();
  }
  return {xs.front(), fs.front()};
}

}  // namespace

double matern52(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const GpHyper& hyper) {
  if (x.size() != y.size()) throw InvalidArgument("matern52 inputs must share a dimension");
  return matern52_from_r(scaled_distance(x, y, hyper.length_scales), hyper.signal_variance);
}

void GpModel::factorize() {
  Eigen::MatrixXd k = kernel_matrix(inputs_, hyper_);
  llt_.compute(k);
  if (llt_.info() != Eigen::Success)
    throw NumericalError("GP kernel matrix factorization failed");
  alpha_ = llt_.solve(targets_std_);
  const Eigen::Index m = inputs_.rows();
  double logdet = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  loglik_ = -0.5 * targets_std_.dot(alpha_) - 0.5 * logdet -
            0.5 * static_cast<double>(m) * std::log(2.0 * M_PI);
}

GpModel GpModel::fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                     const GpConfig& config) {
  if (inputs.rows() != targets.size()) throw InvalidArgument("GP input/target count mismatch");
  if (inputs.rows() < 2) throw InsufficientData("GP fit needs at least 2 points");
  if (!targets.allFinite()) throw InvalidArgument("GP targets must be finite");

  const int m = static_cast<int>(inputs.rows());
  const int d = static_cast<int>(inputs.cols());

  Eigen::VectorXd y = targets;
  if (config.log_targets) y = (targets.array().max(0.0) + 1e-12).log().matrix();

  const double shift = y.mean();
  double scale = m > 1 ? std::sqrt((y.array() - shift).square().sum() / (m - 1)) : 1.0;
  if (!(scale > 0.0)) scale = 1.0;
  Eigen::VectorXd y_std = (y.array() - shift) / scale;

  // Optimization variables: z for [length_scales..., signal_variance, nugget].
  const int nv = d + 2;
  auto unpack = [&](const Eigen::VectorXd& z) {
    GpHyper h;
    h.length_scales.resize(d);
    for (int i = 0; i < d; ++i) h.length_scales(i) = to_bounded(z(i), config.ls_lo, config.ls_hi);
    h.signal_variance = to_bounded(z(d), config.sv_lo, config.sv_hi);
    h.nugget = to_bounded(z(d + 1), config.ng_lo, config.ng_hi);
    return h;
  };

  auto neg_loglik = [&](const Eigen::VectorXd& z) -> double {
    GpHyper h = unpack(z);
    Eigen::MatrixXd k = kernel_matrix(inputs, h);
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    Eigen::VectorXd alpha = llt.solve(y_std);
    double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    double ll = -0.5 * y_std.dot(alpha) - 0.5 * logdet - 0.5 * m * std::log(2.0 * M_PI);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  // Start 0 is a moderate default; the rest come from a Halton sweep of the
  // box so the whole fit is deterministic.
  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd z0(nv);
    for (int i = 0; i < d; ++i) z0(i) = to_unbounded(1.0, config.ls_lo, config.ls_hi);
    z0(d) = to_unbounded(1.0, config.sv_lo, config.sv_hi);
    z0(d + 1) = to_unbounded(1e-4, config.ng_lo, config.ng_hi);
    starts.push_back(z0);
  }
  for (int s = 1; s < std::max(1, config.starts); ++s) {
    Eigen::VectorXd z(nv);
    for (int i = 0; i < nv; ++i) {
      double u = halton_radical_inverse(static_cast<std::uint64_t>(s), kHaltonPrimes[i % 12]);
      u = std::min(0.98, std::max(0.02, u));
      z(i) = std::log(u / (1.0 - u));
    }
    starts.push_back(z);
  }

  Eigen::VectorXd best_z = starts.front();
  double best_f = std::numeric_limits<double>::infinity();
  for (const auto& z0 : starts) {
    auto [z, fz] = nelder_mead(neg_loglik, z0, 0.6, 220);
    if (fz < best_f) {
      best_f = fz;
      best_z = z;
    }
  }

  GpModel model;
  model.inputs_ = inputs;
  model.targets_std_ = y_std;
  model.shift_ = shift;
  model.scale_ = scale;
  model.hyper_ = unpack(best_z);
  model.factorize();
  return model;
}

GpModel GpModel::condition(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                           const GpHyper& hyper) {
  if (inputs.rows() != targets.size()) throw InvalidArgument("GP input/target count mismatch");
  if (!targets.allFinite()) throw InvalidArgument("GP targets must be finite");
  GpModel model;
  model.inputs_ = inputs;
  model.shift_ = 0.0;
  model.scale_ = 1.0;
  model.targets_std_ = targets;
  model.hyper_ = hyper;
  model.factorize();
  return model;
}

GpModel GpModel::augmented(const Eigen::VectorXd& x, double target) const {
  GpModel model;
  const Eigen::Index m = inputs_.rows();
  model.inputs_.resize(m + 1, inputs_.cols());
  model.inputs_.topRows(m) = inputs_;
  model.inputs_.row(m) = x.transpose();
  model.targets_std_.resize(m + 1);
  model.targets_std_.head(m) = targets_std_;
  model.targets_std_(m) = (target - shift_) / scale_;
  model.shift_ = shift_;
  model.scale_ = scale_;
  model.hyper_ = hyper_;
  model.factorize();
  return model;
}

std::pair<double, double> GpModel::posterior(const Eigen::VectorXd& theta_star) const {
  if (theta_star.size() != inputs_.cols())
    throw InvalidArgument("posterior query dimension mismatch");
  const Eigen::Index m = inputs_.rows();
  Eigen::VectorXd k(m);
  for (Eigen::Index i = 0; i < m; ++i)
    k(i) = matern52_from_r(
        scaled_distance(inputs_.row(i).transpose(), theta_star, hyper_.length_scales),
        hyper_.signal_variance);
  double mean_std = k.dot(alpha_);
  Eigen::VectorXd v = llt_.matrixL().solve(k);
  double var_std = hyper_.signal_variance - v.squaredNorm();
  var_std = std::max(0.0, var_std);
  return {shift_ + scale_ * mean_std, scale_ * scale_ * var_std};
}

Eigen::VectorXd GpModel::raw_targets() const {
  return (targets_std_.array() * scale_ + shift_).matrix();
}

void save_gp_bundle(const std::filesystem::path& path, const GpModel& model) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("signal_variance", format_double(model.hyper().signal_variance));
  std::string ls;
  for (Eigen::Index i = 0; i < model.hyper().length_scales.size(); ++i) {
    if (i) ls += ' ';
    ls += format_double(model.hyper().length_scales(i));
  }
  meta.emplace_back("length_scales", ls);
  meta.emplace_back("nugget", format_double(model.hyper().nugget));
  meta.emplace_back("log_likelihood", format_double(model.log_likelihood()));
  meta.emplace_back("target_shift", format_double(model.target_shift()));
  meta.emplace_back("target_scale", format_double(model.target_scale()));

  Eigen::MatrixXd table(model.size(), model.inputs().cols() + 1);
  table.leftCols(model.inputs().cols()) = model.inputs();
  table.rightCols(1) = model.raw_targets();
  std::vector<std::string> columns;
  for (Eigen::Index j = 0; j < model.inputs().cols(); ++j)
    columns.push_back("xi" + std::to_string(j + 1));
  columns.push_back("error");
  write_matrix_csv(path, table, columns, meta);
}

}  // namespace bifikle
