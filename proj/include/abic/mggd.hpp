#pragma once

// Multivariate generalized Gaussian (power-exponential) distribution.
//
//   f(x) = Γ(p/2) / (π^{p/2} Γ(p/(2β))) · β / (2^{p/(2β)} |Σ|^{1/2})
//          · exp(-½ ((x-μ)ᵀ Σ⁻¹ (x-μ))^β)
//
// β = 1 is the multivariate normal. Σ is a dispersion matrix; the covariance
// is c·Σ with c = dispersion_to_covariance_scale(p, β).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "abic/errors.hpp"

namespace abic::mggd {

struct MggdParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double beta = 1.0;

  static MggdParams standard(Eigen::Index p, double beta = 1.0) {
    return {Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p), beta};
  }
  Eigen::Index dim() const { return mu.size(); }
};

namespace detail {

inline void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) throw ParameterError(std::string(what) + " must be square");
  if (!m.allFinite()) throw ParameterError(std::string(what) + " has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ParameterError(std::string(what) + " is not symmetric");
}

/// Validates params and returns the lower Cholesky factor of sigma.
inline Eigen::MatrixXd validated_factor(const MggdParams& params) {
  if (!(params.beta > 0.0) || !std::isfinite(params.beta))
    throw ParameterError("shape parameter beta must be finite and > 0");
  if (params.sigma.rows() != params.mu.size())
    throw ParameterError("mu and sigma dimensions disagree");
  if (params.mu.size() == 0) throw ParameterError("dimension must be >= 1");
  if (!params.mu.allFinite()) throw ParameterError("mu has non-finite entries");
  check_symmetric(params.sigma, "sigma");
  Eigen::LLT<Eigen::MatrixXd> llt(params.sigma);
  if (llt.info() != Eigen::Success) throw ParameterError("sigma is not positive definite");
  Eigen::MatrixXd factor = llt.matrixL();
  if ((factor.diagonal().array() <= 0.0).any())
    throw ParameterError("sigma is not positive definite");
  return factor;
}

inline double log_normalizer(double p, double beta, double log_det) {
  return std::lgamma(p / 2.0) - (p / 2.0) * std::log(std::numbers::pi) -
         std::lgamma(p / (2.0 * beta)) + std::log(beta) - (p / (2.0 * beta)) * std::numbers::ln2 -
         0.5 * log_det;
}

inline double log_kurtosis(double beta) {
  return std::lgamma(5.0 / (2.0 * beta)) + std::lgamma(1.0 / (2.0 * beta)) -
         2.0 * std::lgamma(3.0 / (2.0 * beta));
}

}  // namespace detail

inline void validate(const MggdParams& params) { (void)detail::validated_factor(params); }

inline double log_density(const Eigen::Ref<const Eigen::VectorXd>& x, const MggdParams& params) {
  const Eigen::MatrixXd factor = detail::validated_factor(params);
  if (x.size() != params.dim()) throw ParameterError("x dimension disagrees with params");
  if (!x.allFinite()) throw ParameterError("x has non-finite entries");
  const double log_det = 2.0 * factor.diagonal().array().log().sum();
  const Eigen::VectorXd w =
      factor.triangularView<Eigen::Lower>().solve(Eigen::VectorXd(x - params.mu));
  const double quad = w.squaredNorm();
  return detail::log_normalizer(static_cast<double>(params.dim()), params.beta, log_det) -
         0.5 * std::pow(quad, params.beta);
}

/// Sum of log_density over the rows of X.
inline double log_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& X, const MggdParams& params) {
  const Eigen::MatrixXd factor = detail::validated_factor(params);
  if (X.rows() < 1) throw ParameterError("log_likelihood needs at least one row");
  if (X.cols() != params.dim()) throw ParameterError("X columns disagree with params");
  const double log_det = 2.0 * factor.diagonal().array().log().sum();
  const double constant =
      detail::log_normalizer(static_cast<double>(params.dim()), params.beta, log_det);
  Eigen::MatrixXd centered = (X.rowwise() - params.mu.transpose()).transpose();
  factor.triangularView<Eigen::Lower>().solveInPlace(centered);
  double total = 0.0;
  for (Eigen::Index l = 0; l < centered.cols(); ++l)
    total += constant - 0.5 * std::pow(centered.col(l).squaredNorm(), params.beta);
  return total;
}

/// Covariance = c · Σ for an MGGD of dimension p and shape beta.
inline double dispersion_to_covariance_scale(double p, double beta) {
  return std::exp(std::numbers::ln2 / beta + std::lgamma((p + 2.0) / (2.0 * beta)) -
                  std::log(p) - std::lgamma(p / (2.0 * beta)));
}

/// Draws n i.i.d. rows via X = μ + R·L·U with U uniform on the sphere,
/// T ~ Gamma(p/(2β), scale 2) and R = T^{1/(2β)}.
inline Eigen::MatrixXd sample(Eigen::Index n, const MggdParams& params, std::uint64_t seed) {
  const Eigen::MatrixXd factor = detail::validated_factor(params);
  const Eigen::Index p = params.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> radial(static_cast<double>(p) / (2.0 * params.beta), 2.0);

  Eigen::MatrixXd out(n, p);
  Eigen::VectorXd u(p);
  for (Eigen::Index l = 0; l < n; ++l) {
    double norm = 0.0;
    do {
      for (Eigen::Index k = 0; k < p; ++k) u(k) = normal(rng);
      norm = u.norm();
    } while (norm == 0.0);
    u /= norm;
    const double r = std::pow(radial(rng), 1.0 / (2.0 * params.beta));
    out.row(l) = (params.mu + r * (factor * u)).transpose();
  }
  return out;
}

/// Univariate kurtosis E[x⁴]/E[x²]² of the generalized normal with shape beta.
inline double kurtosis(double beta) {
  if (!(beta > 0.0)) throw ParameterError("beta must be > 0");
  return std::exp(detail::log_kurtosis(beta));
}

inline constexpr double kBetaFloor = 0.2;
inline constexpr double kBetaCap = 20.0;

/// Inverts kurtosis() on [kBetaFloor, kBetaCap]; values outside the
/// attainable kurtosis range map to the nearer end.
inline double beta_from_kurtosis(double kurt) {
  const double lo_kurt = kurtosis(kBetaCap);
  const double hi_kurt = kurtosis(kBetaFloor);
  if (!(kurt > lo_kurt)) return kBetaCap;
  if (!(kurt < hi_kurt)) return kBetaFloor;
  const double target = std::log(kurt);
  double lo = kBetaFloor;  // kurtosis decreasing in beta
  double hi = kBetaCap;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::log_kurtosis(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Moment-matching estimate of beta from one variable's sample kurtosis.
inline double estimate_beta(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() < 20) throw EstimationError("estimate_beta needs at least 20 observations");
  if (!x.allFinite()) throw EstimationError("estimate_beta input has non-finite values");
  const Eigen::ArrayXd centered = x.array() - x.mean();
  const double m2 = centered.square().mean();
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  if (!(m2 > 1e-24 * scale * scale)) throw EstimationError("estimate_beta input is constant");
  const double m4 = centered.square().square().mean();
  return beta_from_kurtosis(m4 / (m2 * m2));
}

struct DatasetBeta {
  double beta = 1.0;
  /// NaN marks a column whose estimation failed.
  std::vector<double> per_column;
};

/// Per-column estimates and their maximum; failed columns are skipped.
inline DatasetBeta estimate_beta_dataset(const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() < 1) throw EstimationError("dataset has no columns");
  DatasetBeta out;
  out.per_column.resize(static_cast<std::size_t>(X.cols()),
                        std::numeric_limits<double>::quiet_NaN());
  bool any = false;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    try {
      const double b = estimate_beta(X.col(c));
      out.per_column[static_cast<std::size_t>(c)] = b;
      best = std::max(best, b);
      any = true;
    } catch (const EstimationError&) {
    }
  }
  if (!any) throw EstimationError("beta estimation failed for every column");
  out.beta = best;
  return out;
}

}  // namespace abic::mggd
