#pragma once

// Residuals, pseudo-variables and the scores built on them.
//
// For target i, with ε = X - Xδ and Z⁽ⁱ⁾ the pseudo-variables
// (Z⁽ⁱ⁾_{·,i} = 0, Z⁽ⁱ⁾_{·,-i} = ε_{-i} Ω_{-i,-i}⁻ᵀ), the regression residual is
//   r_i = X_{·,i} - X δ_{·,i} - Z⁽ⁱ⁾ Ω_{·,i}
// and the β-powered least-squares score is LS = (1/2n) Σ_i ‖r_i‖^{2β}.
// Z is held fixed while θ varies inside one primal solve.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "abic/errors.hpp"
#include "abic/graph.hpp"

namespace abic {

struct Residuals {
  Eigen::MatrixXd eps;  ///< eps(·, i) = X(·, i) - X·delta(·, i)
};

/// Z for one target; column `target` is identically zero.
struct PseudoVariables {
  Eigen::Index target = 0;
  Eigen::MatrixXd z;
};

inline Residuals residuals(const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::MatrixXd>& delta) {
  if (delta.rows() != X.cols() || delta.cols() != X.cols())
    throw ParameterError("delta must be d×d with d = columns of X");
  if (delta.diagonal().cwiseAbs().maxCoeff() != 0.0)
    throw ParameterError("delta must have a zero diagonal");
  return {X - X * delta};
}

namespace detail {

/// Indices 0..d-1 except `skip`.
inline std::vector<Eigen::Index> complement(Eigen::Index d, Eigen::Index skip) {
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(d - 1));
  for (Eigen::Index k = 0; k < d; ++k)
    if (k != skip) out.push_back(k);
  return out;
}

}  // namespace detail

/// Z⁽ⁱ⁾_{·,-i} = ε_{-i} Ω_{-i,-i}⁻ᵀ via a linear solve.
inline PseudoVariables pseudo_variables(const Residuals& residual, const Eigen::MatrixXd& omega,
                                        Eigen::Index i) {
  const Eigen::Index d = residual.eps.cols();
  if (omega.rows() != d || omega.cols() != d) throw ParameterError("omega must be d×d");
  if (i < 0 || i >= d) throw ParameterError("target index out of range");
  PseudoVariables out{i, Eigen::MatrixXd::Zero(residual.eps.rows(), d)};
  if (d == 1) return out;
  const auto rest = detail::complement(d, i);
  const Eigen::MatrixXd block = omega(rest, rest);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(block);
  const double scale = block.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !(lu.rcond() > 1e-13))
    throw NumericError("Omega_{-i,-i} is singular for target index " + std::to_string(i));
  const Eigen::MatrixXd eps_rest = residual.eps(Eigen::all, rest);
  // Z Ωᵀ = ε  <=>  Ω Zᵀ = εᵀ
  const Eigen::MatrixXd zt = lu.solve(eps_rest.transpose());
  out.z(Eigen::all, rest) = zt.transpose();
  return out;
}

inline std::vector<PseudoVariables> all_pseudo_variables(const Residuals& residual,
                                                         const Eigen::MatrixXd& omega) {
  std::vector<PseudoVariables> out;
  out.reserve(static_cast<std::size_t>(residual.eps.cols()));
  for (Eigen::Index i = 0; i < residual.eps.cols(); ++i)
    out.push_back(pseudo_variables(residual, omega, i));
  return out;
}

/// (r²)^β with r² below 1e-300 contributing 0.
inline double powered(double squared, double beta) {
  return squared < 1e-300 ? 0.0 : std::pow(squared, beta);
}

/// LS(θ) with Z frozen; value and analytic gradient.
class LeastSquaresScore {
 public:
  LeastSquaresScore(Eigen::MatrixXd X, double beta, std::vector<PseudoVariables> z)
      : x_(std::move(X)), beta_(beta), z_(std::move(z)) {
    if (!(beta_ >= 1.0)) throw ParameterError("the least-squares score requires beta >= 1");
    if (static_cast<Eigen::Index>(z_.size()) != x_.cols())
      throw ParameterError("one pseudo-variable set per column is required");
  }

  /// Z computed from θ itself.
  static LeastSquaresScore at(const Eigen::MatrixXd& X, double beta, const Parameters& theta) {
    return {X, beta, all_pseudo_variables(residuals(X, theta.delta), theta.omega)};
  }

  Eigen::VectorXd target_residual(const Parameters& theta, Eigen::Index i) const {
    return x_.col(i) - x_ * theta.delta.col(i) - z_[static_cast<std::size_t>(i)].z * theta.omega.col(i);
  }

  double value(const Parameters& theta) const {
    check(theta);
    double total = 0.0;
    for (Eigen::Index i = 0; i < x_.cols(); ++i)
      total += powered(target_residual(theta, i).squaredNorm(), beta_);
    return total / (2.0 * static_cast<double>(x_.rows()));
  }

  /// Gradient; omega off-diagonals use the symmetric-parameter convention.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gradient(const Parameters& theta) const {
    check(theta);
    const Eigen::Index d = x_.cols();
    const double n = static_cast<double>(x_.rows());
    Eigen::MatrixXd g_delta = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd g_raw = Eigen::MatrixXd::Zero(d, d);  // w.r.t. Ω(k, i) as used by target i
    for (Eigen::Index i = 0; i < d; ++i) {
      const Eigen::VectorXd r = target_residual(theta, i);
      const double sq = r.squaredNorm();
      if (sq < 1e-300) continue;
      const double weight = -beta_ * std::pow(sq, beta_ - 1.0) / n;
      g_delta.col(i) = weight * (x_.transpose() * r);
      g_raw.col(i) = weight * (z_[static_cast<std::size_t>(i)].z.transpose() * r);
    }
    g_delta.diagonal().setZero();
    Eigen::MatrixXd g_omega = g_raw + g_raw.transpose();
    g_omega.diagonal().setZero();
    return {std::move(g_delta), std::move(g_omega)};
  }

  double beta() const { return beta_; }
  const Eigen::MatrixXd& data() const { return x_; }
  const std::vector<PseudoVariables>& pseudo() const { return z_; }

 private:
  void check(const Parameters& theta) const {
    if (theta.dim() != x_.cols()) throw ParameterError("parameter dimension disagrees with data");
  }

  Eigen::MatrixXd x_;
  double beta_;
  std::vector<PseudoVariables> z_;
};

/// The plain Gaussian least-squares score (1/2n) Σ_i ‖r_i‖², β absent.
class GaussianLeastSquaresScore {
 public:
  GaussianLeastSquaresScore(Eigen::MatrixXd X, std::vector<PseudoVariables> z)
      : x_(std::move(X)), z_(std::move(z)) {}

  static GaussianLeastSquaresScore at(const Eigen::MatrixXd& X, const Parameters& theta) {
    return {X, all_pseudo_variables(residuals(X, theta.delta), theta.omega)};
  }

  double value(const Parameters& theta) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x_.cols(); ++i) total += residual(theta, i).squaredNorm();
    return total / (2.0 * static_cast<double>(x_.rows()));
  }

  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gradient(const Parameters& theta) const {
    const Eigen::Index d = x_.cols();
    const double n = static_cast<double>(x_.rows());
    Eigen::MatrixXd g_delta = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd g_raw = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const Eigen::VectorXd r = residual(theta, i);
      g_delta.col(i) = (-1.0 / n) * (x_.transpose() * r);
      g_raw.col(i) = (-1.0 / n) * (z_[static_cast<std::size_t>(i)].z.transpose() * r);
    }
    g_delta.diagonal().setZero();
    Eigen::MatrixXd g_omega = g_raw + g_raw.transpose();
    g_omega.diagonal().setZero();
    return {std::move(g_delta), std::move(g_omega)};
  }

 private:
  Eigen::VectorXd residual(const Parameters& theta, Eigen::Index i) const {
    return x_.col(i) - x_ * theta.delta.col(i) - z_[static_cast<std::size_t>(i)].z * theta.omega.col(i);
  }

  Eigen::MatrixXd x_;
  std::vector<PseudoVariables> z_;
};

inline double ls_objective(const Parameters& theta, const Eigen::MatrixXd& X, double beta) {
  return LeastSquaresScore::at(X, beta, theta).value(theta);
}

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> ls_gradient(const Parameters& theta,
                                                                const Eigen::MatrixXd& X,
                                                                double beta) {
  return LeastSquaresScore::at(X, beta, theta).gradient(theta);
}

/// λ Σ tanh(ln(n)·|θ_k|) over delta and the off-diagonal omega parameters
/// (each symmetric pair counted once).
inline double penalty_tanh(const Parameters& theta, double lambda, Eigen::Index n) {
  if (n < 2) throw ParameterError("penalty_tanh needs n >= 2");
  if (lambda == 0.0) return 0.0;
  const double c = std::log(static_cast<double>(n));
  const Eigen::Index d = theta.dim();
  double total = 0.0;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i == j) continue;
      total += std::tanh(c * std::abs(theta.delta(j, i)));
      if (j < i) total += std::tanh(c * std::abs(theta.omega(j, i)));
    }
  return lambda * total;
}

/// Subgradient of penalty_tanh (zero at zero entries).
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> penalty_tanh_gradient(const Parameters& theta,
                                                                          double lambda,
                                                                          Eigen::Index n) {
  const Eigen::Index d = theta.dim();
  Eigen::MatrixXd g_delta = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd g_omega = Eigen::MatrixXd::Zero(d, d);
  if (lambda == 0.0) return {g_delta, g_omega};
  const double c = std::log(static_cast<double>(n));
  auto slope = [&](double v) {
    if (v == 0.0) return 0.0;
    const double t = std::tanh(c * std::abs(v));
    return lambda * c * (1.0 - t * t) * (v > 0.0 ? 1.0 : -1.0);
  };
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i == j) continue;
      g_delta(j, i) = slope(theta.delta(j, i));
      g_omega(j, i) = slope(theta.omega(j, i));
    }
  return {g_delta, g_omega};
}

// --- Likelihood decomposition -------------------------------------------------

namespace detail {

inline double log_det_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericError(std::string(what) + " is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  return 2.0 * l.diagonal().array().log().sum();
}

}  // namespace detail

/// -(N/2) log|Ω| - ½ Σ_l (ε⁽ˡ⁾ᵀ Ω⁻¹ ε⁽ˡ⁾)^β, the log-likelihood core in terms of the errors.
inline double error_loglik(const Parameters& theta, const Eigen::MatrixXd& X, double beta) {
  if (!(beta > 0.0)) throw ParameterError("beta must be > 0");
  const Residuals r = residuals(X, theta.delta);
  const double n = static_cast<double>(X.rows());
  const double log_det = detail::log_det_spd(theta.omega, "Omega");
  Eigen::LLT<Eigen::MatrixXd> llt(theta.omega);
  const Eigen::MatrixXd w = llt.matrixL().solve(r.eps.transpose());
  double total = -0.5 * n * log_det;
  for (Eigen::Index l = 0; l < w.cols(); ++l) total -= 0.5 * std::pow(w.col(l).squaredNorm(), beta);
  return total;
}

/// Conditional variance Ω_{ii.-i} = Ω_ii - Ω_{i,-i} Ω_{-i,-i}⁻¹ Ω_{-i,i}.
inline double conditional_variance(const Eigen::MatrixXd& omega, Eigen::Index i) {
  const Eigen::Index d = omega.rows();
  if (d == 1) return omega(0, 0);
  const auto rest = detail::complement(d, i);
  const Eigen::MatrixXd block = omega(rest, rest);
  const Eigen::VectorXd cross = omega(rest, i);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(block);
  if (!(lu.rcond() > 1e-13))
    throw NumericError("Omega_{-i,-i} is singular for target index " + std::to_string(i));
  return omega(i, i) - cross.dot(lu.solve(cross));
}

/// The same log-likelihood core written through the split of ε into
/// (ε_i | ε_{-i}) and ε_{-i}; equal to error_loglik for every target i.
inline double decomposed_loglik(const Parameters& theta, const Eigen::MatrixXd& X, double beta,
                                Eigen::Index i) {
  if (!(beta > 0.0)) throw ParameterError("beta must be > 0");
  const Eigen::Index d = theta.dim();
  if (i < 0 || i >= d) throw ParameterError("target index out of range");
  const Residuals r = residuals(X, theta.delta);
  const double n = static_cast<double>(X.rows());
  const double cond = conditional_variance(theta.omega, i);
  if (!(cond > 0.0)) throw NumericError("conditional variance is not positive");

  if (d == 1) {
    double total = -0.5 * n * std::log(cond);
    for (Eigen::Index l = 0; l < r.eps.rows(); ++l)
      total -= 0.5 * std::pow(r.eps(l, 0) * r.eps(l, 0) / cond, beta);
    return total;
  }
  const auto rest = detail::complement(d, i);
  const Eigen::MatrixXd block = theta.omega(rest, rest);
  const double log_det_rest = detail::log_det_spd(block, "Omega_{-i,-i}");
  Eigen::LLT<Eigen::MatrixXd> llt(block);
  const Eigen::MatrixXd eps_rest = r.eps(Eigen::all, rest);
  const Eigen::MatrixXd z = llt.solve(eps_rest.transpose());  // Ω_{-i,-i}⁻¹ ε_{-i}, one column per row l
  const Eigen::RowVectorXd cross = theta.omega(i, rest);

  double total = -0.5 * n * std::log(cond) - 0.5 * n * log_det_rest;
  for (Eigen::Index l = 0; l < r.eps.rows(); ++l) {
    const double dev = r.eps(l, i) - cross.dot(z.col(l));
    const double marginal = eps_rest.row(l).dot(z.col(l));
    total -= 0.5 * std::pow(dev * dev / cond + marginal, beta);
  }
  return total;
}

/// Fixed-marginal objective for target i: the marginal of ε_{-i} is frozen
/// and only the conditional part is kept,
///   -(N/2) log Ω_{ii.-i} - 1/(2 Ω_{ii.-i}^β) Σ_l ((ε_i - Ω_{i,-i} Z_{-i})²)^β.
inline double conditional_loglik(const Parameters& theta, const Eigen::MatrixXd& X, double beta,
                                 Eigen::Index i) {
  const Eigen::Index d = theta.dim();
  const Residuals r = residuals(X, theta.delta);
  const double n = static_cast<double>(X.rows());
  const double cond = conditional_variance(theta.omega, i);
  const PseudoVariables z = pseudo_variables(r, theta.omega, i);
  double sum = 0.0;
  for (Eigen::Index l = 0; l < r.eps.rows(); ++l) {
    double dev = r.eps(l, i);
    for (Eigen::Index k = 0; k < d; ++k)
      if (k != i) dev -= theta.omega(i, k) * z.z(l, k);
    sum += powered(dev * dev, beta);
  }
  return -0.5 * n * std::log(cond) - sum / (2.0 * std::pow(cond, beta));
}

/// Hölder surrogate of conditional_loglik: the sum of powers is replaced by
/// (Σ r²)^β / N^{β-1}. For β >= 1 this is an upper bound.
inline double conditional_loglik_holder(const Parameters& theta, const Eigen::MatrixXd& X,
                                        double beta, Eigen::Index i) {
  const Eigen::Index d = theta.dim();
  const Residuals r = residuals(X, theta.delta);
  const double n = static_cast<double>(X.rows());
  const double cond = conditional_variance(theta.omega, i);
  const PseudoVariables z = pseudo_variables(r, theta.omega, i);
  double sq = 0.0;
  for (Eigen::Index l = 0; l < r.eps.rows(); ++l) {
    double dev = r.eps(l, i);
    for (Eigen::Index k = 0; k < d; ++k)
      if (k != i) dev -= theta.omega(i, k) * z.z(l, k);
    sq += dev * dev;
  }
  return -0.5 * n * std::log(cond) -
         powered(sq, beta) / (2.0 * std::pow(cond, beta) * std::pow(n, beta - 1.0));
}

struct HolderGap {
  double lhs = 0.0;  ///< Σ (r²)^β
  double rhs = 0.0;  ///< (Σ r²)^β / N^{β-1}
};

/// Both sides of the finite-sum power-mean inequality; lhs >= rhs for β >= 1.
inline HolderGap holder_gap(const Eigen::Ref<const Eigen::VectorXd>& residual_sq, double beta) {
  if (!(beta >= 1.0)) throw ParameterError("holder_gap requires beta >= 1");
  if ((residual_sq.array() < 0.0).any()) throw ParameterError("squared residuals must be >= 0");
  const double n = static_cast<double>(residual_sq.size());
  HolderGap gap;
  for (Eigen::Index l = 0; l < residual_sq.size(); ++l) gap.lhs += std::pow(residual_sq(l), beta);
  gap.rhs = std::pow(residual_sq.sum(), beta) / std::pow(n, beta - 1.0);
  return gap;
}

}  // namespace abic
