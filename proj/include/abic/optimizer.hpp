#pragma once

// Augmented-Lagrangian discovery of ADMGs.
//
// Each dual step recomputes residuals and pseudo-variables from the current
// estimate, solves the primal problem
//
//   min_θ  LS(θ) + (ρ/2) h(θ)² + α h(θ) + λ Σ tanh(ln(n) |θ_k|)
//
// inside the prior-knowledge box, resets Ω_ii to the residual variances,
// then updates α ← α + ρ h and escalates ρ when h did not shrink enough.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "abic/constraints.hpp"
#include "abic/errors.hpp"
#include "abic/graph.hpp"
#include "abic/likelihood.hpp"
#include "abic/minimizer.hpp"

namespace abic {

struct OptimizerConfig {
  double tol = 1e-6;           ///< parameter-change stop
  int max_iterations = 50;     ///< primal iteration budget at the first dual step
  int max_iterations_cap = 20000;
  double iteration_growth = 2.0;
  double rho_init = 1.0;
  double rho_factor = 10.0;
  double rho_max = 1e16;
  double alpha_init = 0.0;
  double lambda = 0.05;
  double w_threshold = 0.05;
  ConstraintKind constraint = ConstraintKind::bow_free;
  double h_tol = 1e-8;
  int max_dual_steps = 20;
  /// ρ escalates unless h shrinks by at least this factor between dual steps.
  double h_shrink = 0.25;

  void validate() const {
    if (!(tol > 0.0) || max_iterations < 1 || max_iterations_cap < max_iterations ||
        !(rho_init > 0.0) || !(rho_factor > 1.0) || !(rho_max >= rho_init) || !(lambda >= 0.0) ||
        !(w_threshold >= 0.0) || !(h_tol > 0.0) || max_dual_steps < 1 || !(h_shrink > 0.0) ||
        !(iteration_growth >= 1.0))
      throw ParameterError("invalid optimizer configuration");
  }
};

/// Indices are column positions in the data matrix.
struct PriorKnowledge {
  std::vector<std::vector<int>> tiers;             ///< earliest tier first
  std::vector<std::pair<int, int>> unconfounded;   ///< unordered pairs with no i <-> j
  std::vector<std::pair<int, int>> forbidden_directed;  ///< (j, i): j -> i forbidden

  bool empty() const { return tiers.empty() && unconfounded.empty() && forbidden_directed.empty(); }
};

struct TraceEntry {
  int dual_step = 0;
  double primal_objective = 0.0;
  double h = 0.0;
  double rho = 0.0;
  double alpha = 0.0;
  int inner_iterations = 0;
  bool line_search_failed = false;
};

struct FitResult {
  Parameters theta_hat;
  AdmgStructure structure;
  double h_final = 0.0;
  std::vector<TraceEntry> objective_trace;
  bool converged = false;
  double beta_used = 1.0;
  int dual_steps = 0;
  std::string diagnostics;
};

/// Which least-squares score drives the primal problem.
enum class ScoreVariant {
  powered,   ///< (1/2n) Σ ‖r_i‖^{2β}
  gaussian,  ///< (1/2n) Σ ‖r_i‖², independent of β
};

inline void validate(const PriorKnowledge& prior, int d) {
  auto in_range = [d](int k) { return k >= 0 && k < d; };
  std::set<int> seen;
  for (const auto& tier : prior.tiers)
    for (int k : tier) {
      if (!in_range(k)) throw ParameterError("tier index out of range");
      if (!seen.insert(k).second) throw ParameterError("variable appears in more than one tier");
    }
  for (const auto& [a, b] : prior.unconfounded) {
    if (!in_range(a) || !in_range(b)) throw ParameterError("unconfounded index out of range");
    if (a == b) throw ParameterError("unconfounded pair must name two variables");
  }
  for (const auto& [j, i] : prior.forbidden_directed) {
    if (!in_range(j) || !in_range(i)) throw ParameterError("forbidden edge index out of range");
    if (i == j) throw ParameterError("forbidden edge must name two variables");
  }
}

/// Bounds encoding the prior: δ(j, i) fixed to 0 when i's tier precedes j's
/// tier or (j, i) is forbidden; Ω(i, j) fixed to 0 for unconfounded pairs.
inline ParameterBounds apply_prior_knowledge(const PriorKnowledge& prior, int d) {
  validate(prior, d);
  ParameterBounds bounds = ParameterBounds::defaults(d);
  std::vector<int> tier_of(static_cast<std::size_t>(d), -1);
  for (std::size_t t = 0; t < prior.tiers.size(); ++t)
    for (int k : prior.tiers[t]) tier_of[static_cast<std::size_t>(k)] = static_cast<int>(t);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      const int tj = tier_of[static_cast<std::size_t>(j)];
      const int ti = tier_of[static_cast<std::size_t>(i)];
      if (i != j && tj >= 0 && ti >= 0 && ti < tj) bounds.fix_delta(j, i);
    }
  for (const auto& [j, i] : prior.forbidden_directed) bounds.fix_delta(j, i);
  for (const auto& [a, b] : prior.unconfounded) bounds.fix_omega(a, b);
  return bounds;
}

namespace detail {

inline Parameters initial_parameters(const Eigen::MatrixXd& X) {
  const Eigen::Index d = X.cols();
  Parameters theta = Parameters::zero(d);
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index i = 0; i < d; ++i) {
    const double mean = X.col(i).mean();
    theta.omega(i, i) = std::max((X.col(i).array() - mean).square().sum() / n, 1e-6);
  }
  return theta;
}

/// Shifts the diagonal by |λ_min| + 1e-6 when Ω is not positive definite.
inline bool make_positive_definite(Eigen::MatrixXd& omega) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega, Eigen::EigenvaluesOnly);
  const double lowest = eig.eigenvalues().minCoeff();
  if (lowest > 0.0) return false;
  omega.diagonal().array() += std::abs(lowest) + 1e-6;
  return true;
}

}  // namespace detail

inline FitResult discover(const Eigen::MatrixXd& X, double beta, const OptimizerConfig& config,
                          const PriorKnowledge& prior = {},
                          ScoreVariant variant = ScoreVariant::powered) {
  config.validate();
  if (!(beta >= 1.0) || !std::isfinite(beta))
    throw ParameterError("discover requires a finite beta >= 1");
  const Eigen::Index d = X.cols();
  const Eigen::Index n = X.rows();
  if (d < 1 || n < 2) throw ParameterError("discover needs at least 2 rows and 1 column");
  if (!X.allFinite()) throw ParameterError("data contain non-finite values");

  const ParameterBounds bounds = apply_prior_knowledge(prior, static_cast<int>(d));
  const ParameterLayout layout(d);
  const Box box = layout.box(bounds);
  const Eigen::Index m = layout.size();
  // Each entry is split as θ = θ⁺ - θ⁻ with θ± >= 0, so the tanh penalty is
  // smooth on the feasible orthant instead of kinked at zero.
  Box split_box{Eigen::VectorXd(2 * m), Eigen::VectorXd(2 * m)};
  split_box.lower << box.lower.cwiseMax(0.0), (-box.upper).cwiseMax(0.0);
  split_box.upper << box.upper.cwiseMax(0.0), (-box.lower).cwiseMax(0.0);
  Eigen::MatrixXd off_diagonal = Eigen::MatrixXd::Ones(d, d);
  off_diagonal.diagonal().setZero();
  const Eigen::VectorXd penalized = layout.pack(off_diagonal, off_diagonal);
  const double log_n = std::log(static_cast<double>(n));
  // The powered score grows like (n·var)^β. The primal objective is divided
  // by this fixed constant so the inner solver sees O(1) values; minimizers
  // are unchanged. Equal to 1 when beta = 1.
  const double mean_square = X.squaredNorm() / static_cast<double>(X.size());
  const double unit = variant == ScoreVariant::powered && mean_square > 0.0
                          ? std::pow(static_cast<double>(n) * mean_square, beta - 1.0)
                          : 1.0;

  FitResult result;
  result.beta_used = beta;
  Parameters theta = layout.unpack(box.project(layout.pack(detail::initial_parameters(X))));
  double rho = config.rho_init;
  double alpha = config.alpha_init;
  double h_prev = std::numeric_limits<double>::infinity();
  double budget = static_cast<double>(config.max_iterations);
  bool parameters_settled = false;
  std::ostringstream diag;

  for (int step = 0; step < config.max_dual_steps; ++step) {
    const std::vector<PseudoVariables> z =
        all_pseudo_variables(residuals(X, theta.delta), theta.omega);
    const LeastSquaresScore powered_score(X, beta, z);
    const GaussianLeastSquaresScore gaussian_score(X, z);

    auto primal = [&](const Eigen::VectorXd& xs, Eigen::VectorXd& grad) {
      const Eigen::VectorXd x = xs.head(m) - xs.tail(m);
      const Parameters p = layout.unpack(x);
      double ls = 0.0;
      std::pair<Eigen::MatrixXd, Eigen::MatrixXd> g_ls;
      if (variant == ScoreVariant::powered) {
        ls = powered_score.value(p);
        g_ls = powered_score.gradient(p);
      } else {
        ls = gaussian_score.value(p);
        g_ls = gaussian_score.gradient(p);
      }
      const double h = h_value(p, config.constraint);
      const ConstraintGradient g_h = h_gradient(p, config.constraint);
      const double coef = rho * h + alpha;
      const Eigen::VectorXd g_smooth =
          layout.pack(g_ls.first + coef * g_h.delta, g_ls.second + coef * g_h.omega);
      grad.resize(2 * m);
      double pen = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) {
        grad(k) = g_smooth(k);
        grad(m + k) = -g_smooth(k);
        if (penalized(k) == 0.0 || config.lambda == 0.0) continue;
        const double tp = std::tanh(log_n * xs(k));
        const double tm = std::tanh(log_n * xs(m + k));
        pen += tp + tm;
        grad(k) += config.lambda * log_n * (1.0 - tp * tp);
        grad(m + k) += config.lambda * log_n * (1.0 - tm * tm);
      }
      grad /= unit;
      return (ls + 0.5 * rho * h * h + alpha * h + config.lambda * pen) / unit;
    };

    MinimizerOptions inner;
    inner.max_iterations = static_cast<int>(budget);
    const Eigen::VectorXd x0 = layout.pack(theta);
    Eigen::VectorXd xs0(2 * m);
    xs0 << x0.cwiseMax(0.0), (-x0).cwiseMax(0.0);
    MinimizerResult solved;
    try {
      solved = inner_minimize(primal, split_box, xs0, inner);
    } catch (const NumericError& e) {
      throw NumericError("dual step " + std::to_string(step) + ": " + e.what());
    }
    if (!std::isfinite(solved.f))
      throw NumericError("dual step " + std::to_string(step) + ": primal objective is not finite");
    solved.x = (solved.x.head(m) - solved.x.tail(m)).eval();

    Parameters next = layout.unpack(solved.x);
    const Residuals eps = residuals(X, next.delta);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double mean = eps.eps.col(i).mean();
      const double var =
          (eps.eps.col(i).array() - mean).square().sum() / static_cast<double>(n);
      next.omega(i, i) = std::max(var, bounds.omega_lower(i, i));
    }
    if (detail::make_positive_definite(next.omega))
      diag << "dual step " << step << ": omega diagonal shifted to restore positive definiteness\n";

    const double h = h_value(next, config.constraint);
    if (!std::isfinite(h))
      throw NumericError("dual step " + std::to_string(step) + ": constraint value is not finite");
    const double change = std::sqrt((next.delta - theta.delta).squaredNorm() +
                                    (next.omega - theta.omega).squaredNorm());
    result.objective_trace.push_back(
        {step, solved.f * unit, h, rho, alpha, solved.iterations, solved.line_search_failed});
    if (solved.line_search_failed) diag << "dual step " << step << ": line search failed\n";

    theta = std::move(next);
    result.dual_steps = step + 1;
    alpha += rho * h;
    if (h > config.h_shrink * h_prev) rho = std::min(rho * config.rho_factor, config.rho_max);
    h_prev = h;
    budget = std::min(budget * config.iteration_growth,
                      static_cast<double>(config.max_iterations_cap));

    if (change < config.tol) {
      parameters_settled = true;
      break;
    }
  }

  result.theta_hat = theta;
  result.h_final = std::max(0.0, h_value(theta, config.constraint));
  result.structure = threshold(theta, config.w_threshold);
  result.converged = parameters_settled && result.h_final <= config.h_tol;
  if (!parameters_settled) diag << "parameter change did not fall below tol\n";
  if (result.h_final > config.h_tol) diag << "constraint residual above h_tol\n";
  result.diagnostics = diag.str();
  return result;
}

/// The Gaussian least-squares variant, equivalent to discover() at beta = 1.
inline FitResult discover_gaussian(const Eigen::MatrixXd& X, const OptimizerConfig& config,
                                   const PriorKnowledge& prior = {}) {
  return discover(X, 1.0, config, prior, ScoreVariant::gaussian);
}

}  // namespace abic
