#pragma once

// ADMG parameters and structures.
//
// Column convention throughout: delta(j, i) is the coefficient of the edge
// j -> i, so the structural equations read X = X·delta + eps for an n×d data
// matrix. (The row-convention matrix of the textbook form is deltaᵀ.)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "abic/errors.hpp"
#include "abic/minimizer.hpp"

namespace abic {

using BinaryMatrix = Eigen::MatrixXi;

struct Parameters {
  Eigen::MatrixXd delta;  ///< delta(j, i): weight of j -> i, zero diagonal
  Eigen::MatrixXd omega;  ///< error dispersion; off-diagonals are bidirected strengths

  static Parameters zero(Eigen::Index d) {
    return {Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
  }
  static Parameters empty_graph(Eigen::Index d) {
    return {Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Identity(d, d)};
  }
  Eigen::Index dim() const { return delta.rows(); }
};

struct AdmgStructure {
  BinaryMatrix directed;    ///< directed(j, i) = 1 <=> j -> i
  BinaryMatrix bidirected;  ///< symmetric, zero diagonal

  static AdmgStructure empty(Eigen::Index d) {
    return {BinaryMatrix::Zero(d, d), BinaryMatrix::Zero(d, d)};
  }
  Eigen::Index dim() const { return directed.rows(); }
  bool operator==(const AdmgStructure&) const = default;
};

inline void validate(const Parameters& theta) {
  const Eigen::Index d = theta.delta.rows();
  if (theta.delta.cols() != d || theta.omega.rows() != d || theta.omega.cols() != d)
    throw ParameterError("delta and omega must both be d×d");
  if (!theta.delta.allFinite() || !theta.omega.allFinite())
    throw ParameterError("parameters contain non-finite entries");
  if (theta.delta.diagonal().cwiseAbs().maxCoeff() != 0.0)
    throw ParameterError("delta must have a zero diagonal");
  const double scale = std::max(1.0, theta.omega.cwiseAbs().maxCoeff());
  if ((theta.omega - theta.omega.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ParameterError("omega must be symmetric");
}

inline void validate(const AdmgStructure& s) {
  const Eigen::Index d = s.directed.rows();
  if (s.directed.cols() != d || s.bidirected.rows() != d || s.bidirected.cols() != d)
    throw ParameterError("structure matrices must be d×d");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (s.directed(i, i) != 0 || s.bidirected(i, i) != 0)
      throw ParameterError("structure matrices must have zero diagonals");
    for (Eigen::Index j = 0; j < d; ++j) {
      if ((s.directed(i, j) != 0 && s.directed(i, j) != 1) ||
          (s.bidirected(i, j) != 0 && s.bidirected(i, j) != 1))
        throw ParameterError("structure matrices must be binary");
      if (s.bidirected(i, j) != s.bidirected(j, i))
        throw ParameterError("bidirected matrix must be symmetric");
    }
  }
}

/// Σ(θ) = (I - δᵀ)⁻¹ Ω (I - δᵀ)⁻ᵀ, the covariance (dispersion) of the observed variables.
inline Eigen::MatrixXd implied_covariance(const Parameters& theta) {
  validate(theta);
  const Eigen::Index d = theta.dim();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) - theta.delta.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw NumericError("I - delta is singular");
  const Eigen::MatrixXd inv = lu.inverse();
  Eigen::MatrixXd sigma = inv * theta.omega * inv.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

/// Kahn's algorithm on directed(j, i) = 1 meaning j -> i.
inline bool is_acyclic(const BinaryMatrix& directed) {
  const Eigen::Index d = directed.rows();
  std::vector<int> indegree(static_cast<std::size_t>(d), 0);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i)
      if (directed(j, i) != 0) ++indegree[static_cast<std::size_t>(i)];
  std::vector<Eigen::Index> ready;
  for (Eigen::Index i = 0; i < d; ++i)
    if (indegree[static_cast<std::size_t>(i)] == 0) ready.push_back(i);
  Eigen::Index visited = 0;
  while (!ready.empty()) {
    const Eigen::Index j = ready.back();
    ready.pop_back();
    ++visited;
    for (Eigen::Index i = 0; i < d; ++i)
      if (directed(j, i) != 0 && --indegree[static_cast<std::size_t>(i)] == 0) ready.push_back(i);
  }
  return visited == d;
}

/// reach(a, b) = 1 iff there is a directed path a -> ... -> b of length >= 1.
inline BinaryMatrix directed_reachability(const BinaryMatrix& directed) {
  BinaryMatrix reach = (directed.array() != 0).cast<int>();
  const Eigen::Index d = directed.rows();
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index a = 0; a < d; ++a)
      if (reach(a, k) != 0)
        for (Eigen::Index b = 0; b < d; ++b)
          if (reach(k, b) != 0) reach(a, b) = 1;
  return reach;
}

inline bool is_bow_free(const AdmgStructure& s) {
  if (!is_acyclic(s.directed)) return false;
  return (s.directed.array() * s.bidirected.array()).sum() == 0;
}

inline bool is_ancestral(const AdmgStructure& s) {
  if (!is_acyclic(s.directed)) return false;
  const BinaryMatrix reach = directed_reachability(s.directed);
  return (reach.array() * s.bidirected.array()).sum() == 0;
}

/// Edges whose |weight| exceeds w_thr; B is symmetrized by OR.
inline AdmgStructure threshold(const Parameters& theta, double w_thr) {
  validate(theta);
  if (!(w_thr >= 0.0)) throw ParameterError("threshold must be >= 0");
  const Eigen::Index d = theta.dim();
  AdmgStructure s = AdmgStructure::empty(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i == j) continue;
      if (std::abs(theta.delta(j, i)) > w_thr) s.directed(j, i) = 1;
      if (std::abs(theta.omega(j, i)) > w_thr) {
        s.bidirected(j, i) = 1;
        s.bidirected(i, j) = 1;
      }
    }
  }
  return s;
}

// --- Packing of (delta, omega) into a flat optimization vector ---------------

/// Per-entry interval bounds over (delta, omega). Omega bounds are read from
/// the upper triangle and the diagonal.
struct ParameterBounds {
  Eigen::MatrixXd delta_lower, delta_upper;
  Eigen::MatrixXd omega_lower, omega_upper;

  /// delta diagonal fixed at 0, omega diagonal >= 1e-6, everything else free.
  static ParameterBounds defaults(Eigen::Index d) {
    const double inf = std::numeric_limits<double>::infinity();
    ParameterBounds b{Eigen::MatrixXd::Constant(d, d, -inf), Eigen::MatrixXd::Constant(d, d, inf),
                      Eigen::MatrixXd::Constant(d, d, -inf), Eigen::MatrixXd::Constant(d, d, inf)};
    for (Eigen::Index i = 0; i < d; ++i) {
      b.delta_lower(i, i) = 0.0;
      b.delta_upper(i, i) = 0.0;
      b.omega_lower(i, i) = 1e-6;
    }
    return b;
  }
  Eigen::Index dim() const { return delta_lower.rows(); }

  void fix_delta(Eigen::Index j, Eigen::Index i, double value = 0.0) {
    delta_lower(j, i) = value;
    delta_upper(j, i) = value;
  }
  void fix_omega(Eigen::Index i, Eigen::Index j, double value = 0.0) {
    omega_lower(i, j) = omega_lower(j, i) = value;
    omega_upper(i, j) = omega_upper(j, i) = value;
  }
  bool delta_fixed_zero(Eigen::Index j, Eigen::Index i) const {
    return delta_lower(j, i) == 0.0 && delta_upper(j, i) == 0.0;
  }
  bool omega_fixed_zero(Eigen::Index i, Eigen::Index j) const {
    return omega_lower(i, j) == 0.0 && omega_upper(i, j) == 0.0;
  }
};

/// Flat layout: all d² delta entries (column-major), then omega's upper
/// triangle including the diagonal.
class ParameterLayout {
 public:
  explicit ParameterLayout(Eigen::Index d) : d_(d) {}

  Eigen::Index dim() const { return d_; }
  Eigen::Index size() const { return d_ * d_ + d_ * (d_ + 1) / 2; }

  Eigen::VectorXd pack(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& omega) const {
    Eigen::VectorXd x(size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = 0; j < d_; ++j) x(k++) = delta(j, i);
    for (Eigen::Index j = 0; j < d_; ++j)
      for (Eigen::Index i = 0; i <= j; ++i) x(k++) = omega(i, j);
    return x;
  }
  Eigen::VectorXd pack(const Parameters& theta) const { return pack(theta.delta, theta.omega); }

  Parameters unpack(const Eigen::VectorXd& x) const {
    Parameters theta = Parameters::zero(d_);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = 0; j < d_; ++j) theta.delta(j, i) = x(k++);
    for (Eigen::Index j = 0; j < d_; ++j)
      for (Eigen::Index i = 0; i <= j; ++i) theta.omega(i, j) = theta.omega(j, i) = x(k++);
    return theta;
  }

  Box box(const ParameterBounds& b) const {
    return {pack(b.delta_lower, b.omega_lower), pack(b.delta_upper, b.omega_upper)};
  }

 private:
  Eigen::Index d_;
};

// --- Covariance refit (identifiability oracle) -------------------------------

struct CovarianceFit {
  Parameters theta;
  double distance = 0.0;  ///< ‖Σ(θ̂) - Σ_obs‖²_F
  bool converged = false;
  int starts_tried = 0;
};

struct CovarianceFitOptions {
  int restarts = 3;
  std::uint64_t seed = 1;
  MinimizerOptions minimizer{.max_iterations = 5000, .memory = 20, .pgtol = 1e-14, .ftol = 0.0};
};

namespace detail {

/// f = ‖AΩAᵀ - S‖², A = (I - δᵀ)⁻¹; gradient in the layout's coordinates.
inline double covariance_distance(const ParameterLayout& layout, const Eigen::MatrixXd& target,
                                  const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
  const Eigen::Index d = layout.dim();
  const Parameters theta = layout.unpack(x);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) - theta.delta.transpose();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  if (!(std::abs(lu.determinant()) > 1e-300)) {
    grad.setZero();
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::MatrixXd a = lu.inverse();
  const Eigen::MatrixXd sigma = a * theta.omega * a.transpose();
  const Eigen::MatrixXd resid = sigma - target;
  const Eigen::MatrixXd g = 2.0 * resid;
  const Eigen::MatrixXd g_delta = 2.0 * sigma * g * a;
  Eigen::MatrixXd g_omega_raw = a.transpose() * g * a;
  Eigen::MatrixXd g_omega = g_omega_raw + g_omega_raw.transpose();
  g_omega.diagonal() = g_omega_raw.diagonal();
  grad = layout.pack(g_delta, g_omega);
  return resid.squaredNorm();
}

}  // namespace detail

/// Minimizes ‖Σ(θ) - sigma_obs‖²_F over θ supported on s (off-support entries
/// fixed at zero, omega diagonal free and positive). Tries `init` first, then
/// random restarts around it; keeps the best.
inline CovarianceFit fit_params_to_covariance(const AdmgStructure& s,
                                              const Eigen::MatrixXd& sigma_obs,
                                              const Parameters& init, double tol,
                                              const CovarianceFitOptions& options = {}) {
  validate(s);
  validate(init);
  if (!is_bow_free(s)) throw ParameterError("covariance refit requires a bow-free structure");
  const Eigen::Index d = s.dim();
  if (sigma_obs.rows() != d || sigma_obs.cols() != d || init.dim() != d)
    throw ParameterError("dimension mismatch in covariance refit");

  ParameterBounds bounds = ParameterBounds::defaults(d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i == j) continue;
      if (s.directed(j, i) == 0) bounds.fix_delta(j, i);
      if (s.bidirected(j, i) == 0) bounds.fix_omega(j, i);
    }
  const ParameterLayout layout(d);
  const Box box = layout.box(bounds);
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    return detail::covariance_distance(layout, sigma_obs, x, grad);
  };

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> jitter(0.0, 0.3);
  CovarianceFit best;
  best.distance = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd x0 = layout.pack(init);
  for (int start = 0; start <= options.restarts; ++start) {
    Eigen::VectorXd xs = x0;
    if (start > 0)
      for (Eigen::Index k = 0; k < xs.size(); ++k) xs(k) += jitter(rng);
    xs = box.project(xs);
    Eigen::VectorXd probe(xs.size());
    if (!std::isfinite(objective(xs, probe))) continue;
    const MinimizerResult r = inner_minimize(objective, box, xs, options.minimizer);
    ++best.starts_tried;
    if (r.f < best.distance) {
      best.distance = r.f;
      best.theta = layout.unpack(r.x);
    }
    if (best.distance < tol) break;
  }
  if (best.starts_tried == 0) throw NumericError("no finite starting point for covariance refit");
  best.converged = best.distance < tol;
  return best;
}

}  // namespace abic
