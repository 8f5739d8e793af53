#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical routines; each oracle is written from the
// defining formula with the most direct method available.

#include <cmath>
#include <algorithm>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "abic/graph.hpp"

namespace oracle {

/// log N(x; 0, Σ) through an explicit inverse and determinant.
inline double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma) {
  const double p = static_cast<double>(x.size());
  const Eigen::MatrixXd inv = sigma.inverse();
  return -0.5 * p * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(sigma.determinant()) -
         0.5 * x.dot(inv * x);
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int k = 1; k < panels; ++k) s += (k % 2 == 1 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

/// Truncated Taylor series with scaling and squaring.
inline Eigen::MatrixXd expm_taylor(const Eigen::MatrixXd& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  const Eigen::MatrixXd scaled = a / std::pow(2.0, squarings);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Central difference of f at x along every coordinate.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd up = x, down = x;
    up(k) += step;
    down(k) -= step;
    g(k) = (f(up) - f(down)) / (2.0 * step);
  }
  return g;
}

/// Transitive closure by Floyd-Warshall.
inline Eigen::MatrixXi closure(const Eigen::MatrixXi& adj) {
  const Eigen::Index d = adj.rows();
  Eigen::MatrixXi r = adj;
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        if (r(i, k) && r(k, j)) r(i, j) = 1;
  return r;
}

inline bool acyclic(const Eigen::MatrixXi& directed) {
  const Eigen::MatrixXi r = closure(directed);
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    if (r(i, i)) return false;
  return true;
}

/// Acyclic and no pair carries both a directed and a bidirected edge.
inline bool bow_free(const abic::AdmgStructure& s) {
  if (!acyclic(s.directed)) return false;
  for (Eigen::Index i = 0; i < s.dim(); ++i)
    for (Eigen::Index j = 0; j < s.dim(); ++j)
      if (s.bidirected(i, j) && (s.directed(i, j) || s.directed(j, i))) return false;
  return true;
}

/// Acyclic and no bidirected edge joins a vertex to one of its ancestors.
inline bool ancestral(const abic::AdmgStructure& s) {
  if (!acyclic(s.directed)) return false;
  const Eigen::MatrixXi r = closure(s.directed);
  for (Eigen::Index i = 0; i < s.dim(); ++i)
    for (Eigen::Index j = 0; j < s.dim(); ++j)
      if (s.bidirected(i, j) && r(i, j)) return false;
  return true;
}

/// Generalized normal kurtosis Γ(5/2β)Γ(1/2β)/Γ(3/2β)² with tgamma.
inline double kurtosis(double beta) {
  return std::tgamma(5.0 / (2.0 * beta)) * std::tgamma(1.0 / (2.0 * beta)) /
         std::pow(std::tgamma(3.0 / (2.0 * beta)), 2);
}

/// Σ = (I - δᵀ)⁻¹ Ω (I - δᵀ)⁻ᵀ with an explicit inverse.
inline Eigen::MatrixXd covariance(const abic::Parameters& theta) {
  const Eigen::Index d = theta.dim();
  const Eigen::MatrixXd a = (Eigen::MatrixXd::Identity(d, d) - theta.delta.transpose()).inverse();
  return a * theta.omega * a.transpose();
}

/// LS(θ) written with scalar loops: residual of target i is
/// x_i - Σ_j x_j δ_ji - Σ_{k≠i} z_k ω_ki, z = ε_{-i} Ω_{-i,-i}⁻ᵀ.
inline double ls_loops(const abic::Parameters& theta, const Eigen::MatrixXd& X, double beta) {
  const Eigen::Index n = X.rows(), d = X.cols();
  Eigen::MatrixXd eps = X;
  for (Eigen::Index l = 0; l < n; ++l)
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) eps(l, i) -= X(l, j) * theta.delta(j, i);
  double total = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    std::vector<Eigen::Index> rest;
    for (Eigen::Index k = 0; k < d; ++k)
      if (k != i) rest.push_back(k);
    const Eigen::Index m = static_cast<Eigen::Index>(rest.size());
    Eigen::MatrixXd block(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) block(a, b) = theta.omega(rest[a], rest[b]);
    const Eigen::MatrixXd inv_t = block.inverse().transpose();
    double sq = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) {
      double r = X(l, i);
      for (Eigen::Index j = 0; j < d; ++j) r -= X(l, j) * theta.delta(j, i);
      for (Eigen::Index a = 0; a < m; ++a) {
        double z = 0.0;
        for (Eigen::Index b = 0; b < m; ++b) z += eps(l, rest[b]) * inv_t(b, a);
        r -= z * theta.omega(rest[a], i);
      }
      sq += r * r;
    }
    total += std::pow(sq, beta);
  }
  return total / (2.0 * static_cast<double>(n));
}

/// The error-form log-likelihood core -(N/2) log|Ω| - ½ Σ (εᵀ Ω⁻¹ ε)^β by
/// explicit inverse and determinant.
inline double error_loglik(const abic::Parameters& theta, const Eigen::MatrixXd& X, double beta) {
  const Eigen::MatrixXd eps = X - X * theta.delta;
  const Eigen::MatrixXd inv = theta.omega.inverse();
  double total = -0.5 * static_cast<double>(X.rows()) * std::log(theta.omega.determinant());
  for (Eigen::Index l = 0; l < X.rows(); ++l) {
    const Eigen::VectorXd e = eps.row(l).transpose();
    total -= 0.5 * std::pow(e.dot(inv * e), beta);
  }
  return total;
}

/// A random bow-free θ: upper-triangular δ in a random order, bidirected
/// edges only on pairs without a directed edge, diagonally dominant Ω.
inline abic::Parameters random_bow_free(int d, std::mt19937_64& rng, double p_dir = 0.35,
                                        double p_bi = 0.25) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::uniform_real_distribution<double> bmag(0.3, 0.6);
  std::vector<int> order(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) order[static_cast<std::size_t>(k)] = k;
  std::shuffle(order.begin(), order.end(), rng);
  abic::Parameters theta = abic::Parameters::zero(d);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) {
      const int j = order[static_cast<std::size_t>(a)], i = order[static_cast<std::size_t>(b)];
      const double draw = u(rng);
      const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
      if (draw < p_dir) {
        theta.delta(j, i) = sign * mag(rng);
      } else if (draw < p_dir + p_bi) {
        theta.omega(i, j) = theta.omega(j, i) = sign * bmag(rng);
      }
    }
  for (int i = 0; i < d; ++i)
    theta.omega(i, i) = theta.omega.row(i).cwiseAbs().sum() + 0.5 + u(rng);
  return theta;
}

}  // namespace oracle
