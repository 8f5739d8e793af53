#pragma once

// Random bow-free ADMGs and MGGD-driven data for the simulation study.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "abic/errors.hpp"
#include "abic/graph.hpp"
#include "abic/mggd.hpp"

namespace abic::simgen {

struct SimConfig {
  int d = 5;
  int n = 500;
  double beta = 1.0;
  double p_directed = 0.3;
  double p_bidirected = 0.2;
  std::uint64_t seed = 0;
  /// Relabel variables by a random permutation after generation.
  bool permute = true;

  void validate() const {
    if (d < 2) throw ParameterError("simulation needs d >= 2");
    if (n < 1) throw ParameterError("simulation needs n >= 1");
    if (!(beta > 0.0)) throw ParameterError("simulation needs beta > 0");
    if (p_directed < 0.0 || p_bidirected < 0.0 || p_directed + p_bidirected > 1.0)
      throw ParameterError("edge probabilities must be >= 0 and sum to <= 1");
  }
};

namespace detail {

/// Uniform on [-hi, -lo] ∪ [lo, hi].
inline double signed_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> magnitude(lo, hi);
  std::bernoulli_distribution negative(0.5);
  const double m = magnitude(rng);
  return negative(rng) ? -m : m;
}

}  // namespace detail

/// Ω_ii ← |Ω_ii| + Σ_{j≠i} |Ω_ij| + U[0.1, 0.5]; strictly diagonally dominant.
inline Eigen::MatrixXd ensure_positive_definite(const Eigen::MatrixXd& omega,
                                                std::mt19937_64& rng) {
  if (omega.rows() != omega.cols()) throw ParameterError("omega must be square");
  std::uniform_real_distribution<double> offset(0.1, 0.5);
  Eigen::MatrixXd out = omega;
  for (Eigen::Index i = 0; i < omega.rows(); ++i) {
    const double off = omega.row(i).cwiseAbs().sum() - std::abs(omega(i, i));
    out(i, i) = std::abs(omega(i, i)) + off + offset(rng);
  }
  return out;
}

inline Eigen::MatrixXd ensure_positive_definite(const Eigen::MatrixXd& omega, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ensure_positive_definite(omega, rng);
}

/// Relabels variable k as perm[k] in both matrices.
inline Parameters permute_variables(const Parameters& theta, const std::vector<int>& perm) {
  const Eigen::Index d = theta.dim();
  Parameters out = Parameters::zero(d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      const auto pa = perm[static_cast<std::size_t>(a)];
      const auto pb = perm[static_cast<std::size_t>(b)];
      out.delta(pa, pb) = theta.delta(a, b);
      out.omega(pa, pb) = theta.omega(a, b);
    }
  return out;
}

/// One uniform draw per pair i < j decides between i -> j, i <-> j, or nothing.
inline Parameters random_admg(const SimConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int d = config.d;
  Parameters theta = Parameters::zero(d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const double u = unit(rng);
      if (u < config.p_directed) {
        theta.delta(i, j) = detail::signed_uniform(rng, 0.5, 2.0);
      } else if (u < config.p_directed + config.p_bidirected) {
        const double w = detail::signed_uniform(rng, 0.4, 0.7);
        theta.omega(i, j) = w;
        theta.omega(j, i) = w;
      }
    }
  std::uniform_real_distribution<double> diag(0.4, 0.7);
  for (int i = 0; i < d; ++i) theta.omega(i, i) = diag(rng);
  theta.omega = ensure_positive_definite(theta.omega, rng);

  if (config.permute) {
    std::vector<int> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    theta = permute_variables(theta, perm);
  }
  return theta;
}

/// Rows ε ~ MGGD(0, Ω, β), then X = ε (I - δ)⁻¹ so that X = Xδ + ε; columns centered.
inline Eigen::MatrixXd generate_data(const Parameters& theta, int n, double beta,
                                     std::uint64_t seed) {
  validate(theta);
  const Eigen::Index d = theta.dim();
  const Eigen::MatrixXd eps = mggd::sample(
      n, mggd::MggdParams{Eigen::VectorXd::Zero(d), theta.omega, beta}, seed);
  // X (I - δ) = ε  <=>  (I - δ)ᵀ Xᵀ = εᵀ
  const Eigen::MatrixXd mt = Eigen::MatrixXd::Identity(d, d) - theta.delta.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(mt);
  if (!lu.isInvertible()) throw NumericError("I - delta is singular");
  Eigen::MatrixXd X = lu.solve(eps.transpose()).transpose();
  X.rowwise() -= X.colwise().mean();
  return X;
}

/// n ∈ {100, 500, 1000} × d ∈ {5, 10} × β ∈ {1, 3, 5}, n outermost.
inline std::vector<SimConfig> scenario_grid() {
  std::vector<SimConfig> grid;
  for (int n : {100, 500, 1000})
    for (int d : {5, 10})
      for (double beta : {1.0, 3.0, 5.0}) {
        SimConfig c;
        c.n = n;
        c.d = d;
        c.beta = beta;
        grid.push_back(c);
      }
  return grid;
}

}  // namespace abic::simgen
