#pragma once

// Differentiable graph-class constraints h(θ) >= 0, zero exactly on the class.
//
// With Ds = δ∘δ and Bs = Ω∘Ω (diagonal zeroed):
//   dag        trace(exp(Ds)) - d
//   bow-free   trace(exp(Ds)) - d + sum(Ds∘Bs)
//   ancestral  trace(exp(Ds)) - d + sum(exp(Ds)∘Bs)

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "abic/graph.hpp"

namespace abic {

enum class ConstraintKind { acyclic_dag, bow_free, ancestral };

inline std::string_view to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::acyclic_dag: return "dag";
    case ConstraintKind::bow_free: return "bowfree";
    case ConstraintKind::ancestral: return "ancestral";
  }
  return "?";
}

inline std::optional<ConstraintKind> parse_constraint_kind(std::string_view name) {
  if (name == "dag") return ConstraintKind::acyclic_dag;
  if (name == "bowfree") return ConstraintKind::bow_free;
  if (name == "ancestral") return ConstraintKind::ancestral;
  return std::nullopt;
}

/// Discrete predicate matching a constraint kind.
inline bool satisfies(const AdmgStructure& s, ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::acyclic_dag: return is_acyclic(s.directed);
    case ConstraintKind::bow_free: return is_bow_free(s);
    case ConstraintKind::ancestral: return is_ancestral(s);
  }
  return false;
}

/// ∂h/∂δ and ∂h/∂Ω. Off-diagonal omega entries hold the derivative with
/// respect to the shared symmetric parameter ω_ij = ω_ji.
struct ConstraintGradient {
  Eigen::MatrixXd delta;
  Eigen::MatrixXd omega;
};

namespace detail {

struct Surrogates {
  Eigen::MatrixXd ds;
  Eigen::MatrixXd bs;
  Eigen::MatrixXd exp_ds;
};

inline Surrogates surrogates(const Parameters& theta) {
  Surrogates s;
  s.ds = theta.delta.cwiseProduct(theta.delta);
  s.bs = theta.omega.cwiseProduct(theta.omega);
  s.bs.diagonal().setZero();
  s.exp_ds = s.ds.exp();
  return s;
}

}  // namespace detail

/// Fréchet derivative L_exp(A, E) from the upper-right block of exp([[A, E], [0, A]]).
inline Eigen::MatrixXd expm_frechet(const Eigen::MatrixXd& a, const Eigen::MatrixXd& e) {
  const Eigen::Index d = a.rows();
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  block.topLeftCorner(d, d) = a;
  block.topRightCorner(d, d) = e;
  block.bottomRightCorner(d, d) = a;
  const Eigen::MatrixXd expo = block.exp();
  return expo.topRightCorner(d, d);
}

inline double h_value(const Parameters& theta, ConstraintKind kind) {
  const auto s = detail::surrogates(theta);
  const double dag = s.exp_ds.trace() - static_cast<double>(theta.dim());
  switch (kind) {
    case ConstraintKind::acyclic_dag: return dag;
    case ConstraintKind::bow_free: return dag + s.ds.cwiseProduct(s.bs).sum();
    case ConstraintKind::ancestral: return dag + s.exp_ds.cwiseProduct(s.bs).sum();
  }
  return dag;
}

inline ConstraintGradient h_gradient(const Parameters& theta, ConstraintKind kind) {
  const auto s = detail::surrogates(theta);
  const Eigen::Index d = theta.dim();
  // d trace(exp(Ds)) / d Ds = exp(Ds)ᵀ
  Eigen::MatrixXd wrt_ds = s.exp_ds.transpose();
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(d, d);  // d(coupling)/d(Bs), pre-symmetrization

  switch (kind) {
    case ConstraintKind::acyclic_dag:
      break;
    case ConstraintKind::bow_free:
      wrt_ds += s.bs;
      coupling = s.ds;
      break;
    case ConstraintKind::ancestral:
      // sum(exp(Ds)∘Bs) = <Bs, exp(Ds)>; its Ds-gradient is L_exp(Dsᵀ, Bs).
      wrt_ds += expm_frechet(s.ds.transpose(), s.bs);
      coupling = s.exp_ds;
      break;
  }

  ConstraintGradient g;
  g.delta = 2.0 * theta.delta.cwiseProduct(wrt_ds);
  g.omega = 2.0 * theta.omega.cwiseProduct(coupling + coupling.transpose());
  g.omega.diagonal().setZero();
  return g;
}

}  // namespace abic
