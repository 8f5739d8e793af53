#pragma once

// Limited-memory quasi-Newton descent with box constraints.
//
// Each iteration fixes the variables that sit on a bound with the gradient
// pointing outward, builds an L-BFGS direction on the remaining free set,
// and runs a projected backtracking (Armijo) line search. Variables with
// lower == upper are never written after the initial projection, so
// fixed-zero entries stay bit-exactly zero.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "abic/errors.hpp"

namespace abic {

struct MinimizerOptions {
  int max_iterations = 200;
  int memory = 10;
  /// Stop when the projected-gradient infinity norm drops below this.
  double pgtol = 1e-10;
  /// Stop when (f_k - f_{k+1}) <= ftol * max(|f_k|, |f_{k+1}|, 1).
  double ftol = 2.2e-12;
  int max_line_search = 60;
};

struct MinimizerResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  /// Objective after every accepted step, starting with f(init).
  std::vector<double> trace;
};

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf)};
  }
  Eigen::Index size() const { return lower.size(); }
  bool fixed(Eigen::Index i) const { return lower(i) == upper(i); }

  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (fixed(i))
        out(i) = lower(i);
      else
        out(i) = std::clamp(x(i), lower(i), upper(i));
    }
    return out;
  }
};

namespace detail {

inline double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                      const Box& box) {
  double norm = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (box.fixed(i)) continue;
    const double step = std::clamp(x(i) - g(i), box.lower(i), box.upper(i)) - x(i);
    norm = std::max(norm, std::abs(step));
  }
  return norm;
}

inline Eigen::VectorXd free_mask(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                 const Box& box) {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (box.fixed(i) || (x(i) <= box.lower(i) && g(i) > 0.0) ||
        (x(i) >= box.upper(i) && g(i) < 0.0))
      mask(i) = 0.0;
  }
  return mask;
}

}  // namespace detail

/// Minimizes f over the box. `fg(x, grad)` returns f(x) and writes ∇f(x).
template <class ValueAndGradient>
MinimizerResult inner_minimize(ValueAndGradient&& fg, const Box& box, const Eigen::VectorXd& init,
                               const MinimizerOptions& options = {}) {
  if (box.size() != init.size()) throw ParameterError("bounds and init sizes differ");
  for (Eigen::Index i = 0; i < box.size(); ++i)
    if (box.lower(i) > box.upper(i)) throw ParameterError("lower bound exceeds upper bound");

  MinimizerResult result;
  Eigen::VectorXd x = box.project(init);
  Eigen::VectorXd g(x.size());
  double f = fg(x, g);
  if (!std::isfinite(f) || !g.allFinite())
    throw NumericError("objective is not finite at the initial point");
  result.trace.push_back(f);

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;  // (s, y)
  Eigen::VectorXd x_trial(x.size());
  Eigen::VectorXd g_trial(x.size());

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (detail::projected_gradient_norm(x, g, box) <= options.pgtol) {
      result.converged = true;
      break;
    }
    const Eigen::VectorXd mask = detail::free_mask(x, g, box);

    // Two-loop recursion on the free subspace.
    Eigen::VectorXd q = g.cwiseProduct(mask);
    std::vector<double> alphas(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
      const auto& [s, y] = history[k];
      alphas[k] = s.dot(q) / s.dot(y);
      q -= alphas[k] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const auto& [s, y] = history[k];
      const double b = y.dot(q) / s.dot(y);
      q += (alphas[k] - b) * s;
    }
    Eigen::VectorXd direction = -q.cwiseProduct(mask);
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {
      history.clear();
      direction = -g.cwiseProduct(mask);
      slope = g.dot(direction);
      if (!(slope < 0.0)) {
        result.converged = true;
        break;
      }
    }

    double step = 1.0;
    if (history.empty()) step = std::min(1.0, 1.0 / direction.lpNorm<Eigen::Infinity>());

    bool accepted = false;
    double f_trial = f;
    for (int ls = 0; ls < options.max_line_search; ++ls) {
      x_trial = box.project(x + step * direction);
      f_trial = fg(x_trial, g_trial);
      const double decrease = g.dot(x_trial - x);
      if (std::isfinite(f_trial) && g_trial.allFinite() && f_trial <= f + 1e-4 * decrease &&
          decrease < 0.0) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.line_search_failed = true;
      break;
    }

    Eigen::VectorXd s = x_trial - x;
    Eigen::VectorXd y = g_trial - g;
    const double f_prev = f;
    x = x_trial;
    g = g_trial;
    f = f_trial;
    result.trace.push_back(f);
    result.iterations = iter + 1;

    const double sy = s.dot(y);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
      history.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(history.size()) > options.memory) history.pop_front();
    }
    if (f_prev - f <= options.ftol * std::max({std::abs(f_prev), std::abs(f), 1.0})) {
      result.converged = true;
      break;
    }
  }

  result.x = std::move(x);
  result.f = f;
  return result;
}

}  // namespace abic
