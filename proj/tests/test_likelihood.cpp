#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "abic/likelihood.hpp"
#include "abic/mggd.hpp"
#include "oracles.hpp"

using abic::Parameters;

namespace {

Eigen::MatrixXd gaussian_data(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd X(n, d);
  for (int l = 0; l < n; ++l)
    for (int c = 0; c < d; ++c) X(l, c) = z(rng);
  return X;
}

Parameters random_theta(int d, std::mt19937_64& rng, double scale = 0.4) {
  std::normal_distribution<double> z(0.0, scale);
  Parameters t = Parameters::zero(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      t.delta(i, j) = z(rng);
      if (i < j) t.omega(i, j) = t.omega(j, i) = z(rng);
    }
  for (int i = 0; i < d; ++i) t.omega(i, i) = t.omega.row(i).cwiseAbs().sum() + 0.5;
  return t;
}

/// ‖g - fd‖ / ‖fd‖ over the free coordinates, with Z frozen at θ.
double ls_gradient_error(const Parameters& t, const Eigen::MatrixXd& X, double beta) {
  const auto d = t.dim();
  const abic::ParameterLayout layout(d);
  const auto score = abic::LeastSquaresScore::at(X, beta, t);
  const auto [g_delta, g_omega] = abic::ls_gradient(t, X, beta);
  const Eigen::VectorXd analytic = layout.pack(g_delta, g_omega);
  auto f = [&](const Eigen::VectorXd& x) { return score.value(layout.unpack(x)); };
  Eigen::VectorXd numeric = oracle::central_difference(f, layout.pack(t), 1e-5);
  for (Eigen::Index i = 0; i < d; ++i) numeric(i * d + i) = analytic(i * d + i);
  return (analytic - numeric).norm() / numeric.norm();
}

}  // namespace

TEST(Residuals, ZeroDeltaIsData) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd X = gaussian_data(20, 3, rng);
  EXPECT_TRUE(abic::residuals(X, Eigen::MatrixXd::Zero(3, 3)).eps == X);
}

TEST(Residuals, ExactLinearColumnVanishes) {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd X = gaussian_data(30, 2, rng);
  X.col(1) = 1.7 * X.col(0);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(2, 2);
  delta(0, 1) = 1.7;
  EXPECT_LT(abic::residuals(X, delta).eps.col(1).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Residuals, MatchesPerRowLoop) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd X = gaussian_data(25, 4, rng);
  const Parameters t = random_theta(4, rng);
  const Eigen::MatrixXd eps = abic::residuals(X, t.delta).eps;
  for (int l = 0; l < 25; ++l)
    for (int i = 0; i < 4; ++i) {
      double r = X(l, i);
      for (int j = 0; j < 4; ++j) r -= X(l, j) * t.delta(j, i);
      EXPECT_NEAR(eps(l, i), r, 1e-12);
    }
}

TEST(PseudoVariables, IdentityAndDiagonalOmega) {
  std::mt19937_64 rng(4);
  const abic::Residuals r{gaussian_data(15, 4, rng)};
  for (int i = 0; i < 4; ++i) {
    const auto z = abic::pseudo_variables(r, Eigen::MatrixXd::Identity(4, 4), i);
    for (int k = 0; k < 4; ++k) {
      if (k == i)
        EXPECT_TRUE(z.z.col(k).isZero(0.0));
      else
        EXPECT_LT((z.z.col(k) - r.eps.col(k)).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
  const Eigen::Vector4d w(0.5, 2.0, 4.0, 1.25);
  const auto z = abic::pseudo_variables(r, w.asDiagonal(), 2);
  for (int k : {0, 1, 3}) EXPECT_LT((z.z.col(k) - r.eps.col(k) / w(k)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PseudoVariables, SolveThenMultiplyRoundTrip) {
  std::mt19937_64 rng(5);
  const abic::Residuals r{gaussian_data(40, 4, rng)};
  const Parameters t = random_theta(4, rng);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const auto z = abic::pseudo_variables(r, t.omega, i);
    std::vector<Eigen::Index> rest;
    for (Eigen::Index k = 0; k < 4; ++k)
      if (k != i) rest.push_back(k);
    const Eigen::MatrixXd back =
        Eigen::MatrixXd(z.z(Eigen::all, rest)) * Eigen::MatrixXd(t.omega(rest, rest)).transpose();
    EXPECT_LT((back - Eigen::MatrixXd(r.eps(Eigen::all, rest))).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PseudoVariables, SingularBlockThrows) {
  std::mt19937_64 rng(6);
  const abic::Residuals r{gaussian_data(10, 3, rng)};
  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(3, 3);
  omega(1, 1) = 0.0;
  EXPECT_THROW(abic::pseudo_variables(r, omega, 0), abic::NumericError);
}

TEST(LeastSquares, PerfectFitIsZero) {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd X = gaussian_data(30, 2, rng);
  X.col(1) = -0.5 * X.col(0);
  Parameters t = Parameters::empty_graph(2);
  t.delta(0, 1) = -0.5;
  t.delta(1, 0) = -2.0;
  // Each column is an exact multiple of the other, so both residuals vanish.
  EXPECT_NEAR(abic::ls_objective(t, X, 3.0), 0.0, 1e-30);
  const auto [gd, go] = abic::ls_gradient(t, X, 3.0);
  EXPECT_LT(gd.cwiseAbs().maxCoeff(), 1e-28);
  EXPECT_LT(go.cwiseAbs().maxCoeff(), 1e-28);
}

TEST(LeastSquares, GaussianEmptyGraphIsHalfMeanSquare) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd X = gaussian_data(50, 3, rng);
  EXPECT_NEAR(abic::ls_objective(Parameters::empty_graph(3), X, 1.0),
              X.squaredNorm() / (2.0 * 50.0), 1e-12);
}

TEST(LeastSquares, MatchesScalarLoopOracle) {
  std::mt19937_64 rng(9);
  for (double beta : {1.0, 2.0, 3.0}) {
    const Eigen::MatrixXd X = gaussian_data(30, 4, rng);
    const Parameters t = random_theta(4, rng);
    const double v = abic::ls_objective(t, X, beta);
    EXPECT_NEAR(v, oracle::ls_loops(t, X, beta), 1e-10 * std::max(1.0, v)) << "beta=" << beta;
  }
}

TEST(LeastSquares, GaussianGradientMatchesClosedForm) {
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd X = gaussian_data(40, 3, rng);
  const Parameters t = random_theta(3, rng);
  const auto score = abic::LeastSquaresScore::at(X, 1.0, t);
  const auto [gd, go] = abic::ls_gradient(t, X, 1.0);
  // ∂/∂δ_ji (1/2n)‖r_i‖² = -(1/n) x_jᵀ r_i and ∂/∂ω_ki through both targets k, i.
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd ri = score.target_residual(t, i);
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      EXPECT_NEAR(gd(j, i), -X.col(j).dot(ri) / 40.0, 1e-10);
      const Eigen::VectorXd rj = score.target_residual(t, j);
      const double expected = -(score.pseudo()[i].z.col(j).dot(ri) +
                                score.pseudo()[j].z.col(i).dot(rj)) / 40.0;
      EXPECT_NEAR(go(j, i), expected, 1e-10);
    }
  }
}

TEST(LeastSquares, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (double beta : {1.0, 3.0})
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd X = gaussian_data(60, 5, rng);
      EXPECT_LT(ls_gradient_error(random_theta(5, rng), X, beta), 1e-5) << "beta=" << beta;
    }
}

TEST(LeastSquares, GaussianVariantAgreesAtShapeOne) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd X = gaussian_data(40, 4, rng);
  const Parameters t = random_theta(4, rng);
  const auto a = abic::LeastSquaresScore::at(X, 1.0, t);
  const auto b = abic::GaussianLeastSquaresScore::at(X, t);
  EXPECT_EQ(a.value(t), b.value(t));
  EXPECT_TRUE(a.gradient(t).first == b.gradient(t).first);
  EXPECT_TRUE(a.gradient(t).second == b.gradient(t).second);
}

TEST(LeastSquares, RejectsShapeBelowOne) {
  std::mt19937_64 rng(13);
  EXPECT_THROW(abic::ls_objective(Parameters::empty_graph(2), gaussian_data(5, 2, rng), 0.5),
               abic::ParameterError);
}

TEST(Penalty, Examples) {
  EXPECT_EQ(abic::penalty_tanh(Parameters::empty_graph(3), 0.05, 100), 0.0);
  Parameters t = Parameters::empty_graph(3);
  t.delta(0, 2) = -0.7;
  EXPECT_EQ(abic::penalty_tanh(t, 0.0, 100), 0.0);
  // n is an integer count, so the slope constant is ln 3 here rather than 1.
  const double c = std::log(3.0);
  EXPECT_NEAR(abic::penalty_tanh(t, 1.0, 3), std::tanh(c * 0.7), 1e-15);
  t.omega(1, 2) = t.omega(2, 1) = 0.2;
  EXPECT_NEAR(abic::penalty_tanh(t, 2.0, 3), 2.0 * (std::tanh(c * 0.7) + std::tanh(c * 0.2)), 1e-15);
}

TEST(Penalty, GradientMatchesFiniteDifferencesAwayFromZero) {
  std::mt19937_64 rng(14);
  const Parameters t = random_theta(4, rng);
  const abic::ParameterLayout layout(4);
  const auto [gd, go] = abic::penalty_tanh_gradient(t, 0.3, 500);
  const Eigen::VectorXd analytic = layout.pack(gd, go);
  auto f = [&](const Eigen::VectorXd& x) { return abic::penalty_tanh(layout.unpack(x), 0.3, 500); };
  const Eigen::VectorXd numeric = oracle::central_difference(f, layout.pack(t), 1e-7);
  EXPECT_LT((analytic - numeric).norm() / numeric.norm(), 1e-6);
}

TEST(Decomposition, EqualsErrorFormForEveryTarget) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 3 + trial % 2;
    const double beta = trial % 3 == 0 ? 1.0 : 0.5 + trial * 0.2;
    const Eigen::MatrixXd X = gaussian_data(10, d, rng);
    const Parameters t = random_theta(d, rng);
    const double direct = oracle::error_loglik(t, X, beta);
    EXPECT_NEAR(abic::error_loglik(t, X, beta), direct, 1e-8 * std::max(1.0, std::abs(direct)));
    for (int i = 0; i < d; ++i)
      EXPECT_NEAR(abic::decomposed_loglik(t, X, beta, i), direct, 1e-8 * std::max(1.0, std::abs(direct)));
  }
}

TEST(Decomposition, DiagonalOmegaConditionalVarianceIsDiagonal) {
  const Eigen::Vector3d w(0.7, 1.9, 3.1);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(abic::conditional_variance(w.asDiagonal(), i), w(i));
}

TEST(Decomposition, GaussianEmptyGraphMatchesNormalLogLikelihood) {
  std::mt19937_64 rng(16);
  const Eigen::MatrixXd X = gaussian_data(12, 3, rng);
  double normal = 0.0;
  for (int l = 0; l < 12; ++l)
    normal += oracle::gaussian_log_pdf(X.row(l).transpose(), Eigen::MatrixXd::Identity(3, 3));
  const double dropped = -12.0 * 1.5 * std::log(2.0 * std::numbers::pi);
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(abic::decomposed_loglik(Parameters::empty_graph(3), X, 1.0, i), normal - dropped, 1e-10);
}

TEST(Decomposition, ConditionalObjectivesRespectBound) {
  std::mt19937_64 rng(17);
  for (double beta : {1.0, 1.5, 3.0}) {
    const Eigen::MatrixXd X = gaussian_data(30, 4, rng);
    const Parameters t = random_theta(4, rng);
    for (int i = 0; i < 4; ++i) {
      const double exact = abic::conditional_loglik(t, X, beta, i);
      const double bound = abic::conditional_loglik_holder(t, X, beta, i);
      if (beta == 1.0)
        EXPECT_NEAR(exact, bound, 1e-10 * std::abs(exact));
      else
        EXPECT_LE(exact, bound + 1e-12 * std::abs(exact));
    }
  }
}

TEST(Holder, EqualityCases) {
  const Eigen::VectorXd constant = Eigen::VectorXd::Constant(17, 0.8);
  for (double beta : {1.0, 1.5, 3.0, 5.0}) {
    const auto g = abic::holder_gap(constant, beta);
    EXPECT_NEAR(g.lhs, g.rhs, 1e-13 * g.lhs);
  }
  std::mt19937_64 rng(18);
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd v(25);
  for (int k = 0; k < 25; ++k) v(k) = e(rng);
  const auto g = abic::holder_gap(v, 1.0);
  EXPECT_NEAR(g.lhs, g.rhs, 1e-13 * g.lhs);
}

TEST(Holder, InequalityOnRandomVectors) {
  std::mt19937_64 rng(19);
  std::exponential_distribution<double> e(1.0);
  for (double beta : {1.5, 3.0, 5.0})
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd v(1 + trial % 40);
      for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = e(rng);
      const auto g = abic::holder_gap(v, beta);
      EXPECT_GE(g.lhs - g.rhs, -1e-12);
    }
}

TEST(Holder, RejectsInvalidInput) {
  EXPECT_THROW(abic::holder_gap(Eigen::VectorXd::Ones(3), 0.5), abic::ParameterError);
  EXPECT_THROW(abic::holder_gap(-Eigen::VectorXd::Ones(3), 2.0), abic::ParameterError);
}
