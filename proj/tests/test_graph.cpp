#include <random>

#include <gtest/gtest.h>

#include "abic/graph.hpp"
#include "abic/simgen.hpp"
#include "oracles.hpp"

using abic::AdmgStructure;
using abic::BinaryMatrix;
using abic::Parameters;

namespace {

AdmgStructure structure(int d, std::initializer_list<std::pair<int, int>> dir,
                        std::initializer_list<std::pair<int, int>> bi) {
  AdmgStructure s = AdmgStructure::empty(d);
  for (auto [j, i] : dir) s.directed(j, i) = 1;
  for (auto [i, j] : bi) s.bidirected(i, j) = s.bidirected(j, i) = 1;
  return s;
}

}  // namespace

TEST(ImpliedCovariance, EmptyGraphGivesOmega) {
  EXPECT_TRUE(abic::implied_covariance(Parameters::empty_graph(3)).isApprox(
      Eigen::MatrixXd::Identity(3, 3)));
}

TEST(ImpliedCovariance, SingleEdgeHandExpansion) {
  const double b = 0.7, w1 = 1.3, w2 = 0.4;
  Parameters t = Parameters::zero(2);
  t.delta(0, 1) = b;
  t.omega(0, 0) = w1;
  t.omega(1, 1) = w2;
  Eigen::MatrixXd expected(2, 2);
  expected << w1, b * w1, b * w1, b * b * w1 + w2;
  EXPECT_LT((abic::implied_covariance(t) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ImpliedCovariance, SymmetricPositiveDefiniteAndMatchesOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Parameters t = oracle::random_bow_free(2 + trial % 5, rng);
    const Eigen::MatrixXd s = abic::implied_covariance(t);
    EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
    EXPECT_LT((s - oracle::covariance(t)).cwiseAbs().maxCoeff(), 1e-10 * s.cwiseAbs().maxCoeff());
  }
}

TEST(Predicates, Acyclicity) {
  EXPECT_TRUE(abic::is_acyclic(BinaryMatrix::Zero(3, 3)));
  EXPECT_FALSE(abic::is_acyclic(structure(2, {{0, 1}, {1, 0}}, {}).directed));
  EXPECT_TRUE(abic::is_acyclic(structure(3, {{0, 1}, {1, 2}}, {}).directed));
  EXPECT_FALSE(abic::is_acyclic(structure(3, {{0, 1}, {1, 2}, {2, 0}}, {}).directed));
}

TEST(Predicates, BowFree) {
  EXPECT_TRUE(abic::is_bow_free(structure(3, {{0, 1}}, {{0, 2}})));
  EXPECT_FALSE(abic::is_bow_free(structure(3, {{0, 1}}, {{0, 1}})));
  EXPECT_TRUE(abic::is_bow_free(AdmgStructure::empty(4)));
}

TEST(Predicates, Ancestral) {
  EXPECT_FALSE(abic::is_ancestral(structure(3, {{0, 1}, {1, 2}}, {{0, 2}})));
  EXPECT_TRUE(abic::is_ancestral(structure(4, {{0, 1}}, {{2, 3}})));
  EXPECT_FALSE(abic::is_ancestral(structure(2, {{0, 1}}, {{0, 1}})));
}

TEST(Predicates, AgreeWithClosureOracleAndNest) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 2000; ++trial) {
    const int d = 2 + trial % 4;
    AdmgStructure s = AdmgStructure::empty(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        s.directed(i, j) = coin(rng);
        if (i < j) s.bidirected(i, j) = s.bidirected(j, i) = coin(rng);
      }
    EXPECT_EQ(abic::is_acyclic(s.directed), oracle::acyclic(s.directed));
    EXPECT_EQ(abic::is_bow_free(s), oracle::bow_free(s));
    EXPECT_EQ(abic::is_ancestral(s), oracle::ancestral(s));
    if (abic::is_ancestral(s)) EXPECT_TRUE(abic::is_bow_free(s));
  }
}

TEST(Threshold, Examples) {
  EXPECT_EQ(abic::threshold(Parameters::zero(3), 0.05), AdmgStructure::empty(3));

  Parameters t = Parameters::empty_graph(3);
  t.delta(0, 1) = 0.8;
  EXPECT_EQ(abic::threshold(t, 0.05), structure(3, {{0, 1}}, {}));

  Parameters b = Parameters::empty_graph(3);
  b.omega(0, 1) = b.omega(1, 0) = 0.3;
  EXPECT_EQ(abic::threshold(b, 0.5).bidirected, BinaryMatrix::Zero(3, 3));
  EXPECT_EQ(abic::threshold(b, 0.05), structure(3, {}, {{0, 1}}));
}

TEST(Threshold, ZeroThresholdIsExactSupport) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Parameters t = oracle::random_bow_free(5, rng);
    const AdmgStructure s = abic::threshold(t, 0.0);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        EXPECT_EQ(s.directed(j, i) != 0, i != j && t.delta(j, i) != 0.0);
        EXPECT_EQ(s.bidirected(j, i) != 0, i != j && t.omega(j, i) != 0.0);
      }
    EXPECT_TRUE(abic::is_bow_free(s));
  }
}

TEST(Validate, RejectsMalformedParameters) {
  Parameters t = Parameters::empty_graph(3);
  t.delta(1, 1) = 0.5;
  EXPECT_THROW(abic::validate(t), abic::ParameterError);
  Parameters u = Parameters::empty_graph(3);
  u.omega(0, 2) = 0.4;
  EXPECT_THROW(abic::validate(u), abic::ParameterError);
  AdmgStructure s = AdmgStructure::empty(3);
  s.bidirected(0, 1) = 1;
  EXPECT_THROW(abic::validate(s), abic::ParameterError);
}

TEST(Layout, PackUnpackRoundTrip) {
  std::mt19937_64 rng(13);
  const Parameters t = oracle::random_bow_free(4, rng);
  const abic::ParameterLayout layout(4);
  EXPECT_EQ(layout.size(), 16 + 10);
  const Parameters back = layout.unpack(layout.pack(t));
  EXPECT_TRUE(back.delta == t.delta);
  EXPECT_TRUE(back.omega == t.omega);
}

TEST(CovarianceRefit, RecoversFromNearbyStart) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    const Parameters truth = oracle::random_bow_free(4, rng);
    const AdmgStructure s = abic::threshold(truth, 0.0);
    Parameters init = truth;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        if (s.directed(j, i)) init.delta(j, i) += jitter(rng);
        if (j < i && s.bidirected(j, i)) init.omega(j, i) = init.omega(i, j) += jitter(rng);
      }
    const auto fit =
        abic::fit_params_to_covariance(s, abic::implied_covariance(truth), init, 1e-20);
    EXPECT_LT((fit.theta.delta - truth.delta).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LT((fit.theta.omega - truth.omega).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(CovarianceRefit, EmptyStructureGivesDiagonalTarget) {
  Eigen::MatrixXd sigma = Eigen::Vector3d(0.5, 2.0, 1.25).asDiagonal();
  const auto fit = abic::fit_params_to_covariance(AdmgStructure::empty(3), sigma,
                                                  Parameters::empty_graph(3), 1e-24);
  EXPECT_LT((fit.theta.omega - sigma).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(fit.theta.delta.isZero(0.0));
}

TEST(CovarianceRefit, RejectsBow) {
  EXPECT_THROW(abic::fit_params_to_covariance(structure(2, {{0, 1}}, {{0, 1}}),
                                              Eigen::MatrixXd::Identity(2, 2),
                                              Parameters::empty_graph(2), 1e-12),
               abic::ParameterError);
}

TEST(CovarianceRefit, PaperWeightRangesAtDimensionFive) {
  int recovered = 0;
  for (int k = 0; k < 6; ++k) {
    abic::simgen::SimConfig c;
    c.d = 5;
    c.seed = 300 + static_cast<std::uint64_t>(k);
    const Parameters truth = abic::simgen::random_admg(c);
    const AdmgStructure s = abic::threshold(truth, 0.0);
    Parameters init = Parameters::zero(5);
    init.omega = abic::implied_covariance(truth).diagonal().asDiagonal();
    const auto fit = abic::fit_params_to_covariance(s, abic::implied_covariance(truth), init, 1e-20);
    const double err = std::max((fit.theta.delta - truth.delta).cwiseAbs().maxCoeff(),
                                (fit.theta.omega - truth.omega).cwiseAbs().maxCoeff());
    recovered += err < 1e-3;
  }
  EXPECT_GE(recovered, 5);
}
