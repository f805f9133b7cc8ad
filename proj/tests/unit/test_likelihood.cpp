#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "sblem/error.hpp"
#include "sblem/likelihood.hpp"

using namespace sblem;
using namespace sblem::testing;

TEST(Dtilde, SingleStepIsIdentity) {
  const SystemModel m = make_instance(1, 3, 2, 1).model;
  EXPECT_TRUE(build_dtilde(m).isApprox(Matrix::Identity(3, 3)));
}

TEST(Dtilde, ZeroDynamicsIsIdentity) {
  SystemModel m = make_instance(1, 2, 1, 4).model;
  m.D.setZero();
  EXPECT_TRUE(build_dtilde(m).isApprox(Matrix::Identity(8, 8)));
}

TEST(Dtilde, ScalarTwoStep) {
  const SystemModel m = scalar_model(0.5, 1.0, 1.0, 2);
  Matrix expected(2, 2);
  expected << 1.0, 0.0, 0.5, 1.0;
  EXPECT_EQ(build_dtilde(m), expected);
}

TEST(BuildRy, ZeroIndicatorGivesZero) {
  const auto in = make_instance(3, 3, 2, 5);
  const StackedCovariance c = build_ry(in.model, Theta{in.theta.gamma, Indicator(5, 0)});
  EXPECT_TRUE(c.ry.isZero(0.0));
}

TEST(BuildRy, ScalarCases) {
  const double a = 1.7;
  const double g = 0.6;
  const double d = -0.4;
  SystemModel m = scalar_model(0.0, a, 1.0, 1);
  EXPECT_NEAR(build_ry(m, Theta{Vector::Constant(1, g), {1}}).ry(0, 0), a * a * g, 1e-15);

  m = scalar_model(d, a, 1.0, 2);
  Matrix expected(2, 2);
  expected << 1.0, d, d, 1.0 + d * d;
  expected *= a * a * g;
  EXPECT_TRUE(build_ry(m, Theta{Vector::Constant(1, g), {1, 1}}).ry.isApprox(expected, 1e-14));
}

TEST(BuildRy, MatchesSampleCovarianceOfNoiselessDraws) {
  const double a = 1.3;
  const double g = 0.8;
  const double d = 0.6;
  const SystemModel m = scalar_model(d, a, 1.0, 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, std::sqrt(g));
  Matrix C = Matrix::Zero(2, 2);
  const int draws = 1000000;
  for (int s = 0; s < draws; ++s) {
    const double x1 = normal(rng);
    const double x2 = d * x1 + normal(rng);
    const Vector y = Eigen::Vector2d(a * x1, a * x2);
    C += y * y.transpose();
  }
  C /= draws;
  const Matrix R = build_ry(m, Theta{Vector::Constant(1, g), {1, 1}}).ry;
  // Entries are O(1); sampling error ~ 3 * O(1) / sqrt(1e6).
  EXPECT_LE((C - R).cwiseAbs().maxCoeff(), 0.02);
}

TEST(BuildRy, SymmetricPositiveSemidefinite) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto in = random_instance(s, 5, 3, 12);
    const Matrix R = build_ry(in.model, in.theta).ry;
    const double norm = R.norm();
    EXPECT_LE((R - R.transpose()).norm(), 1e-12 * std::max(norm, 1.0));
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(R).eigenvalues().minCoeff();
    EXPECT_GE(lmin, -1e-10 * std::max(norm, 1.0));
  }
}

TEST(BuildRy, RejectsMismatchedTheta) {
  const auto in = make_instance(1, 3, 2, 5);
  EXPECT_THROW(build_ry(in.model, Theta{Vector::Ones(2), Indicator(5, 1)}), InvalidArgument);
}

TEST(LogLikelihood, ZeroIndicatorClosedForm) {
  const auto in = make_instance(4, 3, 2, 6);
  const Theta th{in.theta.gamma, Indicator(6, 0)};
  const double s2 = in.model.sigma2;
  const double expected = -0.5 * 12 * std::log(2.0 * std::numbers::pi * s2) -
                          in.data.Y.squaredNorm() / (2.0 * s2);
  EXPECT_NEAR(log_likelihood(in.model, in.data.Y, th), expected, 1e-10 * std::abs(expected));
  EXPECT_NEAR(log_likelihood_innovations(in.model, in.data.Y, th), expected,
              1e-10 * std::abs(expected));
}

TEST(LogLikelihood, ScalarClosedForm) {
  const SystemModel m = scalar_model(0.0, 1.0, 0.7, 1);
  for (double g : {0.0, 0.3, 2.0}) {
    for (double y : {-1.5, 0.2, 3.0}) {
      const Matrix Y = Matrix::Constant(1, 1, y);
      const Theta th{Vector::Constant(1, g), {1}};
      EXPECT_NEAR(log_likelihood(m, Y, th), scalar_log_likelihood(y, 1.0, 0.7, g), 1e-13);
      EXPECT_NEAR(log_likelihood_innovations(m, Y, th), scalar_log_likelihood(y, 1.0, 0.7, g),
                  1e-13);
    }
  }
}

TEST(LogLikelihood, SingleStepIsDirectGaussianDensity) {
  const auto in = make_instance(8, 3, 2, 1);
  const Theta th{in.theta.gamma, {1}};
  const Matrix S = in.model.A * th.gamma.asDiagonal() * in.model.A.transpose() +
                   in.model.sigma2 * Matrix::Identity(2, 2);
  const Vector y = in.data.Y.col(0);
  const double direct = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(S.determinant()) -
                        0.5 * y.dot(S.ldlt().solve(y));
  EXPECT_NEAR(log_likelihood_innovations(in.model, in.data.Y, th), direct, 1e-12);
}

TEST(LogLikelihood, DenseMatchesInnovationsAndEntrywiseOracle) {
  for (auto [n, m, K] : {std::tuple{3, 2, 5}, std::tuple{4, 2, 20}}) {
    const auto in = make_instance(static_cast<std::uint64_t>(n * 100 + K), n, m, K);
    const double dense = log_likelihood(in.model, in.data.Y, in.theta);
    EXPECT_NEAR(dense, log_likelihood_innovations(in.model, in.data.Y, in.theta),
                1e-8 * (1.0 + std::abs(dense)));
    EXPECT_NEAR(dense, batch_log_likelihood(in.model, in.data.Y, in.theta),
                1e-8 * (1.0 + std::abs(dense)));
  }
}

TEST(LogLikelihood, AutoSwitchesToInnovationsOutsideEnvelope) {
  const auto in = make_instance(5, 2, 3, 200);  // Km = 600
  const double L = log_likelihood_auto(in.model, in.data.Y, in.theta);
  EXPECT_DOUBLE_EQ(L, log_likelihood_innovations(in.model, in.data.Y, in.theta));
}

TEST(LogLikelihood, NeverExceedsUpperBound) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto in = random_instance(s, 4, 3, 10);
    EXPECT_LE(log_likelihood(in.model, in.data.Y, in.theta), likelihood_upper_bound(in.model));
  }
}

TEST(LogLikelihood, DecreasingAlongLargeScalings) {
  const auto in = make_instance(12, 3, 2, 8);
  Theta th = in.theta;
  th.z.assign(8, 1);
  double prev = log_likelihood(in.model, in.data.Y, Theta{100.0 * th.gamma, th.z});
  for (double t : {1e3, 1e4, 1e5}) {
    const double L = log_likelihood(in.model, in.data.Y, Theta{t * th.gamma, th.z});
    EXPECT_LT(L, prev);
    prev = L;
  }
}

TEST(GradGamma, ZeroIndicatorGivesZero) {
  const auto in = make_instance(2, 3, 2, 5);
  EXPECT_TRUE(grad_gamma(in.model, in.data.Y, Theta{in.theta.gamma, Indicator(5, 0)}).isZero(0.0));
}

TEST(GradGamma, ScalarHandDerivativeAndRoot) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1);
  const double y = 1.8;
  const Matrix Y = Matrix::Constant(1, 1, y);
  for (double g : {0.1, 1.0, 5.0}) {
    const Vector grad = grad_gamma(m, Y, Theta{Vector::Constant(1, g), {1}});
    EXPECT_NEAR(grad[0], scalar_dlogl(y, 1.0, 1.0, g), 1e-14);
  }
  const Vector at_root = grad_gamma(m, Y, Theta{Vector::Constant(1, y * y - 1.0), {1}});
  EXPECT_NEAR(at_root[0], 0.0, 1e-15);
}

TEST(GradGamma, MatchesLibraryFiniteDifferences) {
  const auto in = make_instance(31, 3, 2, 6);
  const Vector g = grad_gamma(in.model, in.data.Y, in.theta);
  const Vector fd = grad_gamma_fd(in.model, in.data.Y, in.theta,
                                  relative_fd_steps(in.theta.gamma, 1e-6));
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(g[i], fd[i], 1e-5 * std::max(1.0, std::abs(fd[i])));
  }
}

TEST(GradGamma, SweepAgainstEntrywiseOracle) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto in = random_instance(100 + s, 5, 3, 10);
    const Vector g = grad_gamma(in.model, in.data.Y, in.theta);
    const Vector fd = fd_gradient(in.model, in.data.Y, in.theta, 1e-3);
    EXPECT_LE((g - fd).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + g.cwiseAbs().maxCoeff())) << s;
  }
}

TEST(GradGammaFd, ScalarCentralDifferenceOrder) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1);
  const Matrix Y = Matrix::Constant(1, 1, 1.4);
  const Theta th{Vector::Constant(1, 0.5), {1}};
  const double exact = scalar_dlogl(1.4, 1.0, 1.0, 0.5);
  const double e1 = std::abs(grad_gamma_fd(m, Y, th, 1e-2)[0] - exact);
  const double e2 = std::abs(grad_gamma_fd(m, Y, th, 5e-3)[0] - exact);
  // O(h^2): halving h divides the error by about four.
  EXPECT_NEAR(e1 / e2, 4.0, 0.2);
}

TEST(GradGammaFd, ZeroIndicatorAndBoundary) {
  const auto in = make_instance(6, 3, 2, 5);
  EXPECT_LE(grad_gamma_fd(in.model, in.data.Y, Theta{in.theta.gamma, Indicator(5, 0)}, 1e-6)
                .cwiseAbs()
                .maxCoeff(),
            1e-9);
  Theta th = in.theta;
  th.z.assign(5, 1);
  th.gamma[0] = 0.0;
  const Vector fd = grad_gamma_fd(in.model, in.data.Y, th, 1e-6);
  EXPECT_TRUE(fd.allFinite());
  EXPECT_NEAR(fd[0], grad_gamma(in.model, in.data.Y, th)[0], 1e-4);
}

TEST(GradGammaFd, RejectsNonPositiveStep) {
  const auto in = make_instance(6, 3, 2, 5);
  EXPECT_THROW(grad_gamma_fd(in.model, in.data.Y, in.theta, 0.0), InvalidArgument);
  EXPECT_THROW(grad_gamma_fd(in.model, in.data.Y, in.theta, -1.0), InvalidArgument);
}

TEST(StackObservations, ColumnMajor) {
  Matrix Y(2, 3);
  Y << 1, 2, 3, 4, 5, 6;
  Vector expected(6);
  expected << 1, 4, 2, 5, 3, 6;
  EXPECT_EQ(stack_observations(Y), expected);
}
