#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "oracles.hpp"
#include "sblem/em.hpp"
#include "sblem/error.hpp"
#include "sblem/kalman.hpp"
#include "sblem/likelihood.hpp"

using namespace sblem;
using namespace sblem::testing;

namespace {

Matrix scores_from(std::initializer_list<std::pair<double, double>> rows) {
  Matrix s(static_cast<Eigen::Index>(rows.size()), 2);
  Eigen::Index k = 0;
  for (auto [a, b] : rows) {
    s(k, 0) = a;
    s(k, 1) = b;
    ++k;
  }
  return s;
}

// One step of the scalar EM map with D = 0, A = 1, z = [1].
double scalar_em_map(double g, double y, double s2) {
  const double post_mean = g * y / (g + s2);
  const double post_var = g * s2 / (g + s2);
  return post_mean * post_mean + post_var;
}

}  // namespace

TEST(EstepStats, InputPowerMatchesBatchPosterior) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto in = random_instance(500 + s, 4, 3, 10);
    const SufficientStats st = estep_stats(in.model, smooth(in.model, in.data.Y, in.theta));
    const Matrix ref =
        batch_input_power(in.model, batch_posterior(in.model, in.data.Y, in.theta));
    EXPECT_LE((st.input_power - ref).cwiseAbs().maxCoeff(),
              1e-8 * (1.0 + ref.cwiseAbs().maxCoeff()));
  }
}

TEST(MstepGamma, MeanOfInputPowerWithFloor) {
  SufficientStats st;
  st.input_power = Matrix(2, 4);
  st.input_power << 1, 2, 3, 6, 0, 0, 0, 0;
  const Vector g = mstep_gamma(st, 1e-9);
  EXPECT_DOUBLE_EQ(g[0], 3.0);
  EXPECT_DOUBLE_EQ(g[1], 1e-9);
}

TEST(GammaTerm, MinusInfinityAtZero) {
  SufficientStats st;
  st.input_power = Matrix::Ones(1, 3);
  EXPECT_EQ(gamma_term(st, Vector::Zero(1)), -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(gamma_term(st, Vector::Ones(1)), gamma_term_coord(3.0, 3, 1.0), 1e-14);
}

TEST(EmissionScores, ZeroStateIsNoiseOnlyDensity) {
  const auto in = make_instance(3, 3, 2, 5);
  const Matrix sc = emission_scores(in.model, in.data.Y, smooth(in.model, in.data.Y, in.theta));
  for (int k = 0; k < 5; ++k) {
    const double expected = -std::log(2.0 * std::numbers::pi * in.model.sigma2) -
                            in.data.Y.col(k).squaredNorm() / (2.0 * in.model.sigma2);
    EXPECT_NEAR(sc(k, 0), expected, 1e-12 * (1.0 + std::abs(expected)));
  }
}

TEST(EmissionScores, ScalarObservedState) {
  // Posterior of x given y under D = 0, A = 1: E[(y - x)^2] = (y - mu)^2 + v.
  const SystemModel m = scalar_model(0.0, 1.0, 0.5, 1);
  const double g = 2.0;
  const double y = 1.2;
  const Matrix Y = Matrix::Constant(1, 1, y);
  const Theta th{Vector::Constant(1, g), {1}};
  const Matrix sc = emission_scores(m, Y, smooth(m, Y, th));
  const double mu = g * y / (g + 0.5);
  const double v = g * 0.5 / (g + 0.5);
  const double expected =
      -0.5 * std::log(2.0 * std::numbers::pi * 0.5) - ((y - mu) * (y - mu) + v) / (2.0 * 0.5);
  EXPECT_NEAR(sc(0, 1), expected, 1e-14);
}

TEST(Viterbi, SingleStepTieGoesToObserved) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1, 0.9, 0.9, 0.5);
  EXPECT_EQ(viterbi(scores_from({{-1.0, -1.0}}), m), Indicator{1});
  EXPECT_EQ(viterbi(scores_from({{-0.5, -1.0}}), m), Indicator{0});
}

TEST(Viterbi, UniformChainFactorizes) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 4, 0.5, 0.5, 0.5);
  const Matrix sc = scores_from({{0.0, 1.0}, {2.0, 1.0}, {-1.0, 0.5}, {3.0, 2.9}});
  EXPECT_EQ(viterbi(sc, m), (Indicator{1, 0, 1, 0}));
}

TEST(Viterbi, StickyChainOverridesWeakEvidence) {
  // Strong persistence: the middle step prefers 0 by a small margin but two
  // transitions would cost far more.
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 3, 0.99, 0.99, 0.5);
  const Matrix sc = scores_from({{0.0, 2.0}, {0.3, 0.0}, {0.0, 2.0}});
  EXPECT_EQ(viterbi(sc, m), (Indicator{1, 1, 1}));
}

TEST(Viterbi, MatchesEnumeration) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto in = make_instance(600 + s, 3, 2, 10);
    const Matrix sc =
        emission_scores(in.model, in.data.Y, smooth(in.model, in.data.Y, in.theta));
    const Indicator z = viterbi(sc, in.model);
    const Enumerated best = enumerate_z(sc, in.model);
    EXPECT_NEAR(z_objective(sc, in.model, z), best.best_value, 1e-12 * (1.0 + std::abs(best.best_value)));
    EXPECT_NEAR(z_value(sc, in.model, z), z_objective(sc, in.model, z), 1e-12);
  }
}

TEST(Viterbi, RejectsBadTable) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1);
  EXPECT_THROW(viterbi(Matrix(0, 2), m), InvalidArgument);
  EXPECT_THROW(viterbi(Matrix::Zero(2, 3), m), InvalidArgument);
}

TEST(LogPriorZ, MatchesHandComputation) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 3, 0.8, 0.7, 0.4);
  EXPECT_NEAR(log_prior_z(m, {1, 1, 0}), std::log(0.4 * 0.7 * 0.3), 1e-15);
  EXPECT_NEAR(log_prior_z(m, {0, 0, 1}), chain_log_prior(m, {0, 0, 1}), 1e-15);
  const SystemModel absorbing = scalar_model(0.0, 1.0, 1.0, 2, 0.5, 1.0, 1.0);
  EXPECT_EQ(log_prior_z(absorbing, {0, 0}), -std::numeric_limits<double>::infinity());
}

TEST(QFunction, AscentAlongEmStep) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto in = make_instance(700 + s, 3, 2, 8);
    const Theta next = em_iterate(in.model, in.data.Y, in.theta);
    const double q_next = q_function(in.model, in.data.Y, next, in.theta);
    const double q_self = q_function(in.model, in.data.Y, in.theta, in.theta);
    EXPECT_GE(q_next, q_self - 1e-10 * (1.0 + std::abs(q_self)));
  }
}

TEST(QFunction, GibbsInequalityWithSharedIndicator) {
  // L(theta) - L(ref) >= Q(theta; ref) - Q(ref; ref) when z is shared.
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto in = make_instance(800 + s, 3, 2, 6);
    Theta other = in.theta;
    other.gamma = in.theta.gamma.cwiseProduct(Vector::LinSpaced(3, 0.3, 3.0));
    const double dL = log_likelihood(in.model, in.data.Y, other) -
                      log_likelihood(in.model, in.data.Y, in.theta);
    const double dQ = q_function(in.model, in.data.Y, other, in.theta) -
                      q_function(in.model, in.data.Y, in.theta, in.theta);
    EXPECT_GE(dL, dQ - 1e-9 * (1.0 + std::abs(dL)));
  }
}

TEST(EmIterate, ScalarMapFormula) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1, 0.5, 1.0, 1.0);
  const double y = 2.3;
  for (double g : {0.1, 1.0, 4.0}) {
    const Theta next =
        em_iterate(m, Matrix::Constant(1, 1, y), Theta{Vector::Constant(1, g), {1}});
    EXPECT_NEAR(next.gamma[0], scalar_em_map(g, y, 1.0), 1e-14);
    EXPECT_EQ(next.z, Indicator{1});
  }
}

TEST(EmIterate, ZeroIndicatorWithNoEvidenceIsFixedPoint) {
  // With z = 0 the posterior is the prior: E[u^2] = gamma, so gamma stays put.
  // Scores favour 0 when y is small relative to the predicted emission.
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 3, 0.9, 0.9, 0.1);
  const Matrix Y = Matrix::Zero(1, 3);
  const Theta th{Vector::Constant(1, 4.0), Indicator(3, 0)};
  const Theta next = em_iterate(m, Y, th);
  EXPECT_NEAR(next.gamma[0], 4.0, 1e-14);
  EXPECT_EQ(next.z, th.z);
}

TEST(FisherGradient, MatchesDirectGradient) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto in = random_instance(900 + s, 4, 3, 10);
    const SufficientStats st = estep_stats(in.model, smooth(in.model, in.data.Y, in.theta));
    const Vector fg = fisher_gradient(st, in.theta.gamma);
    const Vector g = grad_gamma(in.model, in.data.Y, in.theta);
    EXPECT_LE((fg - g).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + g.cwiseAbs().maxCoeff()));
  }
}

TEST(RunEm, FixedPointStopsAfterOneIteration) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1, 0.5, 1.0, 1.0);
  const double y = 2.0;
  EMOptions opts;
  const EMTrace tr = run_em(m, Matrix::Constant(1, 1, y),
                            Theta{Vector::Constant(1, y * y - 1.0), {1}}, opts);
  EXPECT_EQ(tr.termination, Termination::kConverged);
  EXPECT_EQ(tr.records.size(), 1u);
}

TEST(RunEm, ScalarConvergesToAnalyticFixedPoint) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1, 0.5, 1.0, 1.0);
  const double y = 1.6;
  EMOptions opts;
  opts.max_iters = 200000;
  opts.tol_gamma = 1e-12;
  opts.tol_rel_L = 1e-15;
  const EMTrace tr =
      run_em(m, Matrix::Constant(1, 1, y), Theta{Vector::Ones(1), {1}}, opts);
  EXPECT_NEAR(tr.theta_final.gamma[0], y * y - 1.0, 1e-6);
}

TEST(RunEm, TraceIsConsistentAndAscending) {
  const auto in = make_instance(41, 3, 2, 10);
  EMOptions opts;
  opts.max_iters = 200;
  const EMTrace tr = run_em(in.model, in.data.Y, default_initial_theta(in.model), opts);
  ASSERT_FALSE(tr.records.empty());
  EXPECT_NE(tr.termination, Termination::kNonMonotone);
  for (std::size_t r = 0; r < tr.records.size(); ++r) {
    const TraceRecord& rec = tr.records[r];
    EXPECT_EQ(rec.iter, static_cast<int>(r));
    EXPECT_NEAR(rec.L, log_likelihood(in.model, in.data.Y, rec.theta),
                1e-9 * (1.0 + std::abs(rec.L)));
    EXPECT_GE(rec.q_next, rec.q_self - 1e-10 * (1.0 + std::abs(rec.q_self)));
    if (r + 1 < tr.records.size()) {
      const double j0 = rec.L + rec.log_prior;
      const double j1 = tr.records[r + 1].L + tr.records[r + 1].log_prior;
      EXPECT_GE(j1, j0 - 1e-10 * (1.0 + std::abs(j0)));
    }
  }
}

TEST(RunEm, RejectsBadOptions) {
  const auto in = make_instance(1, 2, 1, 3);
  EMOptions opts;
  opts.max_iters = 0;
  EXPECT_THROW(run_em(in.model, in.data.Y, in.theta, opts), InvalidArgument);
  opts = {};
  opts.tol_gamma = 0.0;
  EXPECT_THROW(run_em(in.model, in.data.Y, in.theta, opts), InvalidArgument);
}

TEST(Termination, StringRoundTrip) {
  for (Termination t :
       {Termination::kConverged, Termination::kMaxIterations, Termination::kNonMonotone}) {
    EXPECT_EQ(termination_from_string(to_string(t)), t);
  }
  EXPECT_THROW(termination_from_string("bogus"), InvalidArgument);
}
