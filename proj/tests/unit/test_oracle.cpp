#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sblem/em.hpp"
#include "sblem/error.hpp"
#include "sblem/kalman.hpp"
#include "sblem/likelihood.hpp"
#include "sblem/oracle.hpp"

using namespace sblem;
using namespace sblem::testing;

TEST(Mask, RoundTrip) {
  for (unsigned long mask = 0; mask < 64; ++mask) {
    EXPECT_EQ(mask_from_indicator(indicator_from_mask(mask, 6)), mask);
  }
  EXPECT_EQ(indicator_from_mask(5, 4), (Indicator{1, 0, 1, 0}));
}

TEST(BruteForceZ, SingleStep) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1, 0.9, 0.9, 0.5);
  Matrix sc(1, 2);
  sc << -1.0, -2.0;
  const OracleResult r = brute_force_z(sc, m);
  EXPECT_EQ(r.best_z, Indicator{0});
  EXPECT_NEAR(r.best_value, -1.0 + std::log(0.5), 1e-15);
  ASSERT_TRUE(r.table);
  EXPECT_EQ(r.table->size(), 2u);
  EXPECT_EQ(r.argmax_set.size(), 1u);
}

TEST(BruteForceZ, TieKeepsEverySequenceAndAgreesWithViterbi) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 3, 0.5, 0.5, 0.5);
  const Matrix sc = Matrix::Zero(3, 2);
  const OracleResult r = brute_force_z(sc, m);
  EXPECT_EQ(r.argmax_set.size(), 8u);
  EXPECT_EQ(r.best_z, viterbi(sc, m));
}

TEST(BruteForceZ, AgreesWithIndependentEnumeration) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto in = make_instance(1100 + s, 3, 2, 9);
    const OracleResult r = brute_force_z(in.model, in.data.Y, in.theta);
    const Matrix sc =
        emission_scores(in.model, in.data.Y, smooth(in.model, in.data.Y, in.theta));
    const Enumerated e = enumerate_z(sc, in.model);
    EXPECT_NEAR(r.best_value, e.best_value, 1e-12 * (1.0 + std::abs(e.best_value)));
    const Indicator v = viterbi(sc, in.model);
    bool member = false;
    for (const auto& z : r.argmax_set) member = member || z == v;
    EXPECT_TRUE(member);
  }
}

TEST(BruteForceZ, CapsThrow) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, kBruteForceCap + 1);
  EXPECT_THROW(brute_force_z(Matrix::Zero(kBruteForceCap + 1, 2), m), SizeCapExceeded);
  EXPECT_THROW(brute_force_z(Matrix::Zero(0, 2), m), InvalidArgument);
}

TEST(BruteForceZ, TableOmittedAboveTableCap) {
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, kOracleTableCap + 1);
  const OracleResult r = brute_force_z(Matrix::Zero(kOracleTableCap + 1, 2), m);
  EXPECT_FALSE(r.table);
}

TEST(GoldenSection, MatchesClosedFormMaximizer) {
  for (double P : {0.5, 3.0, 40.0}) {
    for (int K : {1, 5, 30}) {
      const double g = golden_section_gamma(P, K, 1e-12, 10.0 * P);
      EXPECT_NEAR(g, P / K, 1e-9 * std::max(1.0, P / K));
      EXPECT_NEAR(g, golden_max_gamma_term(P, K, 1e-12, 10.0 * P), 1e-9 * std::max(1.0, P / K));
    }
  }
}

TEST(BruteForceGamma, ConstantAndZeroStats) {
  SufficientStats st;
  st.input_power = Matrix(2, 4);
  st.input_power.row(0).setConstant(2.5);
  st.input_power.row(1).setZero();
  const Vector g = brute_force_gamma(st, 1e-10);
  EXPECT_NEAR(g[0], 2.5, 1e-9);
  EXPECT_DOUBLE_EQ(g[1], 1e-10);
}

TEST(BruteForceGamma, AgreesWithMstep) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto in = make_instance(1200 + s, 4, 2, 10);
    const Vector bf = brute_force_gamma(in.model, in.data.Y, in.theta);
    const SufficientStats st = estep_stats(in.model, smooth(in.model, in.data.Y, in.theta));
    const Vector ms = mstep_gamma(st, kDefaultGammaFloor);
    for (Eigen::Index i = 0; i < bf.size(); ++i) {
      EXPECT_NEAR(bf[i], ms[i], 1e-8 * std::max(1.0, ms[i]));
    }
  }
}

TEST(ExhaustiveMl, ScalarClosedForm) {
  // K = 1, z pinned to 1 by pi1 = 1: the ML gamma is y^2 - sigma2. The z = 0
  // entry is flat in gamma and equals the noise-only density.
  const SystemModel m = scalar_model(0.0, 1.0, 1.0, 1, 0.5, 1.0, 1.0);
  const double y = 2.0;
  const ExhaustiveMlResult r = exhaustive_ml(m, Matrix::Constant(1, 1, y));
  ASSERT_EQ(r.table.size(), 2u);
  EXPECT_EQ(r.z_best, Indicator{1});
  EXPECT_NEAR(r.gamma_best[0], 3.0, 1e-4);
  EXPECT_NEAR(r.L_best, scalar_log_likelihood(y, 1.0, 1.0, 3.0), 1e-9);
  EXPECT_NEAR(r.table[0].L, scalar_log_likelihood(y, 1.0, 1.0, 0.0), 1e-12);
}

TEST(ExhaustiveMl, BoundsTheEmLimit) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto in = make_instance(1300 + s, 2, 2, 5, 0.1, 1);
    EMOptions opts;
    opts.max_iters = 500;
    const EMTrace tr = run_em(in.model, in.data.Y, default_initial_theta(in.model), opts);
    const ExhaustiveMlResult r = exhaustive_ml(in.model, in.data.Y, {}, tr.theta_final);
    EXPECT_EQ(r.table.size(), 32u);
    EXPECT_GE(r.L_best, tr.L_final - 1e-9);
    EXPECT_LE(r.L_best, likelihood_upper_bound(in.model));
  }
}

TEST(ExhaustiveMl, CapsThrow) {
  const auto big_k = make_instance(1, 2, 1, kExhaustiveMlMaxK + 1);
  EXPECT_THROW(exhaustive_ml(big_k.model, big_k.data.Y), SizeCapExceeded);
  const auto big_n = make_instance(1, kExhaustiveMlMaxN + 1, 1, 2);
  EXPECT_THROW(exhaustive_ml(big_n.model, big_n.data.Y), SizeCapExceeded);
}

TEST(GammaOnlyEm, NeverDecreasesLikelihood) {
  const auto in = make_instance(1400, 3, 2, 6);
  const Indicator z(6, 1);
  const double L0 = log_likelihood(in.model, in.data.Y, Theta{Vector::Ones(3), z});
  const auto [gamma, L] = gamma_only_em(in.model, in.data.Y, z, Vector::Ones(3), {});
  EXPECT_GE(L, L0);
  EXPECT_NEAR(L, log_likelihood(in.model, in.data.Y, Theta{gamma, z}), 1e-9 * (1.0 + std::abs(L)));
}
