#include <array>

#include <gtest/gtest.h>

#include "edgemon/chain.hpp"
#include "edgemon/error.hpp"

using namespace edgemon;

namespace {

using Mat = std::array<std::array<double, 2>, 2>;

Mat mul(const Mat& a, const Mat& b) {
  Mat c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat one_step(double phi, double psi) { return {{{phi, 1 - phi}, {1 - psi, psi}}}; }

}  // namespace

TEST(Stationary, PaperParameters) {
  const auto pi = stationary(TransitionMatrix(0.85, 0.90));
  EXPECT_NEAR(pi.pi0, 0.4, 1e-12);
  EXPECT_NEAR(pi.pi1, 0.6, 1e-12);
}

TEST(Stationary, SymmetricAndSkewed) {
  EXPECT_NEAR(stationary(TransitionMatrix(0.5, 0.5)).pi0, 0.5, 1e-15);
  EXPECT_NEAR(stationary(TransitionMatrix(0.99, 0.01)).pi0, 0.99, 1e-12);
}

TEST(Stationary, IsFixedPoint) {
  for (double phi : {0.1, 0.5, 0.85, 0.97}) {
    for (double psi : {0.05, 0.4, 0.9}) {
      const auto pi = stationary(TransitionMatrix(phi, psi));
      EXPECT_NEAR(pi.pi0 * phi + pi.pi1 * (1 - psi), pi.pi0, 1e-14);
      EXPECT_NEAR(pi.pi0 + pi.pi1, 1.0, 1e-15);
    }
  }
}

TEST(TransitionMatrixTest, RejectsClosedEndpoints) {
  EXPECT_THROW(TransitionMatrix(0.0, 0.5), ValidationError);
  EXPECT_THROW(TransitionMatrix(0.5, 1.0), ValidationError);
  EXPECT_THROW(TransitionMatrix(-0.1, 0.5), ValidationError);
  EXPECT_NO_THROW(TransitionMatrix(1e-9, 1 - 1e-9));
}

TEST(StepEntries, Examples) {
  const TransitionMatrix p(0.85, 0.90);
  auto e1 = step_entries(p, 1);
  EXPECT_DOUBLE_EQ(e1.phi_delta, 0.85);
  EXPECT_DOUBLE_EQ(e1.psi_delta, 0.90);
  auto e2 = step_entries(p, 2);
  EXPECT_NEAR(e2.phi_delta, 0.7375, 1e-14);
  EXPECT_NEAR(e2.psi_delta, 0.825, 1e-14);
  auto e200 = step_entries(p, 200);
  EXPECT_NEAR(e200.phi_delta, 0.4, 1e-12);
  EXPECT_NEAR(e200.psi_delta, 0.6, 1e-12);
  EXPECT_THROW(step_entries(p, 0), ValidationError);
}

TEST(StepEntries, MatchesMatrixPower) {
  for (auto [phi, psi] : {std::pair{0.85, 0.90}, {0.3, 0.2}, {0.6, 0.95}, {0.05, 0.05}}) {
    const TransitionMatrix p(phi, psi);
    Mat acc = one_step(phi, psi);
    for (int d = 1; d <= 50; ++d) {
      const auto e = step_entries(p, d);
      EXPECT_NEAR(e.phi_delta, acc[0][0], 1e-10) << "delta " << d;
      EXPECT_NEAR(e.psi_delta, acc[1][1], 1e-10) << "delta " << d;
      acc = mul(acc, one_step(phi, psi));
    }
  }
}

TEST(IdleProb, Examples) {
  const TransitionMatrix p(0.85, 0.90);
  EXPECT_DOUBLE_EQ(idle_prob(p, 0, 1), 0.85);
  EXPECT_NEAR(idle_prob(p, 1, 1), 0.10, 1e-15);
  EXPECT_NEAR(idle_prob(p, 1, 2), 0.175, 1e-14);
}

TEST(IdleProb, MonotoneTowardsStationary) {
  const TransitionMatrix p(0.85, 0.90);  // r = 0.75 > 0
  for (int d = 1; d < 100; ++d) {
    EXPECT_GE(idle_prob(p, 0, d), idle_prob(p, 0, d + 1));
    EXPECT_LE(idle_prob(p, 1, d), idle_prob(p, 1, d + 1));
  }
  EXPECT_NEAR(idle_prob(p, 0, 400), 0.4, 1e-12);
  EXPECT_NEAR(idle_prob(p, 1, 400), 0.4, 1e-12);
}

TEST(IdleProbTableTest, AgreesWithDirectEvaluation) {
  const TransitionMatrix p(0.7, 0.8);
  const IdleProbTable t(p, 12);
  for (int b = 0; b < 2; ++b)
    for (int a = 1; a <= 12; ++a) EXPECT_DOUBLE_EQ(t(b, a), idle_prob(p, b, a));
}
