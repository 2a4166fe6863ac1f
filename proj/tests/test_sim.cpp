#include <cmath>

#include <gtest/gtest.h>

#include "edgemon/rng.hpp"
#include "edgemon/sim.hpp"

using namespace edgemon;

namespace {

RunConfig config(int n, int k, double lambda, std::int64_t t, std::uint64_t seed = 7, int m = 2) {
  RunConfig rc;
  rc.system = SystemConfig::homogeneous(n, k, lambda, 0.85, 0.90, 20);
  rc.channels = m;
  rc.horizon = t;
  rc.seed = seed;
  return rc;
}

}  // namespace

TEST(RandomStreamTest, IndependentAndReproducible) {
  RandomStream a(1, StreamKind::kServer, 0), b(1, StreamKind::kServer, 0);
  RandomStream c(1, StreamKind::kServer, 1), d(1, StreamKind::kArrival, 0), e(2, StreamKind::kServer, 0);
  int same_c = 0, same_d = 0, same_e = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    same_c += x == c.uniform();
    same_d += x == d.uniform();
    same_e += x == e.uniform();
  }
  EXPECT_EQ(same_c + same_d + same_e, 0);
}

TEST(SystemConfigTest, Validation) {
  EXPECT_THROW(SystemConfig::homogeneous(3, 0, 0.3, 0.85, 0.9, 20).validate(), ValidationError);
  EXPECT_THROW(SystemConfig::homogeneous(0, 2, 0.3, 0.85, 0.9, 20).validate(), ValidationError);
  EXPECT_THROW(SystemConfig::homogeneous(3, 2, 1.3, 0.85, 0.9, 20).validate(), ValidationError);
  auto rc = config(2, 2, 0.3, 100);
  rc.warmup = 100;
  EXPECT_THROW(Simulator{rc}, ValidationError);
}

TEST(SimulatorTest, DeterministicForSeed) {
  auto rc = config(4, 3, 0.3, 20'000);
  rc.series_window = 1000;
  const auto a = run(rc, RoundRobinPolicy{});
  const auto b = run(rc, RoundRobinPolicy{});
  EXPECT_EQ(a, b);
  rc.seed = 8;
  EXPECT_NE(run(rc, RoundRobinPolicy{}).successes, a.successes);
}

TEST(SimulatorTest, ConservationAndCounters) {
  auto rc = config(5, 3, 0.4, 30'000);
  const auto m = run(rc, RoundRobinPolicy{});
  EXPECT_EQ(m.successes + m.drops, m.arrivals);
  EXPECT_EQ(m.measured_slots, 27'000);
  EXPECT_EQ(m.budget_checked_slots, 30'000);
  EXPECT_EQ(m.queries_used, 2 * 27'000);
  EXPECT_NEAR(static_cast<double>(m.arrivals) / (5.0 * 27'000), 0.4, 0.01);
}

TEST(SimulatorTest, InitialStatusFollowsStationaryLaw) {
  int idle = 0;
  const int trials = 400;
  for (int s = 0; s < trials; ++s) {
    Simulator sim(config(10, 5, 0.3, 10, static_cast<std::uint64_t>(s)));
    for (int n = 0; n < 10; ++n)
      for (int k = 0; k < 5; ++k) {
        idle += sim.true_status(n, k) == 0;
        EXPECT_EQ(sim.beliefs()[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)].aoi, 1);
      }
  }
  EXPECT_NEAR(idle / (trials * 50.0), 0.4, 0.01);
}

TEST(SimulatorTest, NoArrivalsMeansAgeSaturates) {
  auto rc = config(2, 2, 0.0, 100);
  Simulator sim(rc);
  SlotEvents total;
  for (int t = 0; t < 100; ++t) {
    const auto ev = sim.step({});
    total.arrivals += ev.arrivals;
    total.successes += ev.successes;
  }
  EXPECT_EQ(total.arrivals, 0);
  EXPECT_EQ(total.successes, 0);
  for (const auto& b : sim.beliefs())
    for (const auto& s : b) EXPECT_EQ(s.aoi, 20);
}

TEST(SimulatorTest, QueryRefreshesBelief) {
  auto rc = config(2, 2, 0.0, 100);
  Simulator sim(rc);
  for (int t = 0; t < 5; ++t) sim.step({});
  const auto truth = sim.true_status(1, 1);
  sim.step({{{1, 1}}});
  EXPECT_EQ(sim.beliefs()[1][1], (InfoState{truth, 1}));
  EXPECT_EQ(sim.beliefs()[0][0].aoi, 7);
}

TEST(SimulatorTest, BudgetViolationIsFatal) {
  Simulator sim(config(3, 2, 0.3, 100, 1, 1));
  EXPECT_THROW(sim.step({{{0, 0}, {1, 0}}}), BudgetViolation);
  EXPECT_THROW(sim.step({{{0, 0}, {0, 1}}}), BudgetViolation);
  EXPECT_NO_THROW(sim.step({{{2, 1}}}));
}

TEST(SimulatorTest, SingleServerFullLoadMatchesStationaryOracle) {
  auto rc = config(1, 1, 1.0, 1'000'000, 3, 0);
  const auto m = run(rc, NeverQueryPolicy{});
  EXPECT_NEAR(m.success_rate, 0.4, 0.01);
}

TEST(SimulatorTest, ChainStatistics) {
  auto rc = config(1, 2, 0.3, 1'000'000, 11, 0);
  Simulator sim(rc);
  long idle[2] = {0, 0}, stay_idle[2] = {0, 0}, stay_busy[2] = {0, 0}, was_idle[2] = {0, 0}, was_busy[2] = {0, 0};
  for (std::int64_t t = 0; t < rc.horizon; ++t) {
    std::uint8_t before[2] = {sim.true_status(0, 0), sim.true_status(0, 1)};
    sim.step({});
    for (int k = 0; k < 2; ++k) {
      const auto now = sim.true_status(0, k);
      idle[k] += now == 0;
      if (before[k] == 0) {
        ++was_idle[k];
        stay_idle[k] += now == 0;
      } else {
        ++was_busy[k];
        stay_busy[k] += now == 1;
      }
    }
  }
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(idle[k] / 1e6, 0.4, 0.01);
    EXPECT_NEAR(static_cast<double>(stay_idle[k]) / static_cast<double>(was_idle[k]), 0.85, 0.01);
    EXPECT_NEAR(static_cast<double>(stay_busy[k]) / static_cast<double>(was_busy[k]), 0.90, 0.01);
  }
}

TEST(SimulatorTest, BeliefsAreCalibrated) {
  auto rc = config(1, 2, 0.3, 300'000, 5, 0);
  Simulator sim(rc);
  std::vector<long> hits(2 * 20, 0), total(2 * 20, 0);
  for (std::int64_t t = 0; t < rc.horizon; ++t) {
    for (int k = 0; k < 2; ++k) {
      const auto& b = sim.beliefs()[0][static_cast<std::size_t>(k)];
      const auto bin = static_cast<std::size_t>(b.last_status * 20 + b.aoi - 1);
      ++total[bin];
      hits[bin] += sim.true_status(0, k) == 0;
    }
    sim.step({});
  }
  for (int b = 0; b < 2; ++b)
    for (int a = 1; a <= 20; ++a) {
      const auto bin = static_cast<std::size_t>(b * 20 + a - 1);
      if (total[bin] < 5000) continue;
      EXPECT_NEAR(static_cast<double>(hits[bin]) / static_cast<double>(total[bin]),
                  idle_prob(TransitionMatrix(0.85, 0.90), b, a), 0.03)
          << "b=" << b << " aoi=" << a;
    }
}

TEST(SimulatorTest, ModelRewardTracksSuccessRate) {
  const auto m = run(config(6, 3, 0.3, 200'000, 2, 3), RoundRobinPolicy{});
  // model_reward = E[success] * arrivals / (slots * sum lambda)
  const double arrival_share = static_cast<double>(m.arrivals) / (static_cast<double>(m.measured_slots) * 1.8);
  EXPECT_NEAR(m.model_reward / arrival_share, m.success_rate, 0.01);
}
