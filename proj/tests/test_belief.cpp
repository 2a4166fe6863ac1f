#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "edgemon/belief.hpp"

using namespace edgemon;

TEST(Advance, ObservationResetsAge) {
  EXPECT_EQ(advance({0, 5}, std::uint8_t{1}, 20), (InfoState{1, 1}));
  EXPECT_EQ(advance({1, 20}, std::uint8_t{0}, 20), (InfoState{0, 1}));
}

TEST(Advance, AgesAndSaturates) {
  EXPECT_EQ(advance({0, 5}, std::nullopt, 20), (InfoState{0, 6}));
  EXPECT_EQ(advance({0, 20}, std::nullopt, 20), (InfoState{0, 20}));
  EXPECT_EQ(advance({1, 1}, std::nullopt, 1), (InfoState{1, 1}));
}

TEST(AssignServer, ArgmaxAndTies) {
  const std::vector<TransitionMatrix> p(2, TransitionMatrix(0.85, 0.90));
  const DispatcherBelief b{{0, 1}, {1, 1}};  // idle probs 0.85, 0.10
  EXPECT_EQ(assign_server(b, p), 0u);
  const DispatcherBelief swapped{{1, 1}, {0, 1}};
  EXPECT_EQ(assign_server(swapped, p), 1u);
  // Both at stationarity: exact tie goes to the lowest index.
  const DispatcherBelief tie{{0, 1}, {0, 1}};
  EXPECT_EQ(assign_server(tie, p), 0u);
  const DispatcherBelief single{{1, 7}};
  EXPECT_EQ(assign_server(single, std::span(p).first(1)), 0u);
}

TEST(AssignServer, TableAndMatrixOverloadsAgree) {
  const std::vector<TransitionMatrix> p{TransitionMatrix(0.6, 0.7), TransitionMatrix(0.9, 0.5),
                                        TransitionMatrix(0.8, 0.95)};
  std::vector<IdleProbTable> t;
  for (const auto& m : p) t.emplace_back(m, 6);
  for (int d = 0; d < 12 * 12 * 12; ++d) {
    const DispatcherBelief b{{static_cast<std::uint8_t>(d % 12 / 6), d % 6 + 1},
                             {static_cast<std::uint8_t>(d / 12 % 12 / 6), d / 12 % 6 + 1},
                             {static_cast<std::uint8_t>(d / 144 / 6), d / 144 % 6 + 1}};
    EXPECT_EQ(assign_server(b, p), assign_server(b, std::span<const IdleProbTable>(t)));
    EXPECT_DOUBLE_EQ(dispatcher_reward(b, p), dispatcher_reward(b, std::span<const IdleProbTable>(t)));
  }
}

TEST(DispatcherReward, Examples) {
  const std::vector<TransitionMatrix> p(2, TransitionMatrix(0.85, 0.90));
  EXPECT_DOUBLE_EQ(dispatcher_reward(DispatcherBelief{{0, 1}}, std::span(p).first(1)), 0.85);
  EXPECT_DOUBLE_EQ(dispatcher_reward(DispatcherBelief{{0, 1}, {1, 1}}, p), 0.85);
}

TEST(DispatcherReward, LongAgeConvergesToBestStationary) {
  const std::vector<TransitionMatrix> p{TransitionMatrix(0.85, 0.90), TransitionMatrix(0.9, 0.6)};
  const DispatcherBelief b{{1, 500}, {0, 500}};
  const double best = std::max(stationary(p[0]).pi0, stationary(p[1]).pi0);
  EXPECT_NEAR(dispatcher_reward(b, p), best, 1e-12);
}

TEST(DispatcherReward, PermutationInvariant) {
  const TransitionMatrix m(0.85, 0.90);
  const std::vector<TransitionMatrix> p(3, m);
  DispatcherBelief b{{1, 3}, {0, 9}, {1, 1}};
  const double r = dispatcher_reward(b, p);
  auto less = [](InfoState x, InfoState y) { return std::pair(x.last_status, x.aoi) < std::pair(y.last_status, y.aoi); };
  std::sort(b.begin(), b.end(), less);
  int perms = 0;
  do {
    EXPECT_DOUBLE_EQ(dispatcher_reward(b, p), r);
    ++perms;
  } while (std::next_permutation(b.begin(), b.end(), less));
  EXPECT_EQ(perms, 6);
}
