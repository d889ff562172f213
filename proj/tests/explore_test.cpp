#include <gtest/gtest.h>

#include "ibft/explore.hpp"
#include "ibft/report.hpp"
#include "ibft/simnet.hpp"

namespace ibft {
namespace {

TEST(Explore, CanonicalScheduleMatchesPlainRun) {
  Scenario s;
  s.net.delay_mode = DelayMode::fixed;
  const auto res = explore(s, {1, 0, 0});
  EXPECT_EQ(res.schedules, 1u);
  EXPECT_TRUE(res.complete);
  EXPECT_TRUE(res.pass());
  EXPECT_EQ(res.first_sends, 36u);

  const auto rep = make_report(run(s).trace, s);
  ASSERT_EQ(res.first_decisions.size(), rep.decided.size());
  for (const auto& [p, ds] : rep.decided) EXPECT_EQ(res.first_decisions.at(p), ds.front().value);
}

TEST(Explore, FailureFreeRoundOneReorderings) {
  Scenario s;
  const auto res = explore(s, {1, 3, 2});
  EXPECT_TRUE(res.complete);
  EXPECT_TRUE(res.pass());
  EXPECT_GT(res.schedules, 1u);
  EXPECT_EQ(res.decided_schedules, res.schedules);
}

TEST(Explore, StaleClaimIntoRoundTwo) {
  Scenario s;
  s.adversaries.push_back({ProcessId{3}, StaleClaim{Round{1}, Value("stale")}});
  const auto res = explore(s, {2, 3, 1});
  EXPECT_TRUE(res.complete);
  EXPECT_TRUE(res.pass()) << res.agreement.detail << res.prepared_consistency.detail;
  EXPECT_EQ(res.decided_schedules, res.schedules);
}

TEST(Explore, EquivocatingLeaderIntoRoundTwo) {
  Scenario s;
  s.adversaries.push_back({ProcessId{0}, EquivocatingLeader{{Value("a"), Value("b")}}});
  const auto res = explore(s, {2, 3, 1});
  EXPECT_TRUE(res.complete);
  EXPECT_TRUE(res.pass()) << res.agreement.detail << res.prepared_consistency.detail;
  EXPECT_EQ(res.decided_schedules, res.schedules);
}

TEST(Explore, SilentLeaderDecidesInRoundTwo) {
  Scenario s;
  s.adversaries.push_back({ProcessId{0}, Silent{}});
  const auto res = explore(s, {2, 2, 1});
  EXPECT_TRUE(res.complete);
  EXPECT_TRUE(res.pass());
  EXPECT_GT(res.schedules, 1u);
  EXPECT_EQ(res.decided_schedules, res.schedules);
  EXPECT_EQ(res.first_decisions.size(), 3u);
}

TEST(Explore, TimersCappedAtRoundBound) {
  Scenario s;
  s.adversaries.push_back({ProcessId{0}, Silent{}});
  const auto res = explore(s, {1, 0, 0});
  EXPECT_EQ(res.schedules, 1u);
  EXPECT_EQ(res.decided_schedules, 0u);
  EXPECT_TRUE(res.first_decisions.empty());
}

TEST(Explore, HoldDeviationsWidenTheSearch) {
  Scenario s;
  ExploreOptions with{2, 1, 1};
  ExploreOptions without = with;
  without.hold_links = false;
  const auto a = explore(s, with);
  const auto b = explore(s, without);
  EXPECT_TRUE(a.complete && b.complete);
  EXPECT_TRUE(a.pass() && b.pass());
  EXPECT_GT(a.schedules, b.schedules);
  EXPECT_EQ(a.decided_schedules, a.schedules);
}

TEST(Explore, ScheduleBudgetGivesPartialResult) {
  Scenario s;
  const auto res = explore(s, {2, 3, 2, 5});
  EXPECT_FALSE(res.complete);
  EXPECT_EQ(res.schedules, 5u);
  EXPECT_TRUE(res.pass());
}

TEST(Explore, InvalidScenarioRejected) {
  Scenario s;
  s.f = 2;
  EXPECT_THROW(explore(s), ScenarioError);
}

}  // namespace
}  // namespace ibft
