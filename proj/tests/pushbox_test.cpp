// Copyright 2026 The MESE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cstdlib>
#include <set>
#include <sstream>
#include <vector>

#include "mese/pushbox.hpp"
#include "oracles.hpp"

namespace mese::pushbox {
namespace {

using D = Direction;

EnvConfig small_config() {
  EnvConfig c;
  c.grid_size = 5;
  c.agents = {{0, 0}, {4, 4}};
  c.box = {2, 2};
  c.goal = {4, 2};
  return c;
}

GridState make_state(std::vector<Pos> agents, Pos box, Pos goal) {
  GridState s;
  s.agents = std::move(agents);
  s.box = box;
  s.goal = goal;
  return s;
}

// Every (agents, box) placement on the grid with the given goal rule.
template <typename F>
void for_each_state(int g, F&& f) {
  for (int a0 = 0; a0 < g * g; ++a0) {
    for (int a1 = 0; a1 < g * g; ++a1) {
      if (a1 == a0) continue;
      for (int b = 0; b < g * g; ++b) {
        if (b == a0 || b == a1) continue;
        const Pos box{b % g, b / g};
        const Pos goal = box == Pos{0, 0} ? Pos{g - 1, g - 1} : Pos{0, 0};
        f(make_state({{a0 % g, a0 / g}, {a1 % g, a1 / g}}, box, goal));
      }
    }
  }
}

TEST(PushTest, TwoAgentsQueuedLeftPushRight) {
  const PushBox env(small_config());
  const GridState s = make_state({{1, 2}, {0, 2}}, {2, 2}, {4, 2});
  const std::vector<D> right{D::kRight, D::kRight};
  const StepResult r = env.step(s, right);
  EXPECT_EQ(r.state.box, (Pos{3, 2}));
  EXPECT_EQ(r.state.agents, (std::vector<Pos>{{2, 2}, {1, 2}}));
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.done);
}

TEST(PushTest, OneAgentAdjacentIsNotEnough) {
  const PushBox env(small_config());
  const GridState s = make_state({{1, 2}, {4, 0}}, {2, 2}, {4, 2});
  const std::vector<D> right{D::kRight, D::kRight};
  const StepResult r = env.step(s, right);
  EXPECT_EQ(r.state.box, (Pos{2, 2}));
  EXPECT_EQ(r.state.agents[0], (Pos{1, 2}));
  EXPECT_EQ(r.state.agents[1], (Pos{4, 0}));
}

TEST(PushTest, SideBySideIsNotAQueue) {
  const PushBox env(small_config());
  const GridState s = make_state({{1, 2}, {1, 1}}, {2, 2}, {4, 2});
  const std::vector<D> right{D::kRight, D::kRight};
  EXPECT_EQ(env.step(s, right).state.box, (Pos{2, 2}));
}

TEST(PushTest, MixedActionsDoNotPush) {
  const PushBox env(small_config());
  const GridState s = make_state({{1, 2}, {0, 2}}, {2, 2}, {4, 2});
  const std::vector<D> joint{D::kRight, D::kUp};
  EXPECT_EQ(env.step(s, joint).state.box, (Pos{2, 2}));
}

TEST(PushTest, WallBeyondBoxBlocksPush) {
  const PushBox env(small_config());
  const GridState s = make_state({{3, 2}, {2, 2}}, {4, 2}, {0, 0});
  const std::vector<D> right{D::kRight, D::kRight};
  const StepResult r = env.step(s, right);
  EXPECT_EQ(r.state.box, (Pos{4, 2}));
  EXPECT_EQ(r.state.agents, s.agents);
}

TEST(PushTest, PushOntoGoalEndsWithReward) {
  EnvConfig c = small_config();
  c.goal_reward = 2.5;
  const PushBox env(c);
  const GridState s = make_state({{2, 2}, {1, 2}}, {3, 2}, {4, 2});
  const std::vector<D> right{D::kRight, D::kRight};
  const StepResult r = env.step(s, right);
  EXPECT_EQ(r.reward, 2.5);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.truncated);
  EXPECT_THROW(env.step(r.state, right), UsageError);
}

TEST(PushTest, TimeoutEndsWithZeroReward) {
  EnvConfig c = small_config();
  c.max_steps = 3;
  const PushBox env(c);
  GridState s = env.reset(0);
  const std::vector<D> joint{D::kUp, D::kUp};
  StepResult r;
  for (int i = 0; i < 3; ++i) {
    r = env.step(s, joint);
    s = r.state;
  }
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.reward, 0.0);
}

TEST(MoveTest, WallsBoxAndCollisions) {
  const PushBox env(small_config());
  // Agent 0 walks into the wall, agent 1 into the box.
  GridState s = make_state({{0, 0}, {1, 2}}, {2, 2}, {4, 4});
  std::vector<D> joint{D::kUp, D::kRight};
  EXPECT_EQ(env.step(s, joint).state.agents, s.agents);
  // Same target cell: the lower index moves.
  s = make_state({{1, 1}, {3, 1}}, {2, 3}, {4, 4});
  joint = {D::kRight, D::kLeft};
  EXPECT_EQ(env.step(s, joint).state.agents, (std::vector<Pos>{{2, 1}, {3, 1}}));
  // Swap attempt: both stay.
  s = make_state({{1, 1}, {2, 1}}, {2, 3}, {4, 4});
  joint = {D::kRight, D::kLeft};
  EXPECT_EQ(env.step(s, joint).state.agents, s.agents);
  // Following into a vacated cell is allowed.
  s = make_state({{1, 1}, {2, 1}}, {2, 3}, {4, 4});
  joint = {D::kRight, D::kRight};
  EXPECT_EQ(env.step(s, joint).state.agents, (std::vector<Pos>{{2, 1}, {3, 1}}));
  // Following an agent that is itself blocked is not.
  s = make_state({{3, 1}, {4, 1}}, {2, 3}, {0, 0});
  EXPECT_EQ(env.step(s, joint).state.agents, s.agents);
}

TEST(PushRuleOracleTest, ExhaustiveFiveByFiveAgreement) {
  const PushBox env(small_config());
  std::size_t pairs = 0, disagreements = 0;
  for_each_state(5, [&](const GridState& s) {
    for (D a : kAllDirections) {
      for (D b : kAllDirections) {
        const std::vector<D> joint{a, b};
        const StepResult r = env.step(s, joint);
        const Pos moved = r.state.box - s.box;
        if (!(moved == oracle::box_displacement(s, joint, 5))) ++disagreements;
        ++pairs;
      }
    }
  });
  EXPECT_EQ(pairs, 25u * 24u * 23u * 16u);
  EXPECT_EQ(disagreements, 0u);
}

TEST(PushRuleOracleTest, ConservationAndStateInvariants) {
  const PushBox env(small_config());
  for_each_state(5, [&](const GridState& s) {
    for (D a : kAllDirections) {
      for (D b : kAllDirections) {
        const std::vector<D> joint{a, b};
        const StepResult r = env.step(s, joint);
        const Pos m = r.state.box - s.box;
        ASSERT_LE(std::abs(m.x) + std::abs(m.y), 1);
        ASSERT_TRUE(env.in_grid(r.state.box));
        ASSERT_NE(r.state.agents[0], r.state.agents[1]);
        for (const Pos& p : r.state.agents) {
          ASSERT_TRUE(env.in_grid(p));
          ASSERT_NE(p, r.state.box);
        }
        ASSERT_EQ(r.reward != 0.0, r.state.box == r.state.goal);
        ASSERT_EQ(env.step(s, joint).state, r.state);
      }
    }
  });
}

TEST(ResetTest, FixedLayoutAndDeterminism) {
  const EnvConfig c;
  const PushBox env(c);
  const GridState s = env.reset(42);
  EXPECT_EQ(s.agents, c.agents);
  EXPECT_EQ(s.box, c.box);
  EXPECT_EQ(s.goal, c.goal);
  EXPECT_EQ(s.steps, 0);
  EXPECT_EQ(env.reset(42), env.reset(7));
}

TEST(ResetTest, RandomLayoutsAreValid) {
  EnvConfig c;
  c.random_layout = true;
  const PushBox env(c);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const GridState s = env.reset(seed);
    ASSERT_EQ(s, env.reset(seed));
    std::set<Pos> cells(s.agents.begin(), s.agents.end());
    cells.insert(s.box);
    cells.insert(s.goal);
    ASSERT_EQ(cells.size(), 4u);
    for (const Pos& p : cells) ASSERT_TRUE(env.in_grid(p));
  }
  EXPECT_FALSE(env.reset(1) == env.reset(2));
}

TEST(ResetTest, DefaultLayoutIsSolvable) {
  const PushBox env{EnvConfig{}};
  EXPECT_TRUE(env.goal_reachable(env.reset(0)));
  // A box in a corner can never leave it.
  EnvConfig stuck;
  stuck.box = {0, 0};
  stuck.agents = {{1, 1}, {2, 2}};
  stuck.goal = {5, 5};
  const PushBox trapped(stuck);
  EXPECT_FALSE(trapped.goal_reachable(trapped.reset(0)));
}

TEST(ConfigTest, InvalidLayoutsNameTheField) {
  auto field_of = [](EnvConfig c) {
    try {
      PushBox env(c);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EnvConfig c;
  c.grid_size = 3;
  EXPECT_EQ(field_of(c), "env.grid_size");
  c = EnvConfig{};
  c.box = c.goal;
  EXPECT_EQ(field_of(c), "env.goal");
  c = EnvConfig{};
  c.agents = {{1, 1}};
  EXPECT_EQ(field_of(c), "env.agents");
  c = EnvConfig{};
  c.agents[1] = {9, 0};
  EXPECT_EQ(field_of(c), "env.agents");
}

TEST(EncodeTest, LayoutAndScaling) {
  const PushBox env{EnvConfig{}};
  EXPECT_EQ(env.state_dim(), 6u);
  const GridState s = make_state({{0, 0}, {7, 3}}, {2, 4}, {5, 4});
  const std::vector<double> v = env.encode_state(s);
  EXPECT_EQ(v, (std::vector<double>{0.0, 0.0, 1.0, 3.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0}));
  EnvConfig with_goal;
  with_goal.include_goal = true;
  EXPECT_EQ(PushBox(with_goal).encode_state(s).size(), 8u);
}

TEST(EncodeTest, DecodeRoundTripOnFiveByFive) {
  const PushBox env(small_config());
  for_each_state(5, [&](const GridState& s) {
    GridState expected = s;
    expected.goal = small_config().goal;
    ASSERT_EQ(env.decode_state(env.encode_state(s)), expected);
  });
}

TEST(ObserveTest, OwnCoordinatesFirst) {
  const PushBox env{EnvConfig{}};
  const GridState s = make_state({{1, 2}, {6, 5}}, {3, 3}, {5, 4});
  const std::vector<double> full = env.encode_state(s);
  EXPECT_EQ(env.observe(s, 0), full);
  const std::vector<double> o1 = env.observe(s, 1);
  EXPECT_EQ(o1, (std::vector<double>{full[2], full[3], full[0], full[1], full[4], full[5]}));
  const GridState swapped = make_state({{6, 5}, {1, 2}}, {3, 3}, {5, 4});
  EXPECT_EQ(env.observe(swapped, 1), env.observe(s, 0));
  EXPECT_THROW(env.observe(s, 2), ArgumentError);
  EXPECT_THROW(env.observe(s, -1), ArgumentError);
}

TEST(TrajectoryWriterTest, WritesHeaderAndRows) {
  std::ostringstream out;
  TrajectoryWriter w(out, 2);
  const GridState s = make_state({{1, 2}, {0, 2}}, {2, 2}, {4, 2});
  const std::vector<D> joint{D::kRight, D::kLeft};
  w.write(s, joint, 0.0);
  EXPECT_EQ(out.str(),
            "step,agent0_x,agent0_y,agent1_x,agent1_y,box_x,box_y,action0,action1,reward\n"
            "0,1,2,0,2,2,2,right,left,0\n");
}

TEST(StepTest, WrongActionCountIsArgumentError) {
  const PushBox env{EnvConfig{}};
  const std::vector<D> one{D::kUp};
  EXPECT_THROW(env.step(env.reset(0), one), ArgumentError);
}

}  // namespace
}  // namespace mese::pushbox
