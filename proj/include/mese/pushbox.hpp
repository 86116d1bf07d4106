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

#ifndef MESE_PUSHBOX_HPP_
#define MESE_PUSHBOX_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mese/error.hpp"
#include "mese/rng.hpp"

// Cooperative box-pushing gridworld.
//
// Coordinates are (x, y) with x the column and y the row; (0, 0) is the
// top-left cell, "up" decreases y. The box moves only when every agent stands
// in a single-file queue directly behind it and all of them step toward it in
// the same turn. For two agents pushing right:
//
//     . . . . .        . . . . .
//     A A B . .  -->   . A A B .     (both agents act "right")
//     . . . . .        . . . . .
//
// Any other joint action moves agents individually; the box stays put.
namespace mese::pushbox {

struct Pos {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pos&, const Pos&) = default;
  friend auto operator<=>(const Pos&, const Pos&) = default;
};

enum class Direction : std::uint8_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr std::size_t kNumActions = 4;
inline constexpr std::array<Direction, kNumActions> kAllDirections{
    Direction::kUp, Direction::kDown, Direction::kLeft, Direction::kRight};

constexpr Pos offset(Direction d) {
  switch (d) {
    case Direction::kUp:
      return {0, -1};
    case Direction::kDown:
      return {0, 1};
    case Direction::kLeft:
      return {-1, 0};
    case Direction::kRight:
      return {1, 0};
  }
  return {0, 0};
}

constexpr Pos operator+(Pos a, Pos b) { return {a.x + b.x, a.y + b.y}; }
constexpr Pos operator-(Pos a, Pos b) { return {a.x - b.x, a.y - b.y}; }
constexpr Pos operator*(int s, Pos a) { return {s * a.x, s * a.y}; }

inline const char* direction_name(Direction d) {
  switch (d) {
    case Direction::kUp:
      return "up";
    case Direction::kDown:
      return "down";
    case Direction::kLeft:
      return "left";
    case Direction::kRight:
      return "right";
  }
  return "?";
}

struct EnvConfig {
  int grid_size = 8;
  int n_agents = 2;
  int max_steps = 100;
  double goal_reward = 1.0;
  // When set, every reset samples a fresh non-overlapping layout and the
  // fixed coordinates below are ignored.
  bool random_layout = false;
  std::vector<Pos> agents{{1, 1}, {1, 6}};
  Pos box{3, 4};
  Pos goal{5, 4};
  // Append the goal to encoded states (constant within a fixed-layout run).
  bool include_goal = false;
};

struct GridState {
  std::vector<Pos> agents;
  Pos box;
  Pos goal;
  int steps = 0;
  bool done = false;
  friend bool operator==(const GridState&, const GridState&) = default;
};

struct StepResult {
  GridState state;
  double reward = 0.0;
  bool done = false;
  // Episode ended by the step cap rather than by reaching the goal.
  bool truncated = false;
};

class PushBox {
 public:
  explicit PushBox(EnvConfig cfg) : cfg_(std::move(cfg)) { validate_config(); }

  const EnvConfig& config() const noexcept { return cfg_; }

  // Length of encode_state / observe vectors.
  std::size_t state_dim() const {
    return 2 * static_cast<std::size_t>(cfg_.n_agents + 1) + (cfg_.include_goal ? 2 : 0);
  }

  GridState reset(std::uint64_t seed) const {
    GridState s;
    if (cfg_.random_layout) {
      Rng rng(derive_seed(seed, 0x5e7));
      const auto cells = static_cast<std::uint64_t>(cfg_.grid_size) *
                         static_cast<std::uint64_t>(cfg_.grid_size);
      std::set<std::uint64_t> used;
      auto draw = [&] {
        std::uint64_t c;
        do {
          c = rng.below(cells);
        } while (used.count(c) != 0);
        used.insert(c);
        return Pos{static_cast<int>(c % static_cast<std::uint64_t>(cfg_.grid_size)),
                   static_cast<int>(c / static_cast<std::uint64_t>(cfg_.grid_size))};
      };
      for (int i = 0; i < cfg_.n_agents; ++i) s.agents.push_back(draw());
      s.box = draw();
      s.goal = draw();
    } else {
      s.agents = cfg_.agents;
      s.box = cfg_.box;
      s.goal = cfg_.goal;
    }
    return s;
  }

  StepResult step(const GridState& state, std::span<const Direction> actions) const {
    if (state.done) throw UsageError("step() called on a finished episode");
    if (actions.size() != static_cast<std::size_t>(cfg_.n_agents)) {
      throw ArgumentError("expected " + std::to_string(cfg_.n_agents) + " actions, got " +
                          std::to_string(actions.size()));
    }
    StepResult result;
    GridState& next = result.state;
    next = state;
    if (push_applies(state, actions)) {
      const Pos d = offset(actions[0]);
      next.box = state.box + d;
      for (Pos& a : next.agents) a = a + d;
    } else {
      move_individually(state, actions, next.agents);
    }
    next.steps = state.steps + 1;
    if (next.box == next.goal) {
      result.reward = cfg_.goal_reward;
      result.done = true;
    } else if (next.steps >= cfg_.max_steps) {
      result.done = true;
      result.truncated = true;
    }
    next.done = result.done;
    return result;
  }

  // [a1.x, a1.y, ..., an.x, an.y, box.x, box.y (, goal.x, goal.y)] scaled to
  // [0, 1] by grid_size - 1.
  std::vector<double> encode_state(const GridState& s) const {
    std::vector<double> out;
    out.reserve(state_dim());
    for (const Pos& a : s.agents) append(out, a);
    append(out, s.box);
    if (cfg_.include_goal) append(out, s.goal);
    return out;
  }

  // Inverse of encode_state for the positional fields. The step counter is not
  // encoded and comes back as 0; the goal comes from the config unless it is
  // part of the encoding.
  GridState decode_state(std::span<const double> v) const {
    if (v.size() != state_dim()) throw ShapeError("encoded state has wrong length");
    GridState s;
    std::size_t p = 0;
    for (int i = 0; i < cfg_.n_agents; ++i, p += 2) s.agents.push_back(read(v, p));
    s.box = read(v, p);
    p += 2;
    s.goal = cfg_.include_goal ? read(v, p) : cfg_.goal;
    return s;
  }

  // Agent `agent_id`'s view: the full state with its own coordinates moved to
  // the front, other agents following in index order.
  std::vector<double> observe(const GridState& s, int agent_id) const {
    if (agent_id < 0 || agent_id >= cfg_.n_agents) {
      throw ArgumentError("agent id " + std::to_string(agent_id) + " out of range");
    }
    std::vector<double> out;
    out.reserve(state_dim());
    append(out, s.agents[static_cast<std::size_t>(agent_id)]);
    for (int i = 0; i < cfg_.n_agents; ++i) {
      if (i != agent_id) append(out, s.agents[static_cast<std::size_t>(i)]);
    }
    append(out, s.box);
    if (cfg_.include_goal) append(out, s.goal);
    return out;
  }

  bool in_grid(Pos p) const {
    return p.x >= 0 && p.y >= 0 && p.x < cfg_.grid_size && p.y < cfg_.grid_size;
  }

  // True when the joint action pushes the box: all agents act in the same
  // direction d, they occupy exactly the cells box - d, box - 2d, ...,
  // box - n*d, and the cell beyond the box is inside the grid.
  bool push_applies(const GridState& s, std::span<const Direction> actions) const {
    const Direction d = actions[0];
    if (!std::all_of(actions.begin(), actions.end(), [d](Direction a) { return a == d; })) {
      return false;
    }
    const Pos step = offset(d);
    if (!in_grid(s.box + step)) return false;
    std::vector<Pos> queue;
    for (int i = 1; i <= cfg_.n_agents; ++i) queue.push_back(s.box - i * step);
    std::vector<Pos> agents = s.agents;
    std::sort(queue.begin(), queue.end());
    std::sort(agents.begin(), agents.end());
    return queue == agents;
  }

  // True when a goal state is reachable from `start` under the dynamics
  // (breadth-first search over joint actions, step cap ignored).
  bool goal_reachable(const GridState& start) const {
    auto key = [this](const GridState& s) {
      std::uint64_t k = 0;
      const auto g = static_cast<std::uint64_t>(cfg_.grid_size);
      for (const Pos& a : s.agents) k = (k * g + static_cast<std::uint64_t>(a.x)) * g + static_cast<std::uint64_t>(a.y);
      return (k * g + static_cast<std::uint64_t>(s.box.x)) * g + static_cast<std::uint64_t>(s.box.y);
    };
    GridState root = start;
    root.steps = 0;
    root.done = false;
    if (root.box == root.goal) return true;
    std::set<std::uint64_t> seen{key(root)};
    std::deque<GridState> frontier{root};
    std::vector<Direction> joint(static_cast<std::size_t>(cfg_.n_agents));
    const std::size_t n_joint = static_cast<std::size_t>(
        std::pow(static_cast<double>(kNumActions), cfg_.n_agents));
    while (!frontier.empty()) {
      GridState s = std::move(frontier.front());
      frontier.pop_front();
      for (std::size_t code = 0; code < n_joint; ++code) {
        std::size_t c = code;
        for (auto& a : joint) {
          a = static_cast<Direction>(c % kNumActions);
          c /= kNumActions;
        }
        GridState next = step(s, joint).state;
        if (next.box == next.goal) return true;
        next.steps = 0;
        next.done = false;
        if (seen.insert(key(next)).second) frontier.push_back(std::move(next));
      }
    }
    return false;
  }

 private:
  void validate_config() const {
    if (cfg_.grid_size < 4) throw ConfigError("env.grid_size", "must be >= 4");
    if (cfg_.n_agents < 1) throw ConfigError("env.n_agents", "must be >= 1");
    if (cfg_.max_steps < 1) throw ConfigError("env.max_steps", "must be >= 1");
    if (!std::isfinite(cfg_.goal_reward)) throw ConfigError("env.goal_reward", "must be finite");
    const long cells = static_cast<long>(cfg_.grid_size) * cfg_.grid_size;
    if (cfg_.n_agents + 2 > cells) {
      throw ConfigError("env.n_agents", "grid too small for agents, box and goal");
    }
    if (cfg_.random_layout) return;
    if (cfg_.agents.size() != static_cast<std::size_t>(cfg_.n_agents)) {
      throw ConfigError("env.agents", "expected " + std::to_string(cfg_.n_agents) +
                                          " agent positions, got " +
                                          std::to_string(cfg_.agents.size()));
    }
    std::set<Pos> occupied;
    auto place = [&](const Pos& p, const std::string& field) {
      if (!in_grid(p)) throw ConfigError(field, "position outside the grid");
      if (!occupied.insert(p).second) throw ConfigError(field, "overlaps another entity");
    };
    for (const Pos& a : cfg_.agents) place(a, "env.agents");
    place(cfg_.box, "env.box");
    place(cfg_.goal, "env.goal");
  }

  void append(std::vector<double>& out, Pos p) const {
    const double scale = static_cast<double>(cfg_.grid_size - 1);
    out.push_back(static_cast<double>(p.x) / scale);
    out.push_back(static_cast<double>(p.y) / scale);
  }

  Pos read(std::span<const double> v, std::size_t p) const {
    const double scale = static_cast<double>(cfg_.grid_size - 1);
    return {static_cast<int>(std::lround(v[p] * scale)),
            static_cast<int>(std::lround(v[p + 1] * scale))};
  }

  // Individual moves. A move is cancelled when it leaves the grid, enters the
  // box, enters a cell another agent keeps, swaps with another agent, or
  // targets the same cell as a lower-indexed agent.
  void move_individually(const GridState& s, std::span<const Direction> actions,
                         std::vector<Pos>& out) const {
    const std::size_t n = s.agents.size();
    std::vector<Pos> target(n);
    std::vector<bool> moving(n, true);
    for (std::size_t i = 0; i < n; ++i) {
      target[i] = s.agents[i] + offset(actions[i]);
      if (!in_grid(target[i]) || target[i] == s.box) moving[i] = false;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (moving[i] && moving[j] && target[i] == target[j]) moving[i] = false;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (moving[i] && moving[j] && target[i] == s.agents[j] && target[j] == s.agents[i]) {
          moving[i] = moving[j] = false;
        }
      }
    }
    // Blocking propagates along chains of agents stepping into each other.
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (!moving[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          const Pos j_final = moving[j] ? target[j] : s.agents[j];
          if (j != i && target[i] == j_final) {
            moving[i] = false;
            changed = true;
            break;
          }
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = moving[i] ? target[i] : s.agents[i];
  }

  EnvConfig cfg_;
};

// One CSV row per step: step, agent positions, box, actions, reward.
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::ostream& out, int n_agents) : out_(out) {
    out_ << "step";
    for (int i = 0; i < n_agents; ++i) out_ << ",agent" << i << "_x,agent" << i << "_y";
    out_ << ",box_x,box_y";
    for (int i = 0; i < n_agents; ++i) out_ << ",action" << i;
    out_ << ",reward\n";
  }

  void write(const GridState& s, std::span<const Direction> actions, double reward) {
    out_ << s.steps;
    for (const Pos& a : s.agents) out_ << ',' << a.x << ',' << a.y;
    out_ << ',' << s.box.x << ',' << s.box.y;
    for (Direction d : actions) out_ << ',' << direction_name(d);
    out_ << ',' << reward << '\n';
  }

 private:
  std::ostream& out_;
};

}  // namespace mese::pushbox

#endif  // MESE_PUSHBOX_HPP_
