#pragma once

// Offline data collection: a uniform random policy and a scripted detour planner
// standing in for a trained expert.

#include <array>
#include <limits>
#include <optional>
#include <vector>

#include "rbsl/dataset.hpp"

namespace rbsl {

/// Seed used for the reset of episode `index` in a collection run seeded with `seed`.
/// Shared by every collector so paired comparisons see identical episodes.
inline std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index) {
  Rng rng = make_rng(seed, index);
  return rng();
}

/// Shortest path for a point around the inflated box, via the box corners pushed
/// outward by `margin`. Returns the next waypoint to steer toward.
class DetourPlanner {
 public:
  explicit DetourPlanner(double margin = 0.02) : margin_(margin) {}

  double margin() const { return margin_; }

  Vec2 next_waypoint(const Vec2& from, const Vec2& target, const ObstacleBox& box) const {
    if (!segment_intersects(from, target, box)) return target;

    // Nodes: 0 = from, 1..4 = offset corners, 5 = target.
    const Vec2 h = box.inflated_half().array() + margin_;
    std::array<Vec2, 6> nodes = {from,
                                 box.center + Vec2(-h.x(), -h.y()),
                                 box.center + Vec2(h.x(), -h.y()),
                                 box.center + Vec2(h.x(), h.y()),
                                 box.center + Vec2(-h.x(), h.y()),
                                 target};
    const bool from_inside = box.contains(from);
    auto visible = [&](int i, int j) {
      if (i == 0 && from_inside) return !box.contains(nodes[j]);
      return !segment_intersects(nodes[i], nodes[j], box);
    };

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::array<double, 6> dist;
    std::array<int, 6> prev;
    std::array<bool, 6> done{};
    dist.fill(inf);
    prev.fill(-1);
    dist[0] = 0.0;
    for (int iter = 0; iter < 6; ++iter) {
      int u = -1;
      for (int i = 0; i < 6; ++i)
        if (!done[i] && (u < 0 || dist[i] < dist[u])) u = i;
      if (u < 0 || dist[u] == inf) break;
      done[u] = true;
      for (int v = 0; v < 6; ++v) {
        if (done[v] || !visible(u, v)) continue;
        const double alt = dist[u] + (nodes[u] - nodes[v]).norm();
        if (alt < dist[v]) {
          dist[v] = alt;
          prev[v] = u;
        }
      }
    }
    if (prev[5] < 0) return target;

    // Walk back to the first node after `from` that is not already reached.
    std::vector<int> path;
    for (int v = 5; v != 0; v = prev[v]) path.push_back(v);
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      if ((nodes[*it] - from).norm() > 1e-9) return nodes[*it];
    }
    return target;
  }

 private:
  double margin_;
};

/// Moves `from` toward `to`, capped at `max_norm` in Euclidean length.
inline Action proportional_step(const Vec2& from, const Vec2& to, double max_norm) {
  Vec2 d = to - from;
  const double n = d.norm();
  if (n > max_norm) d *= max_norm / n;
  return d;
}

/// Scripted expert. Reach2D: steer the agent along the detour path. Push2D: get behind
/// the object relative to its next waypoint, then push.
class ScriptedExpert {
 public:
  static constexpr double kDefaultNoise = 0.01;
  // The expert plans around the box itself, not the inflated one, so it grazes the
  // unsafe band the way a reward-only expert would.
  static constexpr double kDefaultMargin = 0.0;

  ScriptedExpert(const Environment& env, double noise_std, double margin = kDefaultMargin)
      : env_(env), noise_std_(noise_std), planner_(margin) {}

  Action clean_action(const EnvState& s, const Goal& g) const {
    const EnvConfig& cfg = env_.config();
    const Vec2 pos = env_.phi(s);
    const Vec2 waypoint = planner_.next_waypoint(pos, g.target, s.obstacle);
    if (cfg.variant == Variant::Reach2D) return proportional_step(pos, waypoint, cfg.action_max);

    const double rc = cfg.contact_radius;
    const Vec2 to_wp = waypoint - pos;
    if (to_wp.norm() < 1e-9) return Action::Zero();
    const Vec2 dir = to_wp.normalized();
    const Vec2 rel = s.agent_pos - s.object_pos;
    const double along = rel.dot(dir);
    const Vec2 lateral = rel - along * dir;
    const Vec2 side = lateral.norm() > 1e-6 ? Vec2(lateral.normalized()) : Vec2(-dir.y(), dir.x());

    if (along > 0.0) {
      // Ahead of the object: swing around its side first.
      return proportional_step(s.agent_pos, s.object_pos + side * (rc + 0.03), cfg.action_max);
    }
    if (along > -0.5 * rc || lateral.norm() > 0.3 * rc) {
      return proportional_step(s.agent_pos, s.object_pos - dir * (rc + 0.01), cfg.action_max);
    }
    // Aligned behind the object: push toward the waypoint, correcting lateral drift.
    Action a = dir * std::min(cfg.action_max, to_wp.norm() + 0.01) - 0.5 * lateral;
    return proportional_step(Vec2::Zero(), a, cfg.action_max);
  }

  Action act(const EnvState& s, const Goal& g, Rng& rng) const {
    Action a = clean_action(s, g);
    if (noise_std_ > 0.0) {
      std::normal_distribution<double> noise(0.0, noise_std_);
      a.x() += noise(rng);
      a.y() += noise(rng);
    }
    return env_.clip_action(a);
  }

 private:
  const Environment& env_;
  double noise_std_;
  DetourPlanner planner_;
};

/// Runs one fixed-horizon episode from `reset_seed`, calling `policy(state, goal, rng)` for actions.
template <typename Policy>
Trajectory rollout_episode(const Environment& env, std::uint64_t reset_seed, Rng& rng, Provenance provenance,
                           Policy&& policy) {
  auto [state, goal] = env.reset(reset_seed);
  Trajectory traj;
  traj.goal = goal;
  traj.obstacle = state.obstacle;
  traj.provenance = provenance;
  const int horizon = env.config().horizon;
  traj.states.reserve(horizon + 1);
  traj.actions.reserve(horizon);
  traj.states.push_back(state.observation());
  for (int t = 0; t < horizon; ++t) {
    const Action a = env.clip_action(policy(state, goal, rng));
    const StepResult r = env.step(state, a, goal);
    traj.actions.push_back(a);
    traj.rewards.push_back(r.reward);
    traj.costs.push_back(r.cost);
    traj.states.push_back(r.state.observation());
    state = r.state;
  }
  return traj;
}

inline std::vector<Trajectory> rollout_random(const EnvConfig& config, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("rollout_random: episodes must be >= 1");
  const Environment env(config);
  const double amax = config.action_max;
  std::vector<Trajectory> out;
  out.reserve(episodes);
  for (int i = 0; i < episodes; ++i) {
    const std::uint64_t rs = episode_seed(seed, i);
    Rng rng = make_rng(rs, 1);
    out.push_back(rollout_episode(env, rs, rng, Provenance::Random, [&](const EnvState&, const Goal&, Rng& r) {
      const double ax = uniform(r, -amax, amax);
      const double ay = uniform(r, -amax, amax);
      return Action(ax, ay);
    }));
  }
  return out;
}

inline std::vector<Trajectory> rollout_expert(const EnvConfig& config, int episodes, double noise_std,
                                              std::uint64_t seed, double margin = ScriptedExpert::kDefaultMargin) {
  if (episodes < 1) throw ConfigError("rollout_expert: episodes must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("rollout_expert: noise_std must be >= 0");
  const Environment env(config);
  const ScriptedExpert expert(env, noise_std, margin);
  std::vector<Trajectory> out;
  out.reserve(episodes);
  for (int i = 0; i < episodes; ++i) {
    const std::uint64_t rs = episode_seed(seed, i);
    Rng rng = make_rng(rs, 1);
    out.push_back(rollout_episode(env, rs, rng, Provenance::Expert,
                                  [&](const EnvState& s, const Goal& g, Rng& r) { return expert.act(s, g, r); }));
  }
  return out;
}

}  // namespace rbsl
