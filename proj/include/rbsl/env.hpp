#pragma once

// Kinematic goal-conditioned point environments with one axis-aligned hazard box.
//
// Observation layout (10 doubles):
//   [0,1] agent_pos   [2,3] object_pos   [4,5] object_pos - agent_pos
//   [6,7] obstacle center   [8,9] obstacle half_extents
// In Reach2D the object slot mirrors the agent, so phi(obs) is always obs[2..3].

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cstdint>
#include <json.hpp>
#include <set>
#include <string>
#include <utility>

#include "rbsl/common.hpp"

namespace rbsl {

using Vec2 = Eigen::Vector2d;
using Action = Eigen::Vector2d;

inline constexpr int kObsDim = 10;
using Observation = std::array<double, kObsDim>;

enum class Variant { Reach2D, Push2D };

inline std::string to_string(Variant v) { return v == Variant::Reach2D ? "reach2d" : "push2d"; }

inline Variant parse_variant(const std::string& s) {
  if (s == "reach2d") return Variant::Reach2D;
  if (s == "push2d") return Variant::Push2D;
  throw ConfigError("unknown env variant '" + s + "' (expected reach2d or push2d)");
}

struct ObstacleBox {
  Vec2 center{0.5, 0.5};
  Vec2 half_extents{0.1, 0.1};
  double inflation = 0.05;

  Vec2 inflated_half() const { return half_extents.array() + inflation; }

  /// Closed inflated box: |p_i - c_i| <= h_i + eps on every axis.
  bool contains(const Vec2& p) const {
    const Vec2 h = inflated_half();
    return std::abs(p.x() - center.x()) <= h.x() && std::abs(p.y() - center.y()) <= h.y();
  }

  void validate() const {
    if (!(half_extents.x() > 0.0 && half_extents.y() > 0.0))
      throw ConfigError("obstacle half_extents must be strictly positive");
    if (!(inflation >= 0.0)) throw ConfigError("obstacle inflation must be >= 0");
  }

  bool operator==(const ObstacleBox&) const = default;
};

/// True iff the closed segment [a,b] touches the closed box with the given center/half-size.
inline bool segment_intersects_box(const Vec2& a, const Vec2& b, const Vec2& center, const Vec2& half) {
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec2 d = b - a;
  for (int i = 0; i < 2; ++i) {
    const double lo = center[i] - half[i];
    const double hi = center[i] + half[i];
    if (d[i] == 0.0) {
      if (a[i] < lo || a[i] > hi) return false;
      continue;
    }
    double ta = (lo - a[i]) / d[i];
    double tb = (hi - a[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

inline bool segment_intersects(const Vec2& a, const Vec2& b, const ObstacleBox& box) {
  return segment_intersects_box(a, b, box.center, box.inflated_half());
}

struct Goal {
  Vec2 target{0.5, 0.5};
  double tolerance = 0.05;

  bool operator==(const Goal&) const = default;
};

struct EnvConfig {
  Variant variant = Variant::Reach2D;
  int horizon = 50;
  double action_max = 0.05;
  double goal_tolerance = 0.05;
  double inflation = 0.05;
  Vec2 workspace_low{0.0, 0.0};
  Vec2 workspace_high{1.0, 1.0};
  double contact_radius = 0.04;
  /// Probability that reset places the obstacle across the start->goal segment.
  double p_block = 0.7;
  /// Obstacle half-extents are drawn per axis from [lo, hi].
  std::array<double, 2> half_extent_range{0.05, 0.10};
  /// Minimum start->goal distance at reset.
  double min_goal_distance = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (!(action_max > 0.0)) throw ConfigError("action_max must be > 0");
    if (!(goal_tolerance > 0.0)) throw ConfigError("goal_tolerance must be > 0");
    if (!(inflation > 0.0)) throw ConfigError("inflation must be > 0");
    if (!(workspace_high.array() > workspace_low.array()).all())
      throw ConfigError("workspace bounds must satisfy low < high");
    if (!(contact_radius > 0.0)) throw ConfigError("contact_radius must be > 0");
    if (!(p_block >= 0.0 && p_block <= 1.0)) throw ConfigError("p_block must lie in [0,1]");
    if (!(half_extent_range[0] > 0.0 && half_extent_range[1] >= half_extent_range[0]))
      throw ConfigError("half_extent_range must satisfy 0 < lo <= hi");
    if (!(min_goal_distance >= 0.0)) throw ConfigError("min_goal_distance must be >= 0");
  }

  bool operator==(const EnvConfig&) const = default;
};

/// Same environment apart from the seed it was sampled with.
inline bool same_environment(const EnvConfig& a, const EnvConfig& b) {
  EnvConfig x = a;
  x.seed = b.seed;
  return x == b;
}

struct EnvState {
  Vec2 agent_pos{0.5, 0.5};
  Vec2 object_pos{0.5, 0.5};
  ObstacleBox obstacle;
  int step_index = 0;

  Observation observation() const {
    return {agent_pos.x(),           agent_pos.y(),           object_pos.x(),
            object_pos.y(),          object_pos.x() - agent_pos.x(), object_pos.y() - agent_pos.y(),
            obstacle.center.x(),     obstacle.center.y(),     obstacle.half_extents.x(),
            obstacle.half_extents.y()};
  }

  bool operator==(const EnvState&) const = default;
};

/// State-to-goal mapping on a stored observation.
inline Vec2 phi(const Observation& obs) { return {obs[2], obs[3]}; }

inline ObstacleBox obstacle_of(const Observation& obs, double inflation) {
  return ObstacleBox{{obs[6], obs[7]}, {obs[8], obs[9]}, inflation};
}

inline int cost_of(const Observation& obs, double inflation) {
  return obstacle_of(obs, inflation).contains(phi(obs)) ? 1 : 0;
}

inline int reward_of(const Vec2& achieved, const Vec2& target, double tolerance) {
  return (achieved - target).norm() <= tolerance ? 1 : 0;
}

struct StepResult {
  EnvState state;
  int reward = 0;
  int cost = 0;
  bool done = false;
};

/// Stateless environment: every method is a pure function of its arguments and the config.
class Environment {
 public:
  explicit Environment(EnvConfig config) : cfg_(std::move(config)) { cfg_.validate(); }

  const EnvConfig& config() const { return cfg_; }

  Vec2 phi(const EnvState& s) const { return cfg_.variant == Variant::Reach2D ? s.agent_pos : s.object_pos; }

  int cost_of(const EnvState& s) const { return s.obstacle.contains(phi(s)) ? 1 : 0; }

  Vec2 clip_to_workspace(const Vec2& p) const { return p.cwiseMax(cfg_.workspace_low).cwiseMin(cfg_.workspace_high); }

  Action clip_action(const Action& a) const {
    return a.cwiseMax(Vec2::Constant(-cfg_.action_max)).cwiseMin(Vec2::Constant(cfg_.action_max));
  }

  std::pair<EnvState, Goal> reset(std::uint64_t seed) const {
    Rng rng = make_rng(seed, 0x5eed);
    const Vec2 lo = cfg_.workspace_low;
    const Vec2 hi = cfg_.workspace_high;
    const Vec2 span = hi - lo;
    const Vec2 edge = 0.05 * span;
    auto sample_point = [&](const Vec2& a, const Vec2& b) {
      return Vec2(uniform(rng, a.x(), b.x()), uniform(rng, a.y(), b.y()));
    };

    for (int attempt = 0; attempt < kMaxResetAttempts; ++attempt) {
      const Vec2 start = sample_point(lo + edge, hi - edge);
      const Vec2 target = sample_point(lo + edge, hi - edge);
      if ((target - start).norm() < cfg_.min_goal_distance) continue;

      const bool blocked = uniform(rng, 0.0, 1.0) < cfg_.p_block;
      ObstacleBox box;
      box.inflation = cfg_.inflation;
      box.half_extents = {uniform(rng, cfg_.half_extent_range[0], cfg_.half_extent_range[1]),
                          uniform(rng, cfg_.half_extent_range[0], cfg_.half_extent_range[1])};
      const Vec2 inflated = box.inflated_half();
      if (blocked) {
        const double u = uniform(rng, 0.35, 0.65);
        const Vec2 along = target - start;
        const Vec2 normal = Vec2(-along.y(), along.x()).normalized();
        const double jitter = uniform(rng, -0.5, 0.5) * inflated.minCoeff();
        box.center = start + u * along + jitter * normal;
      } else {
        box.center = sample_point(lo + 0.2 * span, hi - 0.2 * span);
      }

      // Keep the inflated box inside the workspace so detours around it exist.
      if (((box.center - inflated).array() < (lo + edge).array()).any()) continue;
      if (((box.center + inflated).array() > (hi - edge).array()).any()) continue;
      if (box.contains(start) || box.contains(target)) continue;
      if (segment_intersects(start, target, box) != blocked) continue;

      EnvState state;
      state.obstacle = box;
      state.step_index = 0;
      if (cfg_.variant == Variant::Reach2D) {
        state.agent_pos = start;
        state.object_pos = start;
      } else {
        state.object_pos = start;
        const double angle = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
        const double radius = uniform(rng, cfg_.contact_radius + 0.02, cfg_.contact_radius + 0.15);
        const Vec2 agent = clip_to_workspace(start + radius * Vec2(std::cos(angle), std::sin(angle)));
        if ((agent - start).norm() < cfg_.contact_radius) continue;
        state.agent_pos = agent;
      }
      return {state, Goal{target, cfg_.goal_tolerance}};
    }
    throw ConfigError("reset: rejection sampling exceeded " + std::to_string(kMaxResetAttempts) +
                      " attempts (workspace too crowded for the configured obstacle sizes)");
  }

  StepResult step(const EnvState& state, const Action& action, const Goal& goal) const {
    const Action a = clip_action(action);
    EnvState next = state;
    next.agent_pos = clip_to_workspace(state.agent_pos + a);
    if (cfg_.variant == Variant::Reach2D) {
      next.object_pos = next.agent_pos;
    } else {
      const Vec2 offset = next.object_pos - next.agent_pos;
      const double dist = offset.norm();
      if (dist < cfg_.contact_radius) {
        Vec2 dir = dist > 0.0 ? Vec2(offset / dist) : Vec2(1.0, 0.0);
        if (dist == 0.0 && a.norm() > 0.0) dir = a.normalized();
        next.object_pos = clip_to_workspace(next.object_pos + (cfg_.contact_radius - dist) * dir);
      }
    }
    next.step_index = state.step_index + 1;

    StepResult out;
    out.reward = reward_of(phi(next), goal.target, goal.tolerance);
    out.cost = cost_of(next);
    out.done = next.step_index >= cfg_.horizon;
    out.state = next;
    return out;
  }

  static constexpr int kMaxResetAttempts = 1000;

 private:
  EnvConfig cfg_;
};

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json vec_to_json(const Vec2& v) { return nlohmann::json::array({v.x(), v.y()}); }

inline Vec2 vec_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError("field '" + field + "' must be a 2-element numeric array");
  return {j[0].get<double>(), j[1].get<double>()};
}

/// Throws on keys outside `allowed`; configs are strict so typos do not silently fall back to defaults.
inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown field '" + key + "' in " + where);
  }
}

inline nlohmann::json to_json(const EnvConfig& c) {
  return {
      {"variant", to_string(c.variant)},
      {"horizon", c.horizon},
      {"action_max", c.action_max},
      {"goal_tolerance", c.goal_tolerance},
      {"inflation", c.inflation},
      {"workspace_bounds", {{"low", vec_to_json(c.workspace_low)}, {"high", vec_to_json(c.workspace_high)}}},
      {"contact_radius", c.contact_radius},
      {"p_block", c.p_block},
      {"half_extent_range", {c.half_extent_range[0], c.half_extent_range[1]}},
      {"min_goal_distance", c.min_goal_distance},
      {"seed", c.seed},
  };
}

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"variant", "horizon", "action_max", "goal_tolerance", "inflation", "workspace_bounds",
                       "contact_radius", "p_block", "half_extent_range", "min_goal_distance", "seed"},
                      "env config");
  EnvConfig c;
  try {
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<int>();
    if (j.contains("action_max")) c.action_max = j.at("action_max").get<double>();
    if (j.contains("goal_tolerance")) c.goal_tolerance = j.at("goal_tolerance").get<double>();
    if (j.contains("inflation")) c.inflation = j.at("inflation").get<double>();
    if (j.contains("workspace_bounds")) {
      const auto& wb = j.at("workspace_bounds");
      reject_unknown_keys(wb, {"low", "high"}, "workspace_bounds");
      c.workspace_low = vec_from_json(wb.at("low"), "workspace_bounds.low");
      c.workspace_high = vec_from_json(wb.at("high"), "workspace_bounds.high");
    }
    if (j.contains("contact_radius")) c.contact_radius = j.at("contact_radius").get<double>();
    if (j.contains("p_block")) c.p_block = j.at("p_block").get<double>();
    if (j.contains("half_extent_range")) {
      const Vec2 r = vec_from_json(j.at("half_extent_range"), "half_extent_range");
      c.half_extent_range = {r.x(), r.y()};
    }
    if (j.contains("min_goal_distance")) c.min_goal_distance = j.at("min_goal_distance").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("env config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace rbsl
