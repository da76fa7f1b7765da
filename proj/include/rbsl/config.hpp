#pragma once

// Run configuration: one JSON document covering environment, data mixture, both
// trainers, agent switching and evaluation. Every field has an in-code default and
// to_json always writes the fully resolved document.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "rbsl/recovery_trainer.hpp"

namespace rbsl {

struct DataConfig {
  std::string path;         ///< main dataset (expert, or an already mixed file)
  std::string random_path;  ///< optional second file to mix with
  double expert_fraction = 0.5;
  int total = 0;  ///< trajectories after mixing; 0 means the size of the main file

  bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
  int episodes = 100;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int epoch_episodes = 10;  ///< per-epoch evaluation episodes; 0 disables
  double cost_limit = 1.5;  ///< episode cost-return limit drawn on plots

  bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  EnvConfig env;
  DataConfig data;
  GoalTrainConfig goal;
  RecoveryTrainConfig recovery;
  EvalConfig eval;
  int checkpoint_every = 10;
  std::string output_dir;

  /// Trainer configs with the run seed applied.
  GoalTrainConfig goal_config() const {
    GoalTrainConfig g = goal;
    g.seed = seed;
    return g;
  }
  RecoveryTrainConfig recovery_config() const {
    RecoveryTrainConfig r = recovery;
    r.seed = seed;
    return r;
  }

  void validate() const {
    env.validate();
    goal_config().validate();
    recovery_config().validate();
    if (!(data.expert_fraction >= 0.0 && data.expert_fraction <= 1.0))
      throw ConfigError("data.expert_fraction must lie in [0,1]");
    if (data.total < 0) throw ConfigError("data.total must be >= 0");
    if (eval.episodes < 1) throw ConfigError("eval.episodes must be >= 1");
    if (eval.seeds.empty()) throw ConfigError("eval.seeds must not be empty");
    if (eval.epoch_episodes < 0) throw ConfigError("eval.epoch_episodes must be >= 0");
    if (!(eval.cost_limit > 0.0)) throw ConfigError("eval.cost_limit must be > 0");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  }

  /// Referenced data files must exist.
  void check_paths() const {
    for (const std::string* p : {&data.path, &data.random_path})
      if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("data file not found: " + *p);
  }

  bool operator==(const RunConfig&) const = default;
};

// ---- JSON ------------------------------------------------------------------------

inline nlohmann::json to_json(const AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

inline nlohmann::json to_json(const GoalTrainConfig& g) {
  return {{"gamma", g.gamma},
          {"adv_clip", g.adv_clip},
          {"eps_weight", g.eps_weight},
          {"percentile_k", g.percentile_k},
          {"alpha", g.alpha},
          {"batch_size", g.batch_size},
          {"epochs", g.epochs},
          {"steps_per_epoch", g.steps_per_epoch},
          {"p_relabel", g.p_relabel},
          {"hidden", g.hidden},
          {"adam", to_json(g.adam)},
          {"polyak", g.polyak}};
}

inline nlohmann::json to_json(const RecoveryTrainConfig& r) {
  nlohmann::json pid = nullptr;
  if (r.pid) pid = {{"kp", r.pid->kp}, {"ki", r.pid->ki}, {"kd", r.pid->kd}};
  return {{"gamma", r.gamma},
          {"lambda", r.lambda},
          {"switch_limit", r.limit},
          {"negatives", r.negatives},
          {"temperature", r.temperature},
          {"beta", r.beta},
          {"exclusion_radius", r.exclusion_radius},
          {"batch_size", r.batch_size},
          {"epochs", r.epochs},
          {"steps_per_epoch", r.steps_per_epoch},
          {"p_relabel", r.p_relabel},
          {"hidden", r.hidden},
          {"adam", to_json(r.adam)},
          {"polyak", r.polyak},
          {"pid", pid},
          {"shape_costs", r.shape_costs},
          {"warm_start", r.warm_start}};
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"env", to_json(c.env)},
          {"data",
           {{"path", c.data.path},
            {"random_path", c.data.random_path},
            {"expert_fraction", c.data.expert_fraction},
            {"total", c.data.total}}},
          {"goal", to_json(c.goal)},
          {"recovery", to_json(c.recovery)},
          {"eval",
           {{"episodes", c.eval.episodes},
            {"seeds", c.eval.seeds},
            {"epoch_episodes", c.eval.epoch_episodes},
            {"cost_limit", c.eval.cost_limit}}},
          {"checkpoint_every", c.checkpoint_every},
          {"output_dir", c.output_dir}};
}

namespace detail {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline AdamConfig adam_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"lr", "beta1", "beta2", "eps"}, "adam");
  AdamConfig a;
  read(j, "lr", a.lr);
  read(j, "beta1", a.beta1);
  read(j, "beta2", a.beta2);
  read(j, "eps", a.eps);
  return a;
}

}  // namespace detail

inline GoalTrainConfig goal_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"gamma", "adv_clip", "eps_weight", "percentile_k", "alpha", "batch_size", "epochs",
                       "steps_per_epoch", "p_relabel", "hidden", "adam", "polyak"},
                      "goal");
  GoalTrainConfig g;
  using detail::read;
  read(j, "gamma", g.gamma);
  read(j, "adv_clip", g.adv_clip);
  read(j, "eps_weight", g.eps_weight);
  read(j, "percentile_k", g.percentile_k);
  read(j, "alpha", g.alpha);
  read(j, "batch_size", g.batch_size);
  read(j, "epochs", g.epochs);
  read(j, "steps_per_epoch", g.steps_per_epoch);
  read(j, "p_relabel", g.p_relabel);
  read(j, "hidden", g.hidden);
  if (j.contains("adam")) g.adam = detail::adam_from_json(j.at("adam"));
  read(j, "polyak", g.polyak);
  return g;
}

inline RecoveryTrainConfig recovery_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"gamma", "lambda", "switch_limit", "negatives", "temperature", "beta", "exclusion_radius",
                       "batch_size", "epochs", "steps_per_epoch", "p_relabel", "hidden", "adam", "polyak", "pid",
                       "shape_costs", "warm_start"},
                      "recovery");
  RecoveryTrainConfig r;
  using detail::read;
  read(j, "gamma", r.gamma);
  read(j, "lambda", r.lambda);
  read(j, "switch_limit", r.limit);
  read(j, "negatives", r.negatives);
  read(j, "temperature", r.temperature);
  read(j, "beta", r.beta);
  read(j, "exclusion_radius", r.exclusion_radius);
  read(j, "batch_size", r.batch_size);
  read(j, "epochs", r.epochs);
  read(j, "steps_per_epoch", r.steps_per_epoch);
  read(j, "p_relabel", r.p_relabel);
  read(j, "hidden", r.hidden);
  if (j.contains("adam")) r.adam = detail::adam_from_json(j.at("adam"));
  read(j, "polyak", r.polyak);
  if (j.contains("pid") && !j.at("pid").is_null()) {
    const auto& p = j.at("pid");
    reject_unknown_keys(p, {"kp", "ki", "kd"}, "recovery.pid");
    PidGains g;
    read(p, "kp", g.kp);
    read(p, "ki", g.ki);
    read(p, "kd", g.kd);
    r.pid = g;
  }
  read(j, "shape_costs", r.shape_costs);
  read(j, "warm_start", r.warm_start);
  return r;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"seed", "env", "data", "goal", "recovery", "eval", "checkpoint_every", "output_dir"},
                      "run config");
  RunConfig c;
  using detail::read;
  try {
    read(j, "seed", c.seed);
    if (j.contains("env")) c.env = env_config_from_json(j.at("env"));
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown_keys(d, {"path", "random_path", "expert_fraction", "total"}, "data");
      read(d, "path", c.data.path);
      read(d, "random_path", c.data.random_path);
      read(d, "expert_fraction", c.data.expert_fraction);
      read(d, "total", c.data.total);
    }
    if (j.contains("goal")) c.goal = goal_config_from_json(j.at("goal"));
    if (j.contains("recovery")) c.recovery = recovery_config_from_json(j.at("recovery"));
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      reject_unknown_keys(e, {"episodes", "seeds", "epoch_episodes", "cost_limit"}, "eval");
      read(e, "episodes", c.eval.episodes);
      read(e, "seeds", c.eval.seeds);
      read(e, "epoch_episodes", c.eval.epoch_episodes);
      read(e, "cost_limit", c.eval.cost_limit);
    }
    read(j, "checkpoint_every", c.checkpoint_every);
    read(j, "output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace rbsl
