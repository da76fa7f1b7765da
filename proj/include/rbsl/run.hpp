#pragma once

// Run directories. `train_run` executes the full pipeline (mixture, filters, goal
// training, recovery training) and `eval_run` reloads a directory and evaluates it.
//
//   run/
//     manifest.json                 resolved config, dataset stats, planned files
//     goal_metrics.csv              one row per goal epoch
//     recovery_metrics.csv          one row per recovery epoch
//     agent_metrics.csv             composed agent evaluated after each recovery epoch
//     models/*.json                 final networks with optimizer state
//     checkpoints/<phase>_epoch_NNNN/*.json

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rbsl/agent.hpp"
#include "rbsl/config.hpp"
#include "rbsl/csv.hpp"
#include "rbsl/dataset_io.hpp"

namespace rbsl {

namespace fs = std::filesystem;

inline void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

inline nlohmann::json read_json_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("missing file: " + path.string());
  std::ifstream in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// {"layers": [...], "optimizer": {...}, "target": {"layers": [...]}}; target is optional.
inline nlohmann::json network_checkpoint(const Network& net, const AdamState<double>& opt,
                                         const Network* target = nullptr) {
  nlohmann::json j = to_json(net);
  j["optimizer"] = to_json(opt);
  if (target) j["target"] = to_json(*target);
  return j;
}

inline Network load_network(const fs::path& path) { return network_from_json<double>(read_json_file(path)); }

inline void save_goal_models(const fs::path& dir, const GoalModels& m) {
  fs::create_directories(dir);
  write_json_file(dir / "goal_policy.json", network_checkpoint(m.policy, m.policy_opt));
  write_json_file(dir / "goal_q.json", network_checkpoint(m.q, m.q_opt, &m.q_target.shadow));
}

inline void save_recovery_models(const fs::path& dir, const RecoveryModels& m) {
  fs::create_directories(dir);
  write_json_file(dir / "recovery_policy.json", network_checkpoint(m.policy, m.policy_opt));
  write_json_file(dir / "recovery_q.json", network_checkpoint(m.q_r, m.qr_opt, &m.qr_target.shadow));
  write_json_file(dir / "cost_q.json", network_checkpoint(m.q_c, m.qc_opt, &m.qc_target.shadow));
  write_json_file(dir / "recovery_state.json",
                  {{"lambda", m.lambda},
                   {"pid_prev_error", m.pid.prev_error},
                   {"pid_prev_prev_error", m.pid.prev_prev_error}});
}

inline std::string epoch_dir_name(const std::string& phase, int epoch) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_epoch_%04d", phase.c_str(), epoch);
  return buf;
}

/// Epochs at which weights are written: every `every` epochs plus the last one.
inline std::vector<int> checkpoint_epochs(int epochs, int every) {
  std::vector<int> out;
  for (int e = every; e <= epochs; e += every) out.push_back(e);
  if (epochs > 0 && (out.empty() || out.back() != epochs)) out.push_back(epochs);
  return out;
}

inline nlohmann::json stats_to_json(const DatasetStats& s) {
  return {{"trajectories", s.trajectories},     {"transitions", s.transitions},
          {"mean_return", s.mean_return},       {"mean_cost_return", s.mean_cost_return},
          {"success_rate", s.success_rate},     {"expert_fraction", s.expert_fraction}};
}

// ---- training --------------------------------------------------------------------

inline Dataset load_training_data(const RunConfig& cfg) {
  if (cfg.data.path.empty()) throw ConfigError("no dataset given (--data)");
  cfg.check_paths();
  Dataset main = load_dataset(fs::path(cfg.data.path));
  if (!same_environment(main.env, cfg.env)) throw ConfigError("dataset env_config differs from the run config env");
  if (cfg.data.random_path.empty()) return main;
  const Dataset random = load_dataset(fs::path(cfg.data.random_path));
  const std::size_t total = cfg.data.total > 0 ? static_cast<std::size_t>(cfg.data.total) : main.size();
  return mix(main, random, cfg.data.expert_fraction, total, cfg.seed);
}

struct TrainReport {
  DatasetStats stats;
  std::size_t expert_set_size = 0;
  std::size_t recovery_set_size = 0;
  bool recovery_trained = false;
  bool switching = false;
  std::vector<std::string> warnings;
};

inline const char* kGoalCsvHeader =
    "epoch,q_loss,policy_loss,mean_weight,threshold,success_rate,discounted_return,cost_return";
inline const char* kRecoveryCsvHeader =
    "epoch,qc_loss,qr_loss,recovery_policy_loss,lambda,mean_qc,fraction_batch_above_l";
inline const char* kAgentCsvHeader = "epoch,success_rate,discounted_return,cost_return,recovery_activation_rate";

/// Runs the whole pipeline into `out_dir`. `wgcsl_only` skips recovery training and
/// disables switching.
inline TrainReport train_run(const RunConfig& cfg, const fs::path& out_dir, bool wgcsl_only = false) {
  cfg.validate();
  const Dataset data = load_training_data(cfg);
  const GoalTrainConfig goal_cfg = cfg.goal_config();
  const RecoveryTrainConfig rec_cfg = cfg.recovery_config();

  TrainReport report;
  report.stats = compute_stats(data, goal_cfg.gamma);
  const Dataset expert_set = filter_expert(data, goal_cfg.gamma, &report.warnings);
  const Dataset recovery_set = filter_recovery(expert_set, goal_cfg.gamma, &report.warnings);
  report.expert_set_size = expert_set.size();
  report.recovery_set_size = recovery_set.size();
  report.recovery_trained = !wgcsl_only && !recovery_set.empty();
  report.switching = report.recovery_trained;
  if (!wgcsl_only && recovery_set.empty()) report.warnings.push_back("switching disabled: recovery set is empty");

  fs::create_directories(out_dir);
  std::vector<std::string> planned{"models/goal_policy.json", "models/goal_q.json"};
  for (int e : checkpoint_epochs(goal_cfg.epochs, cfg.checkpoint_every))
    for (const char* f : {"goal_policy.json", "goal_q.json"})
      planned.push_back("checkpoints/" + epoch_dir_name("goal", e) + "/" + f);
  if (report.recovery_trained) {
    for (const char* f : {"recovery_policy.json", "recovery_q.json", "cost_q.json", "recovery_state.json"})
      planned.push_back(std::string("models/") + f);
    for (int e : checkpoint_epochs(rec_cfg.epochs, cfg.checkpoint_every))
      for (const char* f : {"recovery_policy.json", "recovery_q.json", "cost_q.json", "recovery_state.json"})
        planned.push_back("checkpoints/" + epoch_dir_name("recovery", e) + "/" + f);
  }

  RunConfig resolved = cfg;
  resolved.output_dir = out_dir.string();
  nlohmann::json manifest = {
      {"version", kVersion},
      {"seed", cfg.seed},
      {"config", to_json(resolved)},
      {"ablation", wgcsl_only ? "wgcsl-only" : "none"},
      {"recovery_trained", report.recovery_trained},
      {"agent", {{"switching", report.switching}, {"switch_limit", rec_cfg.limit}}},
      {"dataset",
       {{"stats", stats_to_json(report.stats)},
        {"expert_set_size", report.expert_set_size},
        {"recovery_set_size", report.recovery_set_size}}},
      {"checkpoints", planned},
      {"warnings", report.warnings},
  };
  write_json_file(out_dir / "manifest.json", manifest);

  const Environment env(cfg.env);
  const auto evaluate_agent = [&](const RbslAgent& agent) {
    return evaluate(agent, cfg.env, cfg.eval.epoch_episodes, cfg.seed, goal_cfg.gamma).metrics;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // goal policy
  std::ofstream goal_csv(out_dir / "goal_metrics.csv");
  goal_csv << kGoalCsvHeader << '\n';
  const auto goal_hook = [&](const GoalModels& m, GoalEpochMetrics& em) {
    if (cfg.eval.epoch_episodes > 0) {
      const RunMetrics r = evaluate_agent(RbslAgent{m.policy, {}, {}, nan, false, cfg.env.action_max});
      em.success_rate = r.success_rate;
      em.discounted_return = r.discounted_return;
      em.cost_return = r.cost_return;
    }
    write_csv_row(goal_csv, {std::to_string(em.epoch), format_number(em.q_loss), format_number(em.policy_loss),
                             format_number(em.mean_weight), format_number(em.threshold),
                             format_number(em.success_rate), format_number(em.discounted_return),
                             format_number(em.cost_return)});
    goal_csv.flush();
    if (em.epoch % cfg.checkpoint_every == 0 || em.epoch == goal_cfg.epochs)
      save_goal_models(out_dir / "checkpoints" / epoch_dir_name("goal", em.epoch), m);
  };
  const GoalTrainResult goal = train_goal_policy(data, goal_cfg, goal_hook);
  save_goal_models(out_dir / "models", goal.models);
  if (!report.recovery_trained) return report;

  // recovery policy
  std::ofstream rec_csv(out_dir / "recovery_metrics.csv");
  rec_csv << kRecoveryCsvHeader << '\n';
  std::ofstream agent_csv;
  if (cfg.eval.epoch_episodes > 0) {
    agent_csv.open(out_dir / "agent_metrics.csv");
    agent_csv << kAgentCsvHeader << '\n';
  }
  const auto rec_hook = [&](const RecoveryModels& m, RecoveryEpochMetrics& em) {
    write_csv_row(rec_csv, {std::to_string(em.epoch), format_number(em.qc_loss), format_number(em.qr_loss),
                            format_number(em.recovery_policy_loss), format_number(em.lambda),
                            format_number(em.mean_qc), format_number(em.fraction_batch_above_l)});
    rec_csv.flush();
    if (cfg.eval.epoch_episodes > 0) {
      const RunMetrics r =
          evaluate_agent(RbslAgent{goal.models.policy, m.policy, m.q_c, rec_cfg.limit, true, cfg.env.action_max});
      write_csv_row(agent_csv, {std::to_string(em.epoch), format_number(r.success_rate),
                                format_number(r.discounted_return), format_number(r.cost_return),
                                format_number(r.recovery_activation_rate)});
      agent_csv.flush();
    }
    if (em.epoch % cfg.checkpoint_every == 0 || em.epoch == rec_cfg.epochs)
      save_recovery_models(out_dir / "checkpoints" / epoch_dir_name("recovery", em.epoch), m);
  };
  const RecoveryTrainResult rec = train_recovery(recovery_set, goal.models.policy, rec_cfg, rec_hook);
  save_recovery_models(out_dir / "models", rec.models);
  return report;
}

// ---- evaluation ------------------------------------------------------------------

struct LoadedRun {
  RunConfig config;
  RbslAgent agent;
};

/// Rebuilds the agent of a trained run directory from its manifest and models.
inline LoadedRun load_run(const fs::path& run_dir) {
  const nlohmann::json manifest = read_json_file(run_dir / "manifest.json");
  LoadedRun out;
  out.config = run_config_from_json(manifest.at("config"));
  const auto& a = manifest.at("agent");
  out.agent.switching = a.at("switching").get<bool>();
  out.agent.limit = a.at("switch_limit").get<double>();
  out.agent.action_max = out.config.env.action_max;
  out.agent.goal_policy = load_network(run_dir / "models" / "goal_policy.json");
  if (out.agent.switching) {
    out.agent.recovery_policy = load_network(run_dir / "models" / "recovery_policy.json");
    out.agent.cost_q = load_network(run_dir / "models" / "cost_q.json");
  }
  return out;
}

inline const char* kEvalCsvHeader =
    "seed,episodes,success_rate,discounted_return,cost_return,cost_return_discounted,recovery_activation_rate";

inline std::vector<std::string> metrics_row(const RunMetrics& m) {
  return {std::to_string(m.seed),           std::to_string(m.episodes),
          format_number(m.success_rate),    format_number(m.discounted_return),
          format_number(m.cost_return),     format_number(m.cost_return_discounted),
          format_number(m.recovery_activation_rate)};
}

/// Last CSV row: every metric as "mean+-std" over seeds.
inline std::vector<std::string> aggregate_row(const std::vector<RunMetrics>& runs) {
  const auto cell = [&](auto field) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(r.*field);
    const MeanStd ms = mean_std(xs);
    return format_number(ms.mean) + "+-" + format_number(ms.std);
  };
  return {"mean+-std",
          runs.empty() ? "0" : std::to_string(runs.front().episodes),
          cell(&RunMetrics::success_rate),
          cell(&RunMetrics::discounted_return),
          cell(&RunMetrics::cost_return),
          cell(&RunMetrics::cost_return_discounted),
          cell(&RunMetrics::recovery_activation_rate)};
}

inline nlohmann::json record_to_json(const EpisodeRecord& r, std::uint64_t seed) {
  nlohmann::json decisions = nlohmann::json::array();
  for (Decision d : r.decisions) decisions.push_back(to_string(d));
  nlohmann::json actions = nlohmann::json::array();
  for (const Action& a : r.actions) actions.push_back(vec_to_json(a));
  nlohmann::json qc = nlohmann::json::array();
  for (double q : r.goal_cost_q) qc.push_back(std::isnan(q) ? nlohmann::json(nullptr) : nlohmann::json(q));
  return {{"seed", seed},         {"reset_seed", r.reset_seed}, {"goal", vec_to_json(r.goal)},
          {"actions", actions},   {"rewards", r.rewards},       {"costs", r.costs},
          {"decisions", decisions}, {"goal_cost_q", qc},        {"final_distance", r.final_distance}};
}

struct EvalOptions {
  int episodes = 100;
  std::vector<std::uint64_t> seeds;
  bool no_switching = false;
  fs::path metrics_out;  ///< empty: <run>/eval_metrics.csv or eval_metrics_no_switching.csv
  fs::path records_out;  ///< empty: no records
};

inline std::vector<RunMetrics> eval_run(const fs::path& run_dir, const EvalOptions& opts) {
  LoadedRun run = load_run(run_dir);
  if (opts.no_switching) run.agent.switching = false;
  if (opts.seeds.empty()) throw ConfigError("eval: no seeds given");
  std::vector<RunMetrics> out;
  std::ofstream records;
  if (!opts.records_out.empty()) records.open(opts.records_out);
  for (std::uint64_t s : opts.seeds) {
    const EvaluationResult r = evaluate(run.agent, run.config.env, opts.episodes, s, run.config.goal.gamma);
    out.push_back(r.metrics);
    if (records.is_open())
      for (const auto& rec : r.records) records << record_to_json(rec, s).dump() << '\n';
  }
  fs::path path = opts.metrics_out;
  if (path.empty()) path = run_dir / (opts.no_switching ? "eval_metrics_no_switching.csv" : "eval_metrics.csv");
  std::ofstream csv(path);
  if (!csv) throw ConfigError("cannot write " + path.string());
  csv << kEvalCsvHeader << '\n';
  for (const auto& m : out) write_csv_row(csv, metrics_row(m));
  write_csv_row(csv, aggregate_row(out));
  return out;
}

}  // namespace rbsl
