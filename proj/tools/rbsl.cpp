// rbsl: gen-data, train, eval and plot subcommands.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rbsl/plot.hpp"
#include "rbsl/run.hpp"

namespace {

using namespace rbsl;

std::uint64_t seed_override(std::uint64_t flag_value) {
  if (const char* env = std::getenv("RBSL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("RBSL_SEED is not an unsigned integer: ") + env);
    }
  }
  return flag_value;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--seeds", "not a comma-separated list of integers: " + s);
    }
  }
  if (out.empty()) throw CLI::ValidationError("--seeds", "empty seed list");
  return out;
}

void print_stats(const DatasetStats& s) {
  std::cout << "trajectories=" << s.trajectories << " transitions=" << s.transitions
            << " success_rate=" << format_number(s.success_rate) << " mean_return=" << format_number(s.mean_return)
            << " mean_cost_return=" << format_number(s.mean_cost_return)
            << " expert_fraction=" << format_number(s.expert_fraction) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recovery-based supervised learning for constrained offline goal-conditioned RL"};
  app.set_version_flag("--version", rbsl::kVersion);
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Collect an expert or random dataset");
  std::string env_name, policy, gen_out;
  int episodes = 0;
  std::uint64_t gen_seed = 0;
  double noise_std = ScriptedExpert::kDefaultNoise;
  double p_block = EnvConfig{}.p_block;
  gen->add_option("--env", env_name, "reach2d or push2d")->required()->check(CLI::IsMember({"reach2d", "push2d"}));
  gen->add_option("--policy", policy, "expert or random")->required()->check(CLI::IsMember({"expert", "random"}));
  gen->add_option("--episodes", episodes)->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed)->required();
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--noise-std", noise_std, "expert action noise (world units)")->check(CLI::NonNegativeNumber);
  gen->add_option("--p-block", p_block, "probability that the obstacle blocks the straight path")
      ->check(CLI::Range(0.0, 1.0));

  // train
  auto* train = app.add_subcommand("train", "Train goal and recovery policies into a run directory");
  std::string config_path, data_path, random_path, train_out, ablation;
  double expert_fraction = -1.0;
  int total = 0;
  train->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  train->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  auto* random_opt = train->add_option("--data-random", random_path)->check(CLI::ExistingFile);
  auto* fraction_opt = train->add_option("--expert-fraction", expert_fraction)->check(CLI::Range(0.0, 1.0));
  random_opt->needs(fraction_opt);
  fraction_opt->needs(random_opt);
  train->add_option("--total", total, "trajectories after mixing (default: size of --data)")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--out", train_out)->required();
  train->add_option("--ablation", ablation)->check(CLI::IsMember({"wgcsl-only"}));

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run");
  std::string run_dir, seeds_arg, eval_out, records_out;
  int eval_episodes = 0;
  bool no_switching = false;
  eval->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--episodes", eval_episodes)->required()->check(CLI::PositiveNumber);
  eval->add_option("--seeds", seeds_arg, "comma-separated, e.g. 0,1,2,3,4")->required();
  eval->add_flag("--no-switching", no_switching, "always act with the goal policy");
  eval->add_option("--out", eval_out, "metrics CSV (default: inside the run directory)");
  eval->add_option("--records", records_out, "write per-episode records as JSON Lines");

  // plot
  auto* plot = app.add_subcommand("plot", "Render per-epoch returns and cost returns as SVG");
  std::string metrics_path, plot_out;
  double limit = 0.0;
  plot->add_option("--metrics", metrics_path)->required()->check(CLI::ExistingFile);
  auto* limit_opt = plot->add_option("--limit", limit)->check(CLI::PositiveNumber);
  plot->add_option("--out", plot_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      EnvConfig cfg;
      cfg.variant = parse_variant(env_name);
      cfg.p_block = p_block;
      cfg.seed = seed_override(gen_seed);
      cfg.validate();
      Dataset d{cfg, policy == "expert" ? rollout_expert(cfg, episodes, noise_std, cfg.seed)
                                        : rollout_random(cfg, episodes, cfg.seed)};
      save_dataset(d, std::filesystem::path(gen_out));
      print_stats(compute_stats(d));
    } else if (train->parsed()) {
      std::ifstream in(config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      RunConfig cfg = run_config_from_json(j);
      // Without an explicit env block the run adopts the dataset's environment.
      if (!j.contains("env")) {
        cfg.env = load_dataset(std::filesystem::path(data_path)).env;
        cfg.env.seed = EnvConfig{}.seed;
      }
      cfg.seed = seed_override(cfg.seed);
      cfg.data.path = data_path;
      cfg.data.random_path = random_path;
      if (fraction_opt->count()) cfg.data.expert_fraction = expert_fraction;
      if (total > 0) cfg.data.total = total;
      const TrainReport r = train_run(cfg, train_out, ablation == "wgcsl-only");
      print_stats(r.stats);
      std::cout << "expert_set=" << r.expert_set_size << " recovery_set=" << r.recovery_set_size
                << " recovery_trained=" << (r.recovery_trained ? "true" : "false")
                << " switching=" << (r.switching ? "true" : "false") << '\n';
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    } else if (eval->parsed()) {
      EvalOptions opts;
      opts.episodes = eval_episodes;
      opts.seeds = parse_seed_list(seeds_arg);
      opts.no_switching = no_switching;
      opts.metrics_out = eval_out;
      opts.records_out = records_out;
      const auto runs = eval_run(run_dir, opts);
      write_csv_row(std::cout, split_csv_line(kEvalCsvHeader));
      for (const auto& m : runs) write_csv_row(std::cout, metrics_row(m));
      write_csv_row(std::cout, aggregate_row(runs));
    } else if (plot->parsed()) {
      std::ifstream in(metrics_path);
      const std::optional<double> l = limit_opt->count() ? std::optional<double>(limit) : std::nullopt;
      const std::string svg = render_metrics_svg(in, l);
      std::ofstream out(plot_out);
      if (!out) throw ConfigError("cannot write " + plot_out);
      out << svg;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
