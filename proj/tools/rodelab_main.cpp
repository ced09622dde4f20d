// Command-line surface for the role-decomposition lab: training, evaluation,
// zero-shot transfer, ablations, cluster inspection, and plot emission.
//
// Exit codes: 0 success, 1 usage or runtime failure, 3 training aborted on a
// non-finite loss. RODE_LAB_SEED overrides any configured or flagged seed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rode/plot/svg.hpp"
#include "rode/train/checkpoint.hpp"
#include "rode/train/trainer.hpp"
#include "rode/train/transfer.hpp"

namespace {

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (const char* env = std::getenv("RODE_LAB_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw std::runtime_error(std::string("RODE_LAB_SEED is not an unsigned integer: ") + env);
    }
  }
  if (flag) return *flag;
  return fallback;
}

int run_training(rode::ExperimentConfig cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream echo(out_dir + "/config.json");
    if (!echo) throw std::runtime_error("cannot write " + out_dir + "/config.json");
    echo << rode::resolved_config_json(cfg).dump(2) << "\n";
  }
  std::ofstream metrics_file(out_dir + "/metrics.jsonl", std::ios::binary);
  if (!metrics_file) throw std::runtime_error("cannot write " + out_dir + "/metrics.jsonl");
  rode::MetricsWriter metrics(metrics_file);
  rode::Trainer trainer(cfg, &metrics);
  // Rolling snapshot at every evaluation point; the completed run replaces it
  // with the final checkpoint.
  trainer.set_eval_hook([&](std::int64_t step) {
    rode::save_checkpoint(rode::make_checkpoint(cfg, trainer.partial_outcome()),
                          out_dir + "/checkpoint_latest.bin");
    std::cout << "step " << step << ": checkpoint_latest.bin updated\n";
  });
  const rode::TrainOutcome outcome = trainer.run();
  rode::save_checkpoint(rode::make_checkpoint(cfg, outcome), out_dir + "/checkpoint.bin");
  std::cout << "done: steps=" << outcome.env_steps << " episodes=" << outcome.episodes
            << " roles=" << outcome.roles.count()
            << " final_win_rate=" << outcome.final_eval.win_rate
            << " final_return=" << outcome.final_eval.mean_return << "\n"
            << "outputs: " << out_dir << "/metrics.jsonl, " << out_dir << "/checkpoint.bin\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-level role learning for cooperative multi-agent control"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, env_name, out_dir, metrics_path, variant;
  std::optional<std::uint64_t> seed_flag;
  int episodes = 32;

  CLI::App* train = app.add_subcommand("train", "run the full two-phase training loop");
  train->add_option("--config", config_path, "experiment configuration file")->required();
  train->add_option("--seed", seed_flag, "seed override (RODE_LAB_SEED wins over this)");
  train->add_option("--out", out_dir, "output directory")->default_val("runs/train");

  CLI::App* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--env", env_name, "environment name (default: the checkpoint's)");
  eval->add_option("--episodes", episodes, "evaluation episode count")->default_val(32);
  eval->add_option("--seed", seed_flag, "evaluation seed");

  CLI::App* transfer = app.add_subcommand("transfer", "zero-shot transfer to a larger action set");
  transfer->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  transfer->add_option("--env", env_name, "target environment name")->required();
  transfer->add_option("--episodes", episodes, "evaluation episode count")->default_val(32);
  transfer->add_option("--seed", seed_flag, "transfer seed");

  CLI::App* ablate = app.add_subcommand("ablate", "train one of the ablation variants");
  ablate->add_option("--config", config_path, "base experiment configuration")->required();
  ablate->add_option("--variant", variant, "A=full spaces, B=random spaces, C=conventional heads, D=A+C")
      ->required()
      ->check(CLI::IsMember({"A", "B", "C", "D"}));
  ablate->add_option("--seed", seed_flag, "seed override (RODE_LAB_SEED wins over this)");
  ablate->add_option("--out", out_dir, "output directory (default runs/ablate_<variant>)");

  CLI::App* cluster = app.add_subcommand("cluster-report", "print the role factorization of a checkpoint");
  cluster->add_option("--ckpt", ckpt_path, "checkpoint file")->required();

  CLI::App* plot = app.add_subcommand("plot", "render learning-curve and role-frequency figures");
  plot->add_option("--metrics", metrics_path, "metrics log (one JSON record per line)")->required();
  plot->add_option("--out", out_dir, "output directory")->default_val("plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (app.got_subcommand(train)) {
      rode::ExperimentConfig cfg = rode::load_experiment_config(config_path);
      cfg.seed = resolve_seed(seed_flag, cfg.seed);
      return run_training(std::move(cfg), out_dir);
    }

    if (app.got_subcommand(eval)) {
      if (episodes < 1) throw std::runtime_error("eval: --episodes must be at least 1");
      const rode::Checkpoint ck = rode::load_checkpoint(ckpt_path);
      rode::RestoredStack stack = rode::restore_learners(ck);
      std::unique_ptr<rode::Env> env = env_name.empty()
                                           ? rode::make_configured_env(stack.config)
                                           : rode::make_env(env_name);
      if (env->spec().action_count != stack.roles.action_count())
        throw std::runtime_error(
            "eval: environment has " + std::to_string(env->spec().action_count) +
            " actions but the checkpoint was trained with " +
            std::to_string(stack.roles.action_count()) + "; use the transfer command instead");
      rode::Rng rng = rode::Rng::stream(resolve_seed(seed_flag, 1), "eval");
      const rode::EvalStats stats = rode::evaluate_policy(
          *env, *stack.selector, *stack.policies, stack.config.train.role_interval, episodes, rng);
      rode::json out{{"episodes", episodes},
                     {"win_rate", stats.win_rate},
                     {"mean_return", stats.mean_return},
                     {"role_freq", stats.role_freq}};
      std::cout << out.dump() << "\n";
      return 0;
    }

    if (app.got_subcommand(transfer)) {
      if (episodes < 1) throw std::runtime_error("transfer: --episodes must be at least 1");
      const rode::Checkpoint ck = rode::load_checkpoint(ckpt_path);
      const rode::TransferReport report =
          rode::run_transfer(ck, env_name, episodes, resolve_seed(seed_flag, 1));
      rode::json out{{"env", env_name},
                     {"identity", report.identity},
                     {"episodes", episodes},
                     {"win_rate", report.transferred.win_rate},
                     {"mean_return", report.transferred.mean_return},
                     {"random_win_rate", report.random_baseline.win_rate},
                     {"random_mean_return", report.random_baseline.mean_return},
                     {"roles", report.roles.count()},
                     {"actions", report.roles.action_count()}};
      std::cout << out.dump() << "\n";
      return 0;
    }

    if (app.got_subcommand(ablate)) {
      rode::ExperimentConfig cfg = rode::load_experiment_config(config_path);
      rode::apply_variant(cfg, variant[0]);
      cfg.seed = resolve_seed(seed_flag, cfg.seed);
      if (out_dir.empty()) out_dir = "runs/ablate_" + variant;
      return run_training(std::move(cfg), out_dir);
    }

    if (app.got_subcommand(cluster)) {
      const rode::Checkpoint ck = rode::load_checkpoint(ckpt_path);
      if (!ck.table.defined())
        throw std::runtime_error(
            "cluster-report: checkpoint carries no action representations "
            "(trained with representation learning disabled?)");
      if (ck.roles.count() < 1)
        throw std::runtime_error("cluster-report: checkpoint has no role factorization");
      std::cout << rode::cluster_report(ck.table, ck.roles);
      return 0;
    }

    if (app.got_subcommand(plot)) {
      std::ifstream in(metrics_path, std::ios::binary);
      if (!in) throw std::runtime_error("plot: cannot open " + metrics_path);
      const rode::ParsedMetrics metrics = rode::parse_metrics(in);
      if (metrics.records.empty()) {
        std::cerr << "plot: no usable records in " << metrics_path << " (skipped "
                  << metrics.skipped << " malformed lines); nothing to draw\n";
        return 0;
      }
      std::filesystem::create_directories(out_dir);
      const rode::PlotOutputs outputs = rode::emit_plots(metrics, out_dir);
      if (outputs.skipped_records > 0)
        std::cerr << "plot: skipped " << outputs.skipped_records << " malformed records\n";
      for (const std::string& file : outputs.files) std::cout << file << "\n";
      return 0;
    }
  } catch (const rode::NanAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
