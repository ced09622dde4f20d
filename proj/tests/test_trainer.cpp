#include "rode/train/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rode/train/metrics.hpp"

using namespace rode;

namespace {

// A deliberately tiny run: large enough to cross the phase boundary, reach
// buffer readiness, and hit two evaluation points, small enough to keep the
// whole suite fast.
ExperimentConfig tiny_config(int role_interval = 5) {
  ExperimentConfig cfg;
  cfg.seed = 11;
  cfg.env_name = "effect";
  cfg.env_overrides = {{"horizon", 12}, {"obs_dim", 3}};
  cfg.train.total_steps = 600;
  cfg.train.t_e = 200;
  cfg.train.role_interval = role_interval;
  cfg.train.clusters = 3;
  cfg.train.repr_dim = 6;
  cfg.train.repr_hidden = 16;
  cfg.train.epsilon_anneal_steps = 300;
  cfg.train.batch_size = 4;
  cfg.train.buffer_capacity = 64;
  cfg.train.target_interval = 5;
  cfg.train.hidden = 16;
  cfg.train.mixer_embed = 8;
  cfg.logging.eval_interval = 200;
  cfg.logging.eval_episodes = 4;
  cfg.validate();
  return cfg;
}

struct RunLog {
  TrainOutcome outcome;
  std::vector<json> records;
  std::string raw;
};

RunLog run_tiny(const ExperimentConfig& cfg) {
  std::ostringstream out;
  MetricsWriter writer(out);
  Trainer trainer(cfg, &writer);
  RunLog log{trainer.run(), {}, out.str()};
  std::istringstream in(log.raw);
  ParsedMetrics parsed = parse_metrics(in);
  EXPECT_EQ(parsed.skipped, 0u);
  log.records = std::move(parsed.records);
  return log;
}

bool has_event(const json& rec, const std::string& name) {
  return rec.contains("event") && rec.at("event").get<std::string>() == name;
}

}  // namespace

TEST(Trainer, PhaseTransitionHappensExactlyAtTheConfiguredBoundary) {
  const ExperimentConfig cfg = tiny_config();
  RunLog log = run_tiny(cfg);

  std::int64_t transition_step = -1;
  std::int64_t max_phase1_step = -1;
  std::int64_t min_phase2_step = -1;
  for (const json& rec : log.records) {
    if (has_event(rec, "phase_transition")) {
      EXPECT_EQ(transition_step, -1) << "transition must be recorded once";
      transition_step = rec.at("step").get<std::int64_t>();
    }
    if (rec.contains("phase")) {
      const std::int64_t step = rec.at("step").get<std::int64_t>();
      if (rec.at("phase").get<int>() == 1) {
        max_phase1_step = std::max(max_phase1_step, step);
      } else if (min_phase2_step < 0) {
        min_phase2_step = step;
      }
    }
  }
  EXPECT_EQ(transition_step, cfg.train.t_e);
  EXPECT_LE(max_phase1_step, cfg.train.t_e);
  EXPECT_GT(min_phase2_step, cfg.train.t_e);
}

TEST(Trainer, ExplorationScheduleIsLinearWithTheDocumentedMidpoint) {
  TrainSettings ts;
  ts.epsilon_start = 1.0;
  ts.epsilon_end = 0.05;
  ts.epsilon_anneal_steps = 50000;
  EXPECT_DOUBLE_EQ(epsilon_at(ts, 0), 1.0);
  EXPECT_DOUBLE_EQ(epsilon_at(ts, 25000), 0.525);
  EXPECT_DOUBLE_EQ(epsilon_at(ts, 50000), 0.05);
  EXPECT_DOUBLE_EQ(epsilon_at(ts, 123456), 0.05);
  EXPECT_DOUBLE_EQ(epsilon_at(ts, -10), 1.0);
}

TEST(Trainer, RoleDecisionsFollowTheCeilingScheduleForEveryInterval) {
  for (int c : {1, 3, 5, 7}) {
    const ExperimentConfig cfg = tiny_config(c);
    RunLog log = run_tiny(cfg);
    const int n_agents = 2;
    bool saw_phase2 = false;
    for (const json& rec : log.records) {
      if (!rec.contains("phase") || rec.at("phase").get<int>() != 2) continue;
      saw_phase2 = true;
      const std::int64_t length = rec.at("length").get<std::int64_t>();
      const std::int64_t fires = rec.at("role_fires").get<std::int64_t>();
      const std::int64_t expected = n_agents * ((length + c - 1) / c);
      EXPECT_EQ(fires, expected) << "interval " << c << " length " << length;
    }
    EXPECT_TRUE(saw_phase2);
  }
}

TEST(Trainer, CountersStayConsistentWithTheEpisodeLog) {
  const ExperimentConfig cfg = tiny_config();
  RunLog log = run_tiny(cfg);

  std::int64_t summed_lengths = 0;
  std::int64_t phase2_records = 0;
  for (const json& rec : log.records) {
    if (!rec.contains("phase")) continue;
    summed_lengths += rec.at("length").get<std::int64_t>();
    if (rec.at("phase").get<int>() == 2) ++phase2_records;
  }
  EXPECT_EQ(summed_lengths, log.outcome.env_steps);
  // Both phases truncate their last episode at the budget boundary, so the
  // run lands on the configured step count exactly.
  EXPECT_EQ(log.outcome.env_steps, cfg.train.total_steps);
  EXPECT_EQ(log.outcome.phase2_episodes, phase2_records);
  // The replay buffer becomes ready during the random phase, so every
  // hierarchical episode triggers exactly one update of each learner.
  EXPECT_EQ(log.outcome.policy_updates, log.outcome.phase2_episodes);
  EXPECT_EQ(log.outcome.selector_updates, log.outcome.phase2_episodes);
}

TEST(Trainer, RandomPhaseEpisodesStayInTheSharedBuffer) {
  ExperimentConfig cfg = tiny_config();
  cfg.train.buffer_capacity = 512;  // roomy enough that nothing is evicted
  std::ostringstream out;
  MetricsWriter writer(out);
  Trainer trainer(cfg, &writer);
  TrainOutcome outcome = trainer.run();
  EXPECT_EQ(trainer.buffer().size(),
            static_cast<std::size_t>(outcome.episodes));
  EXPECT_GT(outcome.episodes, outcome.phase2_episodes);
}

TEST(Trainer, EpisodeRecordsCarryNormalizedRoleUseAndFallbacks) {
  const ExperimentConfig cfg = tiny_config();
  RunLog log = run_tiny(cfg);

  std::int64_t last_fallback = -1;
  for (const json& rec : log.records) {
    if (!rec.contains("phase") || rec.at("phase").get<int>() != 2) continue;
    ASSERT_TRUE(rec.contains("role_freq"));
    double total = 0.0;
    for (const json& v : rec.at("role_freq")) total += v.get<double>();
    EXPECT_NEAR(total, 1.0, 1e-12);
    ASSERT_TRUE(rec.contains("fallback"));
    const std::int64_t fallback = rec.at("fallback").get<std::int64_t>();
    EXPECT_GE(fallback, last_fallback);
    last_fallback = fallback;
    EXPECT_DOUBLE_EQ(
        rec.at("epsilon").get<double>(),
        epsilon_at(cfg.train, rec.at("step").get<std::int64_t>() - cfg.train.t_e));
  }
  // Evaluation rollouts can add fallbacks after the last training episode.
  EXPECT_LE(static_cast<std::uint64_t>(last_fallback), log.outcome.fallback_events);
}

TEST(Trainer, PeriodicEvaluationFollowsTheConfiguredSchedule) {
  const ExperimentConfig cfg = tiny_config();
  RunLog log = run_tiny(cfg);

  std::vector<std::int64_t> eval_points;
  bool saw_final = false;
  for (const json& rec : log.records) {
    if (has_event(rec, "eval")) {
      eval_points.push_back(rec.at("eval_at").get<std::int64_t>());
      EXPECT_TRUE(rec.contains("win_rate"));
      EXPECT_TRUE(rec.contains("mean_return"));
    }
    if (has_event(rec, "final")) {
      saw_final = true;
      EXPECT_TRUE(rec.contains("win_rate"));
    }
  }
  // With t_e = 200, interval = 200, total = 600 the periodic points are the
  // interior multiples 400 (and any the episode overshoot reaches below 600).
  ASSERT_FALSE(eval_points.empty());
  for (std::size_t i = 0; i < eval_points.size(); ++i) {
    EXPECT_EQ(eval_points[i] % cfg.logging.eval_interval, 0);
    EXPECT_GT(eval_points[i], cfg.train.t_e);
    EXPECT_LT(eval_points[i], cfg.train.total_steps);
    if (i > 0) EXPECT_GT(eval_points[i], eval_points[i - 1]);
  }
  EXPECT_TRUE(saw_final);
  const EvalStats& final_eval = log.outcome.final_eval;
  EXPECT_GE(final_eval.win_rate, 0.0);
  EXPECT_LE(final_eval.win_rate, 1.0);
}

TEST(Trainer, RepeatRunsWithTheSameSeedProduceIdenticalLogs) {
  const ExperimentConfig cfg = tiny_config();
  RunLog a = run_tiny(cfg);
  RunLog b = run_tiny(cfg);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.outcome.env_steps, b.outcome.env_steps);
  EXPECT_EQ(a.outcome.episodes, b.outcome.episodes);

  ExperimentConfig other = cfg;
  other.seed = 12;
  RunLog c = run_tiny(other);
  EXPECT_NE(a.raw, c.raw);
}

TEST(Trainer, DivergenceAbortsWithDiagnosticsInsteadOfLoggingGarbage) {
  ExperimentConfig cfg = tiny_config();
  cfg.train.learning_rate = 1e80;  // forces non-finite losses immediately
  std::ostringstream out;
  MetricsWriter writer(out);
  Trainer trainer(cfg, &writer);
  EXPECT_THROW(trainer.run(), NanAbort);

  std::istringstream in(out.str());
  ParsedMetrics parsed = parse_metrics(in);
  EXPECT_EQ(parsed.skipped, 0u);
  bool saw_abort = false;
  for (const json& rec : parsed.records) {
    if (has_event(rec, "nan_abort")) saw_abort = true;
  }
  EXPECT_TRUE(saw_abort);
}

TEST(Trainer, VariantFlagsShapeTheRoleStructure) {
  // Full action spaces: every role covers all actions, no clustering output.
  ExperimentConfig full = tiny_config();
  full.ablation.full_action_spaces = true;
  RunLog full_log = run_tiny(full);
  EXPECT_EQ(full_log.outcome.roles.count(), full.train.clusters);
  const int action_count = full_log.outcome.roles.action_count();
  for (int j = 0; j < full_log.outcome.roles.count(); ++j) {
    EXPECT_EQ(static_cast<int>(full_log.outcome.roles.members(j).size()),
              action_count);
  }
  EXPECT_TRUE(full_log.outcome.table.defined());

  // Random restriction keeps the role count but samples the subspaces.
  ExperimentConfig rnd = tiny_config();
  rnd.ablation.random_restricted = true;
  RunLog rnd_log = run_tiny(rnd);
  EXPECT_EQ(rnd_log.outcome.roles.count(), rnd.train.clusters);

  // Bypassing the representation stage leaves the embedding table empty.
  ExperimentConfig bypass = tiny_config();
  bypass.ablation.full_action_spaces = true;
  bypass.ablation.conventional_q = true;
  RunLog bypass_log = run_tiny(bypass);
  EXPECT_FALSE(bypass_log.outcome.table.defined());
  EXPECT_EQ(bypass_log.outcome.roles.count(), bypass.train.clusters);
  for (const json& rec : bypass_log.records) {
    if (rec.contains("phase") && rec.at("phase").get<int>() == 1) {
      EXPECT_FALSE(rec.contains("repr_loss"));
    }
  }
}

TEST(Trainer, PartialOutcomeIsOnlyAvailableAfterTheTransition) {
  const ExperimentConfig cfg = tiny_config();
  Trainer trainer(cfg, nullptr);
  EXPECT_THROW(trainer.partial_outcome(), std::runtime_error);
  TrainOutcome outcome = trainer.run();
  TrainOutcome partial = trainer.partial_outcome();
  EXPECT_EQ(partial.env_steps, outcome.env_steps);
  EXPECT_EQ(partial.roles.count(), outcome.roles.count());
}

TEST(Trainer, RandomRoleGenerationIsCoveringAndBounded) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    RoleSet roles = random_roles(3, 7, rng);
    EXPECT_EQ(roles.count(), 3);
    std::vector<bool> covered(7, false);
    for (int j = 0; j < roles.count(); ++j) {
      EXPECT_GE(roles.members(j).size(), 2u);
      for (int a : roles.members(j)) covered[static_cast<std::size_t>(a)] = true;
    }
    for (int a = 0; a < 7; ++a) EXPECT_TRUE(covered[static_cast<std::size_t>(a)]) << a;
  }
}
