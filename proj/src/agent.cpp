#include "larm/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "larm/errors.hpp"

namespace larm {

namespace {

int argmax_lowest(const std::vector<double>& values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

EmbeddingVector one_hot_state(int u, int d) {
  if (u < 0 || u >= d) {
    throw BadArg(0, "state id " + std::to_string(u) + " does not fit a one-hot of size " +
                        std::to_string(d));
  }
  EmbeddingVector e = EmbeddingVector::Zero(d);
  e(u) = 1.0;
  return e;
}

bool embeddings_on(ConditioningMode mode) {
  return mode == ConditioningMode::kBoth || mode == ConditioningMode::kEmbeddingsOnly;
}

bool rm_rewards_on(ConditioningMode mode) {
  return mode == ConditioningMode::kBoth || mode == ConditioningMode::kRewardsOnly;
}

// phi(u) as the policy sees it: zeroed when the mode drops conditioning.
EmbeddingVector conditioning_vector(const TaskBundle& bundle, int u, ConditioningMode mode,
                                    EmbeddingSource source, int dim) {
  if (!embeddings_on(mode)) return EmbeddingVector::Zero(dim);
  if (source == EmbeddingSource::kOneHot) return one_hot_state(u, dim);
  const EmbeddingVector& e = bundle.machine.embedding(u);
  if (e.size() != dim) throw DimensionMismatch("machine embedding dimension mismatch");
  return e;
}

// Tabular key: the RM state when conditioning is on, a constant otherwise.
int tabular_key(int u, ConditioningMode mode) { return embeddings_on(mode) ? u : 0; }

void check_bundles(const std::vector<TaskBundle>& tasks) {
  if (tasks.empty()) throw BadArg(0, "at least one task is required");
  for (const TaskBundle& b : tasks) {
    for (int e = 0; e < b.machine.num_events(); ++e) {
      if (!b.labeling.has(b.machine.event_name(e))) {
        throw UnknownEvent("labeling does not cover event " + b.machine.event_name(e));
      }
    }
  }
}

struct Rollout {
  double env_return = 0.0;
  double rm_return = 0.0;
  bool success = false;
  int steps = 0;
};

}  // namespace

std::string mode_name(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::kBoth:
      return "both";
    case ConditioningMode::kRewardsOnly:
      return "rewards_only";
    case ConditioningMode::kEmbeddingsOnly:
      return "embeddings_only";
    case ConditioningMode::kNeither:
      return "neither";
  }
  throw BadArg(0, "bad conditioning mode");
}

ConditioningMode mode_from_name(const std::string& name) {
  if (name == "both") return ConditioningMode::kBoth;
  if (name == "rewards_only") return ConditioningMode::kRewardsOnly;
  if (name == "embeddings_only") return ConditioningMode::kEmbeddingsOnly;
  if (name == "neither") return ConditioningMode::kNeither;
  throw BadArg(0, "unknown conditioning mode: " + name);
}

void TrainConfig::validate() const {
  if (total_steps < 1) throw BadArg(0, "total_steps must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw BadArg(0, "gamma must be in (0, 1]");
  if (!(eps_end >= 0.0 && eps_end <= eps_start && eps_start <= 1.0)) {
    throw BadArg(0, "need 0 <= eps_end <= eps_start <= 1");
  }
  if (!(exploration_fraction >= 0.0 && exploration_fraction <= 1.0)) {
    throw BadArg(0, "exploration_fraction must be in [0, 1]");
  }
  if (alpha <= 0.0) throw BadArg(0, "alpha must be positive");
  if (batch_size < 1) throw BadArg(0, "batch_size must be positive");
  if (replay_capacity < batch_size) throw BadArg(0, "replay must hold at least one batch");
  if (learning_starts < 0) throw BadArg(0, "learning_starts must be nonnegative");
  if (target_update_period < 1) throw BadArg(0, "target_update_period must be positive");
}

std::string TrainReport::to_csv() const {
  std::string out = "episode,env_return,rm_return,success,steps\n";
  char line[128];
  for (const EpisodeStats& e : episodes) {
    std::snprintf(line, sizeof(line), "%d,%.6g,%.6g,%d,%d\n", e.episode, e.env_return,
                  e.rm_return, e.success ? 1 : 0, e.steps);
    out += line;
  }
  return out;
}

double TrainReport::final_window_success(int window) const {
  if (episodes.empty() || window < 1) return 0.0;
  int n = static_cast<int>(episodes.size());
  int start = std::max(0, n - window);
  double hits = 0.0;
  for (int i = start; i < n; ++i) hits += episodes[i].success ? 1.0 : 0.0;
  return hits / (n - start);
}

int TrainReport::first_rm_return_crossing(int window, double threshold) const {
  int n = static_cast<int>(episodes.size());
  if (window < 1 || n < window) return -1;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    sum += episodes[i].rm_return;
    if (i >= window) sum -= episodes[i - window].rm_return;
    if (i >= window - 1 && sum / window >= threshold) return i;
  }
  return -1;
}

int TrainReport::first_success_streak(int streak) const {
  if (streak < 1) return -1;
  int run = 0;
  for (int i = 0; i < static_cast<int>(episodes.size()); ++i) {
    run = episodes[i].success ? run + 1 : 0;
    if (run >= streak) return i;
  }
  return -1;
}

TrainReport train(const std::vector<TaskBundle>& tasks, QFunction& qfn, const TrainConfig& cfg,
                  ConditioningMode mode, EmbeddingSource source) {
  cfg.validate();
  check_bundles(tasks);
  const bool linear = qfn.is_linear();
  const int num_actions = qfn.num_actions();
  const int embed_dim = linear ? qfn.linear().embedding_dim() : 0;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, num_actions - 1);

  std::vector<AugmentedTransition> replay;
  replay.reserve(std::min<long>(cfg.replay_capacity, cfg.total_steps));
  std::size_t replay_next = 0;

  const double decay_steps = std::max(1.0, cfg.exploration_fraction * cfg.total_steps);

  TrainReport report;
  long step = 0;
  int episode = 0;
  while (step < cfg.total_steps) {
    const TaskBundle& bundle = tasks[episode % tasks.size()];
    const int task_index = episode % static_cast<int>(tasks.size());
    auto [env, obs] = env_reset(bundle.task, rng());
    int u = bundle.machine.initial_state();

    Rollout roll;
    SparseFeatures feat;
    if (linear) feat = qfn.linear().features().extract(obs);
    std::uint64_t h = obs_hash(obs);
    bool truncated = false;

    while (!env.done) {
      if (step >= cfg.total_steps) {
        truncated = true;
        break;
      }
      double eps =
          cfg.eps_start + (cfg.eps_end - cfg.eps_start) * std::min(1.0, step / decay_steps);
      int a;
      if (unit(rng) < eps) {
        a = random_action(rng);
      } else if (linear) {
        a = argmax_lowest(
            qfn.linear().values(feat, conditioning_vector(bundle, u, mode, source, embed_dim)));
      } else {
        a = argmax_lowest(qfn.tabular().values(h, tabular_key(u, mode)));
      }

      StepResult r = env_step(env, a);
      StepOutcome out =
          rm_step(bundle.machine, u, resolve_event(bundle.machine, bundle.labeling, u, r.obs));
      double rm_r = rm_rewards_on(mode) ? out.reward : 0.0;
      double r_total = r.reward + rm_r;
      roll.env_return += r.reward;
      roll.rm_return += rm_r;
      if (r.reward == 1.0) roll.success = true;
      ++roll.steps;

      std::uint64_t h_next = obs_hash(r.obs);
      SparseFeatures feat_next;
      if (linear) feat_next = qfn.linear().features().extract(r.obs);

      if (linear) {
        AugmentedTransition tr;
        tr.s = feat;
        tr.s_hash = h;
        tr.task = task_index;
        tr.u = u;
        tr.a = a;
        tr.r_total = r_total;
        tr.s_next = feat_next;
        tr.s_next_hash = h_next;
        tr.u_next = out.next_state;
        tr.done = r.done;
        if (static_cast<int>(replay.size()) < cfg.replay_capacity) {
          replay.push_back(std::move(tr));
        } else {
          replay[replay_next] = std::move(tr);
          replay_next = (replay_next + 1) % replay.size();
        }

        if (step >= cfg.learning_starts && !replay.empty()) {
          std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
          std::vector<LinearQ::TdSample> batch;
          batch.reserve(cfg.batch_size);
          for (int b = 0; b < cfg.batch_size; ++b) {
            const AugmentedTransition& t = replay[pick(rng)];
            const TaskBundle& tb = tasks[t.task];
            double y = t.r_total;
            if (!t.done) {
              std::vector<double> next = qfn.linear().target_values(
                  t.s_next, conditioning_vector(tb, t.u_next, mode, source, embed_dim));
              y += cfg.gamma * *std::max_element(next.begin(), next.end());
            }
            batch.push_back(
                {&t.s, conditioning_vector(tb, t.u, mode, source, embed_dim), t.a, y});
          }
          qfn.linear().update_batch(batch, cfg.alpha);
        }
        if ((step + 1) % cfg.target_update_period == 0) qfn.linear().sync_target();
      } else {
        // One-step Q-learning on the fresh tuple.
        int ku = tabular_key(u, mode);
        int ku_next = tabular_key(out.next_state, mode);
        double y = r_total;
        if (!r.done) {
          std::vector<double> next = qfn.tabular().values(h_next, ku_next);
          y += cfg.gamma * *std::max_element(next.begin(), next.end());
        }
        qfn.tabular().update(h, ku, a, y, cfg.alpha);
      }

      u = out.next_state;
      h = h_next;
      feat = std::move(feat_next);
      ++step;
    }

    if (!truncated) {
      report.episodes.push_back({episode, roll.env_return, roll.rm_return, roll.success,
                                 roll.steps});
      ++episode;
    }
  }
  return report;
}

namespace {

Rollout run_greedy_episode(const TaskBundle& bundle, const QFunction& qfn, std::uint64_t env_seed,
                           ConditioningMode mode, EmbeddingSource source) {
  auto [env, obs] = env_reset(bundle.task, env_seed);
  int u = bundle.machine.initial_state();
  const bool linear = qfn.is_linear();
  const int embed_dim = linear ? qfn.linear().embedding_dim() : 0;
  Rollout roll;
  while (!env.done) {
    int a;
    if (linear) {
      SparseFeatures feat = qfn.linear().features().extract(obs);
      a = argmax_lowest(
          qfn.linear().values(feat, conditioning_vector(bundle, u, mode, source, embed_dim)));
    } else {
      a = argmax_lowest(qfn.tabular().values(obs_hash(obs), tabular_key(u, mode)));
    }
    StepResult r = env_step(env, a);
    StepOutcome out =
        rm_step(bundle.machine, u, resolve_event(bundle.machine, bundle.labeling, u, r.obs));
    roll.env_return += r.reward;
    roll.rm_return += out.reward;
    if (r.reward == 1.0) roll.success = true;
    ++roll.steps;
    u = out.next_state;
    obs = std::move(r.obs);
  }
  return roll;
}

}  // namespace

double evaluate(const TaskBundle& task, const QFunction& qfn, int episodes, std::uint64_t seed,
                ConditioningMode mode, EmbeddingSource source) {
  if (episodes < 1) throw BadArg(0, "evaluate needs at least one episode");
  check_bundles({task});
  std::mt19937_64 rng(seed);
  int hits = 0;
  for (int i = 0; i < episodes; ++i) {
    if (run_greedy_episode(task, qfn, rng(), mode, source).success) ++hits;
  }
  return static_cast<double>(hits) / episodes;
}

double evaluate_policy(const TaskBundle& task, const Policy& policy, int episodes,
                       std::uint64_t seed) {
  if (episodes < 1) throw BadArg(0, "evaluate needs at least one episode");
  check_bundles({task});
  std::mt19937_64 rng(seed);
  int hits = 0;
  for (int i = 0; i < episodes; ++i) {
    auto [env, obs] = env_reset(task.task, rng());
    int u = task.machine.initial_state();
    bool success = false;
    while (!env.done) {
      StepResult r = env_step(env, policy(obs, u));
      StepOutcome out =
          rm_step(task.machine, u, resolve_event(task.machine, task.labeling, u, r.obs));
      if (r.reward == 1.0) success = true;
      u = out.next_state;
      obs = std::move(r.obs);
    }
    if (success) ++hits;
  }
  return static_cast<double>(hits) / episodes;
}

double zero_shot_eval(const QFunction& qfn, const TaskBundle& task, int episodes,
                      std::uint64_t seed, EmbeddingSource source) {
  if (!qfn.is_linear()) {
    throw BadArg(0, "zero-shot evaluation requires the linear backend");
  }
  return evaluate(task, qfn, episodes, seed, ConditioningMode::kBoth, source);
}

FeatureExtractor suite_features(const std::vector<TaskBundle>& suite) {
  if (suite.empty()) throw BadArg(0, "at least one task is required");
  int width = 1, height = 1, doors = 0;
  for (const TaskBundle& b : suite) {
    auto [env, obs] = env_reset(b.task, 0);
    width = std::max(width, env.width);
    height = std::max(height, env.height);
    int d = 0;
    for (const Cell& c : env.cells) d += c.type == ObjectType::kDoor ? 1 : 0;
    doors = std::max(doors, d);
  }
  return FeatureExtractor(width, height, doors);
}

std::vector<AblationRow> run_ablation(const std::vector<TaskBundle>& suite,
                                      const TrainConfig& cfg,
                                      const std::vector<std::uint64_t>& seeds, Backend backend,
                                      int eval_episodes) {
  check_bundles(suite);
  if (seeds.empty()) throw BadArg(0, "at least one seed is required");

  // Shared feature space: large enough for every task in the suite.
  FeatureExtractor features = suite_features(suite);

  const ConditioningMode modes[] = {ConditioningMode::kBoth, ConditioningMode::kRewardsOnly,
                                    ConditioningMode::kEmbeddingsOnly,
                                    ConditioningMode::kNeither};
  std::vector<AblationRow> rows;
  for (ConditioningMode mode : modes) {
    AblationRow row;
    row.mode = mode_name(mode);
    for (std::uint64_t seed : seeds) {
      TrainConfig run_cfg = cfg;
      run_cfg.seed = seed;
      QFunction qfn = backend == Backend::kLinear
                          ? QFunction::make_linear(features, kEmbeddingDim, kNumActions)
                          : QFunction::make_tabular(kNumActions);
      train(suite, qfn, run_cfg, mode);
      std::mt19937_64 eval_rng(seed ^ 0x5eed5eedULL);
      double mean_success = 0.0;
      for (const TaskBundle& b : suite) {
        mean_success += evaluate(b, qfn, eval_episodes, eval_rng(), mode);
      }
      row.per_seed.push_back(mean_success / suite.size());
    }
    double mean = 0.0;
    for (double v : row.per_seed) mean += v;
    mean /= row.per_seed.size();
    double var = 0.0;
    for (double v : row.per_seed) var += (v - mean) * (v - mean);
    row.mean = mean;
    row.stddev = std::sqrt(var / row.per_seed.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace larm
