#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "larm/gridworld.hpp"
#include "larm/labeling.hpp"
#include "larm/machine.hpp"
#include "larm/qfunction.hpp"

namespace larm {

// What the policy is conditioned on and which rewards it is trained with.
// rewards_only replaces phi(u) with a zero vector (tabular: drops the RM
// state from the key); embeddings_only zeroes the RM reward stream; neither
// does both, leaving a plain sparse-reward agent.
enum class ConditioningMode { kBoth, kRewardsOnly, kEmbeddingsOnly, kNeither };

std::string mode_name(ConditioningMode mode);
ConditioningMode mode_from_name(const std::string& name);

// Where phi(u) comes from: the instruction embedding attached to the machine,
// or a one-hot of the raw state id (the no-language control).
enum class EmbeddingSource { kInstruction, kOneHot };

struct TrainConfig {
  long total_steps = 50000;
  double alpha = 0.1;  // linear backend wants ~1e-3
  double gamma = 0.99;
  double eps_start = 1.0;
  double eps_end = 0.01;
  double exploration_fraction = 0.35;
  int replay_capacity = 50000;
  int batch_size = 32;
  int learning_starts = 1000;
  int target_update_period = 1000;  // linear backend only
  std::uint64_t seed = 0;

  void validate() const;  // BadArg on any violated bound
};

// One environment task plus the machine and labeling that drive it.
struct TaskBundle {
  TaskConfig task;
  Larm machine;
  LabelingMap labeling;
};

struct AugmentedTransition {
  SparseFeatures s;  // linear backend only
  std::uint64_t s_hash;
  int task = 0;
  int u = 0;
  int a = 0;
  double r_total = 0.0;
  SparseFeatures s_next;
  std::uint64_t s_next_hash;
  int u_next = 0;
  bool done = false;
};

struct EpisodeStats {
  int episode;
  double env_return;
  double rm_return;
  bool success;
  int steps;
};

struct TrainReport {
  std::vector<EpisodeStats> episodes;

  std::string to_csv() const;  // episode,env_return,rm_return,success,steps
  double final_window_success(int window) const;
  // First episode index (0-based) whose trailing `window`-episode mean RM
  // return is at least `threshold`, or -1.
  int first_rm_return_crossing(int window, double threshold) const;
  // First episode index completing `streak` successes in a row, or -1.
  int first_success_streak(int streak) const;
};

// Appendix-style augmented-MDP loop: eps-greedy over Q(s, phi(u), a) with
// linear eps decay over exploration_fraction * total_steps, env and machine
// stepped together, r_total = env + RM reward (mode-adjusted). Episodes
// round-robin over the bundles; every reset returns the machine to its
// initial state. Tabular backend updates one-step on each fresh transition;
// linear samples minibatches from the replay buffer and refreshes its target
// weights every target_update_period steps. Episodes cut short by the step
// budget are not reported.
TrainReport train(const std::vector<TaskBundle>& tasks, QFunction& qfn, const TrainConfig& cfg,
                  ConditioningMode mode, EmbeddingSource source = EmbeddingSource::kInstruction);

// Greedy rollouts (ties to the lowest action id), no updates. Success is the
// env goal, not the machine's final state; the machine is stepped only to
// condition the policy.
double evaluate(const TaskBundle& task, const QFunction& qfn, int episodes, std::uint64_t seed,
                ConditioningMode mode = ConditioningMode::kBoth,
                EmbeddingSource source = EmbeddingSource::kInstruction);

// Same rollout harness with an injected policy instead of a q-function.
using Policy = std::function<int(const ObservationRecord&, int)>;
double evaluate_policy(const TaskBundle& task, const Policy& policy, int episodes,
                       std::uint64_t seed);

// Zero-shot: run the trained linear q-function on an unseen task, conditioning
// on the new machine's embeddings. Rejects tabular backends - without
// embeddings there is nothing to generalize over.
double zero_shot_eval(const QFunction& qfn, const TaskBundle& task, int episodes,
                      std::uint64_t seed,
                      EmbeddingSource source = EmbeddingSource::kInstruction);

enum class Backend { kTabular, kLinear };

// Feature space sized for every task in the suite: max grid dimensions and
// door count over the tasks' seed-0 layouts.
FeatureExtractor suite_features(const std::vector<TaskBundle>& suite);

struct AblationRow {
  std::string mode;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_seed;
};

// Trains one shared q-function per (mode, seed) across the whole suite, then
// reports the mean success over the suite's tasks. Rows come back in the
// fixed order both, rewards_only, embeddings_only, neither.
std::vector<AblationRow> run_ablation(const std::vector<TaskBundle>& suite,
                                      const TrainConfig& cfg,
                                      const std::vector<std::uint64_t>& seeds, Backend backend,
                                      int eval_episodes);

}  // namespace larm
