#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "larm/embedding.hpp"
#include "larm/rm_spec.hpp"

namespace larm {

// Marker for "no event fired" (input) and "the ELSE transition was taken"
// (output). Real event ids are dense and start at 0.
inline constexpr int kNoEvent = -1;

struct ExplicitEdge {
  int event;      // declared event id
  int to;         // destination state id
  double reward;  // 0.0 unless a REWARD_FUNCTION entry matches; last one wins
};

struct StepOutcome {
  int next_state;
  double reward;
  int fired_event;  // event id, or kNoEvent when the ELSE self-loop fired
};

using Embedder = std::function<EmbeddingVector(const std::string&)>;

// Compiled machine: indexed states/events, per-state explicit transition
// lists in declaration order, per-state instruction text and its embedding.
// Immutable after compile; safe to share across threads.
class Larm {
 public:
  const RewardMachineSpec& spec() const { return spec_; }
  int num_states() const { return static_cast<int>(state_names_.size()); }
  int num_events() const { return static_cast<int>(event_names_.size()); }
  int initial_state() const { return initial_; }
  bool is_final(int u) const { return final_[check_state(u)]; }

  const std::string& state_name(int u) const { return state_names_[check_state(u)]; }
  const std::string& event_name(int e) const;
  // Throws UnknownState; events instead map unknown names to kNoEvent.
  int state_id(const std::string& name) const;
  int event_id(const std::string& name) const;

  const std::string& instruction(int u) const { return instructions_[check_state(u)]; }
  const EmbeddingVector& embedding(int u) const { return embeddings_[check_state(u)]; }
  int embedding_dim() const { return embedding_dim_; }

  // Explicit (non-ELSE) transitions out of u, declaration order.
  const std::vector<ExplicitEdge>& edges_from(int u) const { return edges_[check_state(u)]; }

 private:
  friend Larm compile(const RewardMachineSpec&, const std::map<std::string, std::string>&,
                      const Embedder&, int);
  int check_state(int u) const;

  RewardMachineSpec spec_;
  std::vector<std::string> state_names_;
  std::map<std::string, int> state_index_;
  std::vector<std::string> event_names_;
  std::map<std::string, int> event_index_;
  std::vector<std::vector<ExplicitEdge>> edges_;
  std::vector<bool> final_;
  std::vector<std::string> instructions_;
  std::vector<EmbeddingVector> embeddings_;
  int initial_ = 0;
  int embedding_dim_ = kEmbeddingDim;
};

// Compiles a validated spec. instructions must provide text for every state
// (MissingInstruction otherwise); embeddings come from embedder (defaults to
// embed_instruction at dimension d) and are re-normalized to unit length.
// Throws ValidationFailed when validate_rm reports errors.
Larm compile(const RewardMachineSpec& spec, const std::map<std::string, std::string>& instructions,
             const Embedder& embedder = nullptr, int d = kEmbeddingDim);

// Total transition function: the explicit edge for (u, event) when one
// exists, the ELSE self-loop (reward 0, fired_event kNoEvent) otherwise.
// event kNoEvent always takes the ELSE path.
StepOutcome rm_step(const Larm& m, int u, int event);
// Same, by event name; names that are not declared events take ELSE.
StepOutcome rm_step(const Larm& m, int u, const std::string& event);

// Every elementary cycle over explicit transitions whose reward sum exceeds
// +1e-9 (parallel edges contribute their maximum reward). Cycles are state id
// sequences, reported once, rotated so the smallest id leads. An empty result
// certifies no positive-reward cycle. Machines beyond ~50 states fall back to
// a Bellman-style check that reports one witness cycle instead of all.
std::vector<std::vector<int>> detect_positive_cycles(const Larm& m);

// Maximum cumulative reward over walks from the initial state to any final
// state. Throws PositiveCycle when detect_positive_cycles is non-empty and
// NoFinalReachable when no final state can be reached.
double max_path_reward(const Larm& m);

// State ids reachable from the initial state via explicit transitions,
// ascending.
std::vector<int> reachable_states(const Larm& m);

// Graphviz rendering: final states double-circled, negative-reward edges in
// red, ELSE self-loops included only when include_else is set. Deterministic
// output for fixed input.
std::string to_dot(const Larm& m, bool include_else = false);

}  // namespace larm
