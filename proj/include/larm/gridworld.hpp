#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "larm/observation.hpp"

namespace larm {

// Action ids are part of the on-disk contract (replay transcripts, run
// manifests); do not reorder.
enum class Action : int {
  kTurnLeft = 0,
  kTurnRight = 1,
  kMoveForward = 2,
  kPickup = 3,
  kDrop = 4,
  kToggle = 5,
};

inline constexpr int kNumActions = 6;

std::string action_name(int action);          // BadArg out of range
int action_from_name(const std::string& name);  // BadArg on unknown name

// One tile reference used by compositional goals and rules.
struct TileRef {
  ObjectType type = ObjectType::kEmpty;
  ObjColor color = ObjColor::kNone;

  bool operator==(const TileRef&) const = default;
};

// Goals: agent_hold(a), agent_near(a), tile_near(a, b).
struct ComposeGoal {
  std::string kind;
  TileRef a;
  TileRef b;  // tile_near only
};

// Rules: agent_hold(a) -> c, tile_near(a, b) -> c.
struct ComposeRule {
  std::string kind;
  TileRef a;
  TileRef b;  // tile_near only
  TileRef c;
};

struct ObjectSpawn {
  ObjectType type = ObjectType::kEmpty;
  ObjColor color = ObjColor::kNone;
  int x = 0;
  int y = 0;
};

struct TaskConfig {
  std::string task;  // doorkey | blocked_unlock_pickup | unlock_to_unlock |
                     // key_corridor | xcompose
  int size = 5;
  bool procedural = false;
  int max_steps = 0;  // 0 = default 4 * width * height
  // xcompose only:
  std::vector<ObjectSpawn> objects;
  std::vector<ComposeGoal> goals;  // the last entry is the success predicate
  std::vector<ComposeRule> rules;
};

// JSON object with keys task, size, procedural, max_steps, objects, goals,
// rules (see fixtures/compose/*.json). SyntaxError on malformed JSON, BadArg
// on invalid field values.
TaskConfig load_task_config(const std::string& json_text);

struct GridEnv {
  TaskConfig config;
  int width = 0;
  int height = 0;
  std::vector<Cell> cells;
  int agent_x = 0;
  int agent_y = 0;
  int agent_dir = 0;  // 0 east, 1 south, 2 west, 3 north
  Carried carrying;
  int step_count = 0;
  int max_steps = 0;
  std::uint64_t seed = 0;
  bool done = false;
  int last_action = -1;

  Cell& at(int x, int y) { return cells[static_cast<size_t>(y) * width + x]; }
  const Cell& at(int x, int y) const { return cells[static_cast<size_t>(y) * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

struct StepResult {
  ObservationRecord obs;
  double reward = 0.0;
  bool done = false;
};

// Deterministic layout construction. Fixed mode ignores the seed for
// geometry; procedural mode derives placements from it. Identical
// (config, seed) yields identical environments. UnsatisfiableLayout when a
// procedural draw cannot place every object.
std::pair<GridEnv, ObservationRecord> env_reset(const TaskConfig& config, std::uint64_t seed);

// MiniGrid-style step. Throws EpisodeFinished once done. Success gives
// env reward +1 and ends the episode; hitting max_steps ends it with 0.
StepResult env_step(GridEnv& env, int action);

// Symbolic snapshot of the current state.
ObservationRecord observe(const GridEnv& env);

// Debug renderer, one text row per grid row.
std::string render_ascii(const GridEnv& env);

// True when goal holds in the current state (agent_hold checks the hand,
// agent_near 4-adjacency to the agent, tile_near 4-adjacency on the grid).
bool goal_holds(const GridEnv& env, const ComposeGoal& goal);

// Compositional task generator: places every tile the goals and rules
// require (rule outputs are produced later by the rules themselves) at
// seed-drawn distinct cells of an 8x8 arena. UnsatisfiableLayout when the
// final goal cannot be made reachable through the declared rules.
TaskConfig make_compose_task(const std::vector<ComposeGoal>& goals,
                             const std::vector<ComposeRule>& rules, std::uint64_t seed);

}  // namespace larm
