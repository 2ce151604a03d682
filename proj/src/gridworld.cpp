#include "larm/gridworld.hpp"

#include <algorithm>
#include <random>

#include "larm/errors.hpp"

namespace larm {

namespace {

constexpr const char* kActionNames[] = {"turn_left", "turn_right", "move_forward",
                                        "pickup",    "drop",       "toggle"};

constexpr int kDx[] = {1, 0, -1, 0};
constexpr int kDy[] = {0, 1, 0, -1};

bool is_holdable(ObjectType t) {
  switch (t) {
    case ObjectType::kKey:
    case ObjectType::kBall:
    case ObjectType::kBox:
    case ObjectType::kPyramid:
    case ObjectType::kSquare:
    case ObjectType::kCircle:
      return true;
    default:
      return false;
  }
}

bool is_passable(const Cell& c) {
  if (c.type == ObjectType::kEmpty || c.type == ObjectType::kGoal) return true;
  return c.type == ObjectType::kDoor && c.is_open;
}

void fill_border(GridEnv& env) {
  for (int x = 0; x < env.width; ++x) {
    env.at(x, 0) = {ObjectType::kWall, ObjColor::kNone, false, false};
    env.at(x, env.height - 1) = {ObjectType::kWall, ObjColor::kNone, false, false};
  }
  for (int y = 0; y < env.height; ++y) {
    env.at(0, y) = {ObjectType::kWall, ObjColor::kNone, false, false};
    env.at(env.width - 1, y) = {ObjectType::kWall, ObjColor::kNone, false, false};
  }
}

GridEnv blank_env(const TaskConfig& config, int w, int h, std::uint64_t seed) {
  GridEnv env;
  env.config = config;
  env.width = w;
  env.height = h;
  env.cells.assign(static_cast<size_t>(w) * h, Cell{});
  env.seed = seed;
  env.max_steps = config.max_steps > 0 ? config.max_steps : 4 * w * h;
  fill_border(env);
  return env;
}

void put(GridEnv& env, int x, int y, ObjectType t, ObjColor c = ObjColor::kNone,
         bool open = false, bool locked = false) {
  env.at(x, y) = {t, c, open, locked};
}

// Fixed DoorKey: one vertical wall with a locked yellow door, key on the
// agent's side, goal in the far corner. Procedural mode redraws the wall
// column, door row, key cell, and agent pose from the seed.
void build_doorkey(GridEnv& env, std::uint64_t seed) {
  int n = env.width;
  std::mt19937_64 rng(seed);
  int wall_x = n / 2;
  int door_y = n / 2;
  if (env.config.procedural) {
    wall_x = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(n - 4));
    door_y = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n - 2));
  }
  for (int y = 1; y < n - 1; ++y) put(env, wall_x, y, ObjectType::kWall);
  put(env, wall_x, door_y, ObjectType::kDoor, ObjColor::kYellow, false, true);
  put(env, n - 2, n - 2, ObjectType::kGoal);

  if (env.config.procedural) {
    std::vector<std::pair<int, int>> open_cells;
    for (int y = 1; y < n - 1; ++y) {
      for (int x = 1; x < wall_x; ++x) open_cells.push_back({x, y});
    }
    if (open_cells.size() < 2) throw UnsatisfiableLayout("doorkey: no room left of the wall");
    size_t key_i = rng() % open_cells.size();
    size_t agent_i = rng() % (open_cells.size() - 1);
    if (agent_i >= key_i) ++agent_i;
    put(env, open_cells[key_i].first, open_cells[key_i].second, ObjectType::kKey,
        ObjColor::kYellow);
    env.agent_x = open_cells[agent_i].first;
    env.agent_y = open_cells[agent_i].second;
    env.agent_dir = static_cast<int>(rng() % 4);
  } else {
    put(env, 1, n - 2, ObjectType::kKey, ObjColor::kYellow);
    env.agent_x = 1;
    env.agent_y = 1;
    env.agent_dir = 1;  // south, toward the key
  }
}

// Canonical 7x7 BlockedUnlockPickup: a grey ball sits directly in front of
// the locked door; key in the start room, box and goal behind the door.
void build_blocked_unlock_pickup(GridEnv& env, std::uint64_t seed) {
  for (int y = 1; y <= 5; ++y) put(env, 3, y, ObjectType::kWall);
  put(env, 3, 3, ObjectType::kDoor, ObjColor::kYellow, false, true);
  put(env, 2, 3, ObjectType::kBall, ObjColor::kGrey);
  put(env, 1, 1, ObjectType::kKey, ObjColor::kYellow);
  put(env, 5, 3, ObjectType::kBox, ObjColor::kRed);
  put(env, 5, 5, ObjectType::kGoal);
  env.agent_x = 1;
  env.agent_y = 3;
  env.agent_dir = 0;
  if (env.config.procedural) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<int, int>> starts;
    for (int y = 1; y <= 5; ++y) {
      for (int x = 1; x <= 2; ++x) {
        if (env.at(x, y).type == ObjectType::kEmpty) starts.push_back({x, y});
      }
    }
    auto [x, y] = starts[rng() % starts.size()];
    env.agent_x = x;
    env.agent_y = y;
    env.agent_dir = static_cast<int>(rng() % 4);
  }
}

// Canonical 10x5 UnlockToUnlock: yellow key and door, then red key and door,
// then the goal room holding the ball.
void build_unlock_to_unlock(GridEnv& env, std::uint64_t seed) {
  for (int y = 1; y <= 3; ++y) {
    put(env, 3, y, ObjectType::kWall);
    put(env, 6, y, ObjectType::kWall);
  }
  put(env, 3, 2, ObjectType::kDoor, ObjColor::kYellow, false, true);
  put(env, 6, 2, ObjectType::kDoor, ObjColor::kRed, false, true);
  put(env, 2, 1, ObjectType::kKey, ObjColor::kYellow);
  put(env, 5, 1, ObjectType::kKey, ObjColor::kRed);
  put(env, 8, 1, ObjectType::kBall, ObjColor::kGrey);
  put(env, 8, 2, ObjectType::kGoal);
  env.agent_x = 1;
  env.agent_y = 2;
  env.agent_dir = 0;
  if (env.config.procedural) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<int, int>> starts = {{1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}};
    auto [x, y] = starts[rng() % starts.size()];
    env.agent_x = x;
    env.agent_y = y;
    env.agent_dir = static_cast<int>(rng() % 4);
  }
}

// Canonical 8x7 KeyCorridor: corridor row between a key room behind an
// unlocked purple door and a goal room behind a locked red door.
void build_key_corridor(GridEnv& env, std::uint64_t seed) {
  for (int x = 1; x <= 6; ++x) {
    put(env, x, 2, ObjectType::kWall);
    put(env, x, 4, ObjectType::kWall);
  }
  put(env, 2, 2, ObjectType::kDoor, ObjColor::kPurple, false, false);
  put(env, 4, 4, ObjectType::kDoor, ObjColor::kRed, false, true);
  put(env, 5, 1, ObjectType::kKey, ObjColor::kRed);
  put(env, 5, 5, ObjectType::kGoal);
  env.agent_x = 1;
  env.agent_y = 3;
  env.agent_dir = 0;
  if (env.config.procedural) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<int, int>> starts;
    for (int x = 1; x <= 6; ++x) starts.push_back({x, 3});
    auto [x, y] = starts[rng() % starts.size()];
    env.agent_x = x;
    env.agent_y = y;
    env.agent_dir = static_cast<int>(rng() % 4);
  }
}

// Open arena with the configured objects. Fixed mode puts the agent at
// (1, 1) facing east; procedural mode draws the start pose from the seed
// while the listed objects keep their configured cells.
void build_xcompose(GridEnv& env, std::uint64_t seed) {
  for (const ObjectSpawn& o : env.config.objects) {
    if (!env.in_bounds(o.x, o.y) || env.at(o.x, o.y).type != ObjectType::kEmpty) {
      throw UnsatisfiableLayout("xcompose: object placement collides at (" +
                                std::to_string(o.x) + ", " + std::to_string(o.y) + ")");
    }
    put(env, o.x, o.y, o.type, o.color);
  }
  env.agent_x = 1;
  env.agent_y = 1;
  env.agent_dir = 0;
  if (env.config.procedural) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<int, int>> open_cells;
    for (int y = 1; y < env.height - 1; ++y) {
      for (int x = 1; x < env.width - 1; ++x) {
        if (env.at(x, y).type == ObjectType::kEmpty) open_cells.push_back({x, y});
      }
    }
    if (open_cells.empty()) throw UnsatisfiableLayout("xcompose: no free cell for the agent");
    auto [x, y] = open_cells[rng() % open_cells.size()];
    env.agent_x = x;
    env.agent_y = y;
    env.agent_dir = static_cast<int>(rng() % 4);
  }
  if (env.at(env.agent_x, env.agent_y).type != ObjectType::kEmpty) {
    throw UnsatisfiableLayout("xcompose: agent start cell occupied");
  }
}

bool tile_matches(const Cell& c, const TileRef& t) { return c.type == t.type && c.color == t.color; }

// Rules run once per step after the action, in declaration order; each rule
// applies at most once, to the first match in row-major order.
void apply_rules(GridEnv& env) {
  for (const ComposeRule& rule : env.config.rules) {
    if (rule.kind == "agent_hold") {
      if (env.carrying.has && env.carrying.type == rule.a.type &&
          env.carrying.color == rule.a.color) {
        env.carrying.type = rule.c.type;
        env.carrying.color = rule.c.color;
      }
      continue;
    }
    // tile_near(a, b) -> c: a becomes c in place, b is removed.
    bool applied = false;
    for (int y = 0; y < env.height && !applied; ++y) {
      for (int x = 0; x < env.width && !applied; ++x) {
        if (!tile_matches(env.at(x, y), rule.a)) continue;
        for (int d = 0; d < 4; ++d) {
          int nx = x + kDx[d], ny = y + kDy[d];
          if (!env.in_bounds(nx, ny) || !tile_matches(env.at(nx, ny), rule.b)) continue;
          env.at(x, y) = {rule.c.type, rule.c.color, false, false};
          env.at(nx, ny) = Cell{};
          applied = true;
          break;
        }
      }
    }
  }
}

bool success_reached(const GridEnv& env) {
  if (env.config.task == "xcompose") {
    if (env.config.goals.empty()) return false;
    return goal_holds(env, env.config.goals.back());
  }
  return env.at(env.agent_x, env.agent_y).type == ObjectType::kGoal;
}

}  // namespace

std::string action_name(int action) {
  if (action < 0 || action >= kNumActions) {
    throw BadArg(0, "action id out of range: " + std::to_string(action));
  }
  return kActionNames[action];
}

int action_from_name(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (name == kActionNames[i]) return i;
  }
  throw BadArg(0, "unknown action: " + name);
}

bool goal_holds(const GridEnv& env, const ComposeGoal& goal) {
  if (goal.kind == "agent_hold") {
    return env.carrying.has && env.carrying.type == goal.a.type &&
           env.carrying.color == goal.a.color;
  }
  if (goal.kind == "agent_near") {
    for (int d = 0; d < 4; ++d) {
      int nx = env.agent_x + kDx[d], ny = env.agent_y + kDy[d];
      if (env.in_bounds(nx, ny) && tile_matches(env.at(nx, ny), goal.a)) return true;
    }
    return false;
  }
  // tile_near
  for (int y = 0; y < env.height; ++y) {
    for (int x = 0; x < env.width; ++x) {
      if (!tile_matches(env.at(x, y), goal.a)) continue;
      for (int d = 0; d < 4; ++d) {
        int nx = x + kDx[d], ny = y + kDy[d];
        if (env.in_bounds(nx, ny) && tile_matches(env.at(nx, ny), goal.b)) return true;
      }
    }
  }
  return false;
}

std::pair<GridEnv, ObservationRecord> env_reset(const TaskConfig& config, std::uint64_t seed) {
  if (config.size < 5) throw BadArg(0, "task size must be at least 5");
  GridEnv env;
  if (config.task == "doorkey") {
    env = blank_env(config, config.size, config.size, seed);
    build_doorkey(env, seed);
  } else if (config.task == "blocked_unlock_pickup") {
    env = blank_env(config, 7, 7, seed);
    build_blocked_unlock_pickup(env, seed);
  } else if (config.task == "unlock_to_unlock") {
    env = blank_env(config, 10, 5, seed);
    build_unlock_to_unlock(env, seed);
  } else if (config.task == "key_corridor") {
    env = blank_env(config, 8, 7, seed);
    build_key_corridor(env, seed);
  } else if (config.task == "xcompose") {
    env = blank_env(config, config.size, config.size, seed);
    build_xcompose(env, seed);
  } else {
    throw BadArg(0, "unknown task: " + config.task);
  }
  return {env, observe(env)};
}

StepResult env_step(GridEnv& env, int action) {
  if (env.done) throw EpisodeFinished("env_step called on a finished episode");
  if (action < 0 || action >= kNumActions) {
    throw BadArg(0, "action id out of range: " + std::to_string(action));
  }
  ++env.step_count;
  env.last_action = action;

  int fx = env.agent_x + kDx[env.agent_dir];
  int fy = env.agent_y + kDy[env.agent_dir];
  bool front_ok = env.in_bounds(fx, fy);

  switch (static_cast<Action>(action)) {
    case Action::kTurnLeft:
      env.agent_dir = (env.agent_dir + 3) % 4;
      break;
    case Action::kTurnRight:
      env.agent_dir = (env.agent_dir + 1) % 4;
      break;
    case Action::kMoveForward:
      if (front_ok && is_passable(env.at(fx, fy))) {
        env.agent_x = fx;
        env.agent_y = fy;
      }
      break;
    case Action::kPickup:
      if (front_ok && !env.carrying.has && is_holdable(env.at(fx, fy).type)) {
        env.carrying = {true, env.at(fx, fy).type, env.at(fx, fy).color};
        env.at(fx, fy) = Cell{};
      }
      break;
    case Action::kDrop:
      if (front_ok && env.carrying.has && env.at(fx, fy).type == ObjectType::kEmpty) {
        env.at(fx, fy) = {env.carrying.type, env.carrying.color, false, false};
        env.carrying = Carried{};
      }
      break;
    case Action::kToggle:
      if (front_ok && env.at(fx, fy).type == ObjectType::kDoor) {
        Cell& door = env.at(fx, fy);
        if (door.is_locked) {
          if (env.carrying.has && env.carrying.type == ObjectType::kKey &&
              env.carrying.color == door.color) {
            door.is_locked = false;
            door.is_open = true;
          }
        } else if (!door.is_open) {
          door.is_open = true;
        }
        // toggling an open door is a no-op
      }
      break;
  }

  apply_rules(env);

  StepResult result;
  if (success_reached(env)) {
    result.reward = 1.0;
    env.done = true;
  } else if (env.step_count >= env.max_steps) {
    env.done = true;
  }
  result.done = env.done;
  result.obs = observe(env);
  return result;
}

ObservationRecord observe(const GridEnv& env) {
  ObservationRecord obs;
  obs.width = env.width;
  obs.height = env.height;
  obs.agent_x = env.agent_x;
  obs.agent_y = env.agent_y;
  obs.agent_dir = env.agent_dir;
  obs.carrying = env.carrying;
  obs.cells = env.cells;
  obs.last_action = env.last_action;
  obs.step_count = env.step_count;
  return obs;
}

std::string render_ascii(const GridEnv& env) {
  std::string out;
  for (int y = 0; y < env.height; ++y) {
    for (int x = 0; x < env.width; ++x) {
      char ch = '.';
      const Cell& c = env.at(x, y);
      switch (c.type) {
        case ObjectType::kEmpty:
          ch = '.';
          break;
        case ObjectType::kWall:
          ch = '#';
          break;
        case ObjectType::kDoor:
          ch = c.is_open ? '/' : (c.is_locked ? 'D' : '+');
          break;
        case ObjectType::kKey:
          ch = 'k';
          break;
        case ObjectType::kBall:
          ch = 'o';
          break;
        case ObjectType::kBox:
          ch = 'b';
          break;
        case ObjectType::kGoal:
          ch = 'G';
          break;
        case ObjectType::kPyramid:
          ch = 'p';
          break;
        case ObjectType::kSquare:
          ch = 's';
          break;
        case ObjectType::kCircle:
          ch = 'c';
          break;
      }
      if (x == env.agent_x && y == env.agent_y) {
        constexpr char kAgentChars[] = {'>', 'v', '<', '^'};
        ch = kAgentChars[env.agent_dir];
      }
      out += ch;
    }
    out += '\n';
  }
  return out;
}

}  // namespace larm
