#include <json.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "larm/errors.hpp"
#include "larm/gridworld.hpp"

namespace larm {

namespace {

using nlohmann::json;

bool is_holdable_tile(ObjectType t) {
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

TileRef tile_from(const json& j, const char* type_key, const char* color_key) {
  TileRef t;
  t.type = object_type_from(j.at(type_key).get<std::string>());
  if (j.contains(color_key)) t.color = color_from(j.at(color_key).get<std::string>());
  return t;
}

ComposeGoal goal_from(const json& j) {
  ComposeGoal g;
  g.kind = j.at("kind").get<std::string>();
  if (g.kind != "agent_hold" && g.kind != "agent_near" && g.kind != "tile_near") {
    throw BadArg(0, "unknown goal kind: " + g.kind);
  }
  g.a = tile_from(j, "a_type", "a_color");
  if (g.kind == "tile_near") g.b = tile_from(j, "b_type", "b_color");
  return g;
}

ComposeRule rule_from(const json& j) {
  ComposeRule r;
  r.kind = j.at("kind").get<std::string>();
  if (r.kind != "agent_hold" && r.kind != "tile_near") {
    throw BadArg(0, "unknown rule kind: " + r.kind);
  }
  r.a = tile_from(j, "a_type", "a_color");
  if (r.kind == "tile_near") r.b = tile_from(j, "b_type", "b_color");
  r.c = tile_from(j, "c_type", "c_color");
  return r;
}

std::pair<int, int> tile_key(const TileRef& t) {
  return {static_cast<int>(t.type), static_cast<int>(t.color)};
}

}  // namespace

TaskConfig load_task_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(0, std::string("bad task config JSON: ") + e.what());
  }
  try {
    TaskConfig config;
    config.task = j.at("task").get<std::string>();
    config.size = j.value("size", 5);
    config.procedural = j.value("procedural", false);
    config.max_steps = j.value("max_steps", 0);
    for (const json& o : j.value("objects", json::array())) {
      ObjectSpawn spawn;
      spawn.type = object_type_from(o.at("type").get<std::string>());
      if (o.contains("color")) spawn.color = color_from(o.at("color").get<std::string>());
      spawn.x = o.at("x").get<int>();
      spawn.y = o.at("y").get<int>();
      config.objects.push_back(spawn);
    }
    for (const json& g : j.value("goals", json::array())) config.goals.push_back(goal_from(g));
    for (const json& r : j.value("rules", json::array())) config.rules.push_back(rule_from(r));

    static const std::set<std::string> kTasks = {"doorkey", "blocked_unlock_pickup",
                                                 "unlock_to_unlock", "key_corridor", "xcompose"};
    if (!kTasks.count(config.task)) throw BadArg(0, "unknown task: " + config.task);
    if (config.size < 5) throw BadArg(0, "task size must be at least 5");
    if (config.max_steps < 0) throw BadArg(0, "max_steps must be nonnegative");
    return config;
  } catch (const json::exception& e) {
    throw BadArg(0, std::string("bad task config field: ") + e.what());
  }
}

TaskConfig make_compose_task(const std::vector<ComposeGoal>& goals,
                             const std::vector<ComposeRule>& rules, std::uint64_t seed) {
  if (goals.empty()) throw BadArg(0, "a compose task needs at least one goal");
  if (rules.size() > 3) throw BadArg(0, "at most 3 chained rules are supported");

  // Tiles produced by some rule materialize during play and are not placed.
  std::set<std::pair<int, int>> produced;
  for (const ComposeRule& r : rules) produced.insert(tile_key(r.c));

  // Everything the goals and rules consume must exist up front unless a rule
  // produces it.
  std::set<std::pair<int, int>> needed;
  std::vector<TileRef> needed_tiles;
  auto require = [&](const TileRef& t) {
    if (produced.count(tile_key(t))) return;
    if (needed.insert(tile_key(t)).second) needed_tiles.push_back(t);
  };
  for (const ComposeGoal& g : goals) {
    require(g.a);
    if (g.kind == "tile_near") require(g.b);
    if ((g.kind == "agent_hold" || g.kind == "tile_near") && !is_holdable_tile(g.a.type)) {
      throw UnsatisfiableLayout("goal tile cannot be picked up: " + to_string(g.a.type));
    }
  }
  for (const ComposeRule& r : rules) {
    require(r.a);
    if (r.kind == "tile_near") require(r.b);
    if (!is_holdable_tile(r.a.type)) {
      throw UnsatisfiableLayout("rule tile cannot be picked up: " + to_string(r.a.type));
    }
  }

  // Availability closure over the rules: starting from the placed tiles,
  // every rule whose inputs are available makes its output available.
  std::set<std::pair<int, int>> available = needed;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const ComposeRule& r : rules) {
      if (!available.count(tile_key(r.a))) continue;
      if (r.kind == "tile_near" && !available.count(tile_key(r.b))) continue;
      if (available.insert(tile_key(r.c)).second) grew = true;
    }
  }
  const ComposeGoal& final_goal = goals.back();
  if (!available.count(tile_key(final_goal.a)) ||
      (final_goal.kind == "tile_near" && !available.count(tile_key(final_goal.b)))) {
    throw UnsatisfiableLayout("final goal tile is neither placed nor produced by any rule");
  }

  TaskConfig config;
  config.task = "xcompose";
  config.size = 8;
  config.goals = goals;
  config.rules = rules;

  // Seed-drawn distinct cells; (1, 1) stays free for the agent start.
  std::vector<std::pair<int, int>> cells;
  for (int y = 1; y < config.size - 1; ++y) {
    for (int x = 1; x < config.size - 1; ++x) {
      if (!(x == 1 && y == 1)) cells.push_back({x, y});
    }
  }
  if (needed_tiles.size() > cells.size()) {
    throw UnsatisfiableLayout("too many tiles for the arena");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(cells.begin(), cells.end(), rng);
  for (size_t i = 0; i < needed_tiles.size(); ++i) {
    config.objects.push_back({needed_tiles[i].type, needed_tiles[i].color, cells[i].first,
                              cells[i].second});
  }
  return config;
}

}  // namespace larm
