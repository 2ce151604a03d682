#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "larm/errors.hpp"

namespace larm {

enum class ObjectType : std::uint8_t {
  kEmpty = 0,
  kWall,
  kDoor,
  kKey,
  kBall,
  kBox,
  kGoal,
  kPyramid,
  kSquare,
  kCircle,
};

enum class ObjColor : std::uint8_t {
  kNone = 0,
  kRed,
  kGreen,
  kBlue,
  kPurple,
  kYellow,
  kGrey,
};

std::string to_string(ObjectType t);
std::string to_string(ObjColor c);
// Throw BadArg on unrecognized names.
ObjectType object_type_from(const std::string& name);
ObjColor color_from(const std::string& name);

// One grid cell. Door flags are meaningful only when type == kDoor.
struct Cell {
  ObjectType type = ObjectType::kEmpty;
  ObjColor color = ObjColor::kNone;
  bool is_open = false;
  bool is_locked = false;

  bool operator==(const Cell&) const = default;
};

struct Carried {
  bool has = false;
  ObjectType type = ObjectType::kEmpty;
  ObjColor color = ObjColor::kNone;

  bool operator==(const Carried&) const = default;
};

// Frozen symbolic snapshot of the environment after a step. Predicates see
// exactly this record, never the live environment.
struct ObservationRecord {
  int width = 0;
  int height = 0;
  int agent_x = 0;
  int agent_y = 0;
  int agent_dir = 0;  // 0 east, 1 south, 2 west, 3 north
  Carried carrying;
  std::vector<Cell> cells;  // row-major, cells[y * width + x]
  int last_action = -1;     // -1 before the first step
  int step_count = 0;

  const Cell& at(int x, int y) const { return cells[static_cast<size_t>(y) * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

// Hash of the task-relevant state: everything except step_count and
// last_action, so time-shifted visits to the same configuration share a
// tabular entry.
std::uint64_t obs_hash(const ObservationRecord& obs);

}  // namespace larm
