#include "larm/observation.hpp"

namespace larm {

namespace {

constexpr const char* kTypeNames[] = {"empty", "wall",  "door",    "key",    "ball",
                                      "box",   "goal",  "pyramid", "square", "circle"};
constexpr const char* kColorNames[] = {"none", "red", "green", "blue", "purple", "yellow", "grey"};

}  // namespace

std::string to_string(ObjectType t) { return kTypeNames[static_cast<int>(t)]; }

std::string to_string(ObjColor c) { return kColorNames[static_cast<int>(c)]; }

ObjectType object_type_from(const std::string& name) {
  for (int i = 0; i < static_cast<int>(std::size(kTypeNames)); ++i) {
    if (name == kTypeNames[i]) return static_cast<ObjectType>(i);
  }
  throw BadArg(0, "unknown object type: " + name);
}

ObjColor color_from(const std::string& name) {
  for (int i = 0; i < static_cast<int>(std::size(kColorNames)); ++i) {
    if (name == kColorNames[i]) return static_cast<ObjColor>(i);
  }
  throw BadArg(0, "unknown color: " + name);
}

std::uint64_t obs_hash(const ObservationRecord& obs) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(obs.width));
  mix(static_cast<std::uint64_t>(obs.height));
  mix(static_cast<std::uint64_t>(obs.agent_x));
  mix(static_cast<std::uint64_t>(obs.agent_y));
  mix(static_cast<std::uint64_t>(obs.agent_dir));
  mix(obs.carrying.has ? 1 : 0);
  mix(static_cast<std::uint64_t>(obs.carrying.type));
  mix(static_cast<std::uint64_t>(obs.carrying.color));
  for (const Cell& c : obs.cells) {
    std::uint64_t packed = static_cast<std::uint64_t>(c.type) |
                           (static_cast<std::uint64_t>(c.color) << 8) |
                           (static_cast<std::uint64_t>(c.is_open) << 16) |
                           (static_cast<std::uint64_t>(c.is_locked) << 17);
    mix(packed);
  }
  return h;
}

}  // namespace larm
