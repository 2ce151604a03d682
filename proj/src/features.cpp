#include "larm/features.hpp"

#include <cstdlib>

#include "larm/errors.hpp"

namespace larm {

namespace {

constexpr int kNumTypes = 10;   // ObjectType entries
constexpr int kNumColors = 7;   // ObjColor entries
constexpr int kComboTypes = 8;  // everything except empty and wall
constexpr int kBitsPerCombo = 9;

constexpr int kDx[] = {1, 0, -1, 0};
constexpr int kDy[] = {0, 1, 0, -1};

// Combo index for a cell, or -1 when the cell holds no trackable object.
int combo_of(const Cell& c) {
  int t = static_cast<int>(c.type) - 2;  // skip empty, wall
  if (t < 0) return -1;
  return t * kNumColors + static_cast<int>(c.color);
}

bool front_passable(const Cell& c) {
  if (c.type == ObjectType::kEmpty || c.type == ObjectType::kGoal) return true;
  return c.type == ObjectType::kDoor && c.is_open;
}

}  // namespace

FeatureExtractor::FeatureExtractor(int width, int height, int door_slots)
    : width_(width), height_(height), door_slots_(door_slots) {
  if (width < 1 || height < 1 || door_slots < 0) {
    throw BadArg(0, "feature extractor needs positive grid bounds");
  }
  dim_ = width_ + height_ + 4 + (1 + kNumTypes + kNumColors) + 2 + 2 * door_slots_ +
         kComboTypes * kNumColors * kBitsPerCombo;
}

SparseFeatures FeatureExtractor::extract(const ObservationRecord& obs) const {
  if (obs.width > width_ || obs.height > height_) {
    throw DimensionMismatch("observation does not fit the feature extractor bounds");
  }
  SparseFeatures out;
  out.dim = dim_;
  std::vector<int>& f = out.indices;

  int base = 0;
  f.push_back(base + obs.agent_x);
  base += width_;
  f.push_back(base + obs.agent_y);
  base += height_;
  f.push_back(base + obs.agent_dir);
  base += 4;

  if (obs.carrying.has) {
    f.push_back(base);
    f.push_back(base + 1 + static_cast<int>(obs.carrying.type));
    f.push_back(base + 1 + kNumTypes + static_cast<int>(obs.carrying.color));
  }
  base += 1 + kNumTypes + kNumColors;

  int fx = obs.agent_x + kDx[obs.agent_dir];
  int fy = obs.agent_y + kDy[obs.agent_dir];
  bool front_ok = obs.in_bounds(fx, fy);
  if (front_ok && front_passable(obs.at(fx, fy))) f.push_back(base);
  if (front_ok && obs.at(fx, fy).type == ObjectType::kEmpty) f.push_back(base + 1);
  base += 2;

  int door_seen = 0;
  for (int y = 0; y < obs.height && door_seen < door_slots_; ++y) {
    for (int x = 0; x < obs.width && door_seen < door_slots_; ++x) {
      const Cell& c = obs.at(x, y);
      if (c.type != ObjectType::kDoor) continue;
      if (c.is_open) f.push_back(base + 2 * door_seen);
      if (c.is_locked) f.push_back(base + 2 * door_seen + 1);
      ++door_seen;
    }
  }
  base += 2 * door_slots_;

  // Nearest instance per combo, then its egocentric bits.
  const int num_combos = kComboTypes * kNumColors;
  std::vector<int> best_dist(num_combos, -1);
  std::vector<std::pair<int, int>> best_at(num_combos);
  for (int y = 0; y < obs.height; ++y) {
    for (int x = 0; x < obs.width; ++x) {
      int combo = combo_of(obs.at(x, y));
      if (combo < 0) continue;
      int dist = std::abs(x - obs.agent_x) + std::abs(y - obs.agent_y);
      if (best_dist[combo] < 0 || dist < best_dist[combo]) {
        best_dist[combo] = dist;
        best_at[combo] = {x, y};
      }
    }
  }
  int hx = kDx[obs.agent_dir], hy = kDy[obs.agent_dir];
  int rx = kDx[(obs.agent_dir + 1) % 4], ry = kDy[(obs.agent_dir + 1) % 4];
  for (int combo = 0; combo < num_combos; ++combo) {
    if (best_dist[combo] < 0) continue;
    auto [ox, oy] = best_at[combo];
    int dx = ox - obs.agent_x, dy = oy - obs.agent_y;
    int fwd = dx * hx + dy * hy;
    int lat = dx * rx + dy * ry;
    int b = base + combo * kBitsPerCombo;
    if (fwd > 0) f.push_back(b + 0);
    if (fwd < 0) f.push_back(b + 1);
    if (fwd == 0) f.push_back(b + 2);
    if (lat > 0) f.push_back(b + 3);
    if (lat < 0) f.push_back(b + 4);
    if (lat == 0) f.push_back(b + 5);
    if (best_dist[combo] == 1) f.push_back(b + 6);
    if (front_ok && ox == fx && oy == fy) f.push_back(b + 7);
    if (front_ok && std::abs(ox - fx) + std::abs(oy - fy) == 1) f.push_back(b + 8);
  }
  return out;
}

}  // namespace larm
