#pragma once

#include <vector>

#include "larm/observation.hpp"

namespace larm {

// Binary feature vector in sparse form: the listed indices are 1, the rest 0.
struct SparseFeatures {
  std::vector<int> indices;
  int dim = 0;
};

// Hand-coded observation features for the linear value function. The layout
// is fixed by (width, height, door_slots) at construction, so a single
// extractor can serve several tasks as long as they fit inside those bounds.
//
// Blocks, in index order:
//   - agent x one-hot (width), y one-hot (height), heading one-hot (4)
//   - carrying: has-item bit, item type one-hot, item color one-hot
//   - front cell: passable bit, empty bit
//   - door slots: (open, locked) per door, doors enumerated row-major
//   - egocentric block, 9 bits per (type, color) pair over every object type
//     except empty/wall and all colors: displacement sign of the nearest
//     instance along the heading (front/behind/level) and across it
//     (right/left/level), 4-adjacency, directly-faced, and front-cell-borders
//     -it bits. Nearest = smallest Manhattan distance, row-major tie-break.
//
// The egocentric block is what lets one weight matrix express "approach the
// X" for an X that sits at different cells in different episodes; absolute
// coordinates alone would pin the policy to training-time object positions.
class FeatureExtractor {
 public:
  FeatureExtractor(int width, int height, int door_slots);

  SparseFeatures extract(const ObservationRecord& obs) const;
  int dim() const { return dim_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int door_slots() const { return door_slots_; }

 private:
  int width_;
  int height_;
  int door_slots_;
  int dim_;
};

}  // namespace larm
