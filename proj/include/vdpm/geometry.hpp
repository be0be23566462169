#pragma once

#include <string>
#include <vector>

#include "vdpm/errors.hpp"
#include "vdpm/types.hpp"

namespace vdpm {

// Axis-aligned box, continuous pixel coordinates. right > left, bottom > top.
struct BBox {
  Scalar left = 0, top = 0, right = 0, bottom = 0;

  BBox() = default;
  BBox(Scalar l, Scalar t, Scalar r, Scalar b) : left(l), top(t), right(r), bottom(b) {
    if (!(r > l) || !(b > t)) throw DataError("degenerate box");
  }

  Scalar width() const { return right - left; }
  Scalar height() const { return bottom - top; }
  Scalar area() const { return width() * height(); }
};

Scalar intersection_area(const BBox& a, const BBox& b);
Scalar iou(const BBox& a, const BBox& b);

// Clamps to [0,w]x[0,h]; throws EmptyAfterClip if nothing remains.
BBox clip_to_image(const BBox& b, Scalar w, Scalar h);

enum class Occlusion { none = 0, partial = 1, heavy = 2 };

struct Annotation {
  std::string class_label;
  BBox bbox;
  Scalar truncation = 0;
  Occlusion occlusion = Occlusion::none;
  std::string source_image;
  // Unconsumed KITTI fields (alpha, dims, location, rotation), kept so a
  // parsed file can be re-serialized without loss.
  std::vector<Scalar> extras;
};

// KITTI "moderate" difficulty. Bounds are inclusive.
struct ModerateConfig {
  Scalar max_truncation = 0.30;
  Scalar min_height = 25.0;
};

bool is_moderate(const Annotation& ann, const ModerateConfig& cfg = {});

// Part location in part-level cell coordinates.
struct PartPlacement {
  int part = 0;
  int y = 0;
  int x = 0;
};

struct Detection {
  BBox bbox;
  Scalar score = 0;
  int component = 0;
  int level = -1;
  int cell_y = -1;  // root placement in root-level cells
  int cell_x = -1;
  std::vector<PartPlacement> parts;
};

}  // namespace vdpm
