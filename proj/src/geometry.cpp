#include "vdpm/geometry.hpp"

#include <algorithm>

namespace vdpm {

Scalar intersection_area(const BBox& a, const BBox& b) {
  const Scalar w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const Scalar h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (w <= 0 || h <= 0) return 0;
  return w * h;
}

Scalar iou(const BBox& a, const BBox& b) {
  const Scalar inter = intersection_area(a, b);
  if (inter <= 0) return 0;
  return inter / (a.area() + b.area() - inter);
}

BBox clip_to_image(const BBox& b, Scalar w, Scalar h) {
  const Scalar l = std::clamp(b.left, Scalar(0), w);
  const Scalar t = std::clamp(b.top, Scalar(0), h);
  const Scalar r = std::clamp(b.right, Scalar(0), w);
  const Scalar bt = std::clamp(b.bottom, Scalar(0), h);
  if (!(r > l) || !(bt > t)) throw EmptyAfterClip("box outside image");
  return BBox(l, t, r, bt);
}

bool is_moderate(const Annotation& ann, const ModerateConfig& cfg) {
  return ann.occlusion != Occlusion::heavy && ann.truncation <= cfg.max_truncation &&
         ann.bbox.height() >= cfg.min_height;
}

}  // namespace vdpm
