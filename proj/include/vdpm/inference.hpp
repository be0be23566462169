#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vdpm/errors.hpp"
#include "vdpm/geometry.hpp"
#include "vdpm/hog.hpp"
#include "vdpm/model.hpp"
#include "vdpm/types.hpp"

namespace vdpm {

struct ScoreMap {
  MatrixRM values;
  int level = -1;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  bool empty() const { return values.size() == 0; }
};

// Valid cross-correlation of a cell-major filter against a feature level.
// Output is (level.rows - h + 1) x (level.cols - w + 1); empty if the filter
// does not fit.
ScoreMap correlate(const MatrixRM& filter, int filter_cols, const FeatureLevel& level);

// 1-D transform out[x] = max_{x'} f[x'] - c1*|x-x'| - c2*(x-x')^2 with the
// maximizing x' in arg. Upper envelope of identical concave curves; the
// envelope boundary between roots p<q solves a piecewise-linear equation, so
// the whole pass is O(n). Requires c1 >= 0, c2 > 0.
template <class S>
void dt1d(const S* f, int n, S c1, S c2, S* out, int* arg, S* z_buf, int* v_buf) {
  constexpr S kInf = std::numeric_limits<S>::infinity();
  int k = 0;
  v_buf[0] = 0;
  z_buf[0] = -kInf;
  z_buf[1] = kInf;

  // first grid point where the curve rooted at q overtakes the one at p (p<q)
  const auto intersect = [&](int p, int q) -> S {
    const S d = f[p] - f[q];
    const S gap = static_cast<S>(q - p);
    const S mid = static_cast<S>(p + q);
    S x = ((d + c1 * gap) / (c2 * gap) + mid) / 2;  // region x <= p
    if (x <= static_cast<S>(p)) return x;
    x = (d / (c1 + c2 * gap) + mid) / 2;  // region p <= x <= q
    if (x <= static_cast<S>(q)) return x;
    return ((d - c1 * gap) / (c2 * gap) + mid) / 2;  // region x >= q
  };

  for (int q = 1; q < n; ++q) {
    S s = intersect(v_buf[k], q);
    while (s <= z_buf[k]) {
      --k;
      s = intersect(v_buf[k], q);
    }
    ++k;
    v_buf[k] = q;
    z_buf[k] = s;
    z_buf[k + 1] = kInf;
  }

  k = 0;
  for (int x = 0; x < n; ++x) {
    while (z_buf[k + 1] < static_cast<S>(x)) ++k;
    const int r = v_buf[k];
    const S dx = static_cast<S>(x - r);
    out[x] = f[r] - c1 * std::abs(dx) - c2 * dx * dx;
    arg[x] = r;
  }
}

struct GdtResult {
  ScoreMap transformed;
  IntGrid arg_y;
  IntGrid arg_x;
};

// Generalized distance transform over both axes:
//   out(y,x) = max_{y',x'} scores(y',x') - dx*|Dx| - dy*|Dy| - dx2*Dx^2 - dy2*Dy^2
// Throws DeformationError unless dx,dy >= 0 and dx2,dy2 > 0 (convex cost).
GdtResult gdt(const ScoreMap& scores, const Eigen::Vector4d& d);

// Per-part data kept around so detections can recover part placements and
// training can read features at the chosen locations.
struct PartScore {
  GdtResult dt;
  int corr_rows = 0;
  int corr_cols = 0;
};

struct ComponentScore {
  ScoreMap score;                     // root-level grid
  std::vector<PartScore> parts;       // per part, on the part level
  int part_level = -1;
};

// Root correlation + bias + deformation-transformed part scores sampled at
// 2*(root position) + anchor. Out-of-range part anchors contribute
// kNegInfScore. root_level must be >= pyramid interval.
ScoreMap score_component(const Component& c, const HogPyramid& pyr, int root_level);
ComponentScore score_component_full(const Component& c, const HogPyramid& pyr, int root_level);

// All (root level, component) score maps for one pyramid.
struct PyramidScores {
  // indexed [root_level - interval][component]
  std::vector<std::vector<ComponentScore>> at;
  int interval = 0;

  const ComponentScore& get(int root_level, int component) const {
    return at[root_level - interval][component];
  }
};

PyramidScores score_pyramid(const DpmModel& m, const HogPyramid& pyr);

// Back-projects a root placement to image coordinates.
BBox root_box(const DpmModel& m, int component, Scalar level_scale, int y, int x);

std::vector<Detection> nms(std::vector<Detection> dets, Scalar overlap = 0.5);

// Threshold, back-project, recover part placements, sort by score, NMS.
std::vector<Detection> detect(const Image& img, const DpmModel& m, Scalar threshold,
                              Scalar nms_overlap = 0.5);
std::vector<Detection> detect(const Image& img, const DpmModel& m);

// Same, from precomputed scores (shared by training passes).
std::vector<Detection> collect_detections(const DpmModel& m, const HogPyramid& pyr,
                                          const PyramidScores& scores, Scalar threshold);

// CSV: image_id,left,top,right,bottom,score,component
void write_detections_csv(const std::string& path,
                          const std::vector<std::pair<std::string, Detection>>& rows);
std::vector<std::pair<std::string, Detection>> read_detections_csv(const std::string& path);

}  // namespace vdpm
