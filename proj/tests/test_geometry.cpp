#include <doctest.h>

#include "oracles.hpp"
#include "vdpm/geometry.hpp"
#include "vdpm/rng.hpp"

using namespace vdpm;

TEST_CASE("iou identity and disjoint") {
  const BBox a(0, 0, 10, 10);
  CHECK(iou(a, a) == doctest::Approx(1.0));
  const BBox b(20, 20, 30, 30);
  CHECK(iou(a, b) == 0.0);
}

TEST_CASE("iou half-overlap fixture") {
  // inter 50, union 100
  const BBox a(0, 0, 10, 10);
  const BBox b(0, 0, 10, 5);
  CHECK(iou(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(iou(a, b) == doctest::Approx(oracles::pixel_grid_iou(a, b)).epsilon(1e-9));
}

TEST_CASE("iou matches pixel-grid oracle on random integer boxes") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const int ax = rng.below_int(40) - 20, ay = rng.below_int(40) - 20;
    const int bx = rng.below_int(40) - 20, by = rng.below_int(40) - 20;
    const BBox a(ax, ay, ax + 1 + rng.below_int(30), ay + 1 + rng.below_int(30));
    const BBox b(bx, by, bx + 1 + rng.below_int(30), by + 1 + rng.below_int(30));
    CHECK(iou(a, b) == doctest::Approx(oracles::pixel_grid_iou(a, b)).epsilon(1e-9));
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, b) >= 0.0);
    CHECK(iou(a, b) <= 1.0);
  }
}

TEST_CASE("degenerate boxes rejected at construction") {
  CHECK_THROWS_AS(BBox(0, 0, 0, 10), DataError);
  CHECK_THROWS_AS(BBox(0, 0, 10, 0), DataError);
  CHECK_THROWS_AS(BBox(5, 5, 5, 5), DataError);
}

TEST_CASE("clip_to_image") {
  const BBox a = clip_to_image(BBox(-5, -5, 10, 10), 100, 100);
  CHECK(a.left == 0);
  CHECK(a.top == 0);
  CHECK(a.right == 10);
  CHECK(a.bottom == 10);

  const BBox b = clip_to_image(BBox(0, 0, 10, 10), 100, 100);
  CHECK(b.left == 0);
  CHECK(b.right == 10);

  CHECK_THROWS_AS(clip_to_image(BBox(150, 150, 160, 160), 100, 100), EmptyAfterClip);
}

namespace {

Annotation make_ann(Scalar height, Scalar truncation, Occlusion occ) {
  Annotation a;
  a.class_label = "Car";
  a.bbox = BBox(0, 0, 40, height);
  a.truncation = truncation;
  a.occlusion = occ;
  return a;
}

}  // namespace

TEST_CASE("moderate filter boundary cases") {
  CHECK_FALSE(is_moderate(make_ann(24, 0, Occlusion::none)));
  CHECK_FALSE(is_moderate(make_ann(40, 0.31, Occlusion::none)));
  CHECK(is_moderate(make_ann(25, 0.30, Occlusion::partial)));
  CHECK(is_moderate(make_ann(25, 0, Occlusion::none)));
  CHECK_FALSE(is_moderate(make_ann(100, 0, Occlusion::heavy)));
}

TEST_CASE("moderate filter is monotone in truncation and height") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const Scalar h = 10 + 40 * rng.uniform();
    const Scalar t = 0.5 * rng.uniform();
    const Occlusion occ = static_cast<Occlusion>(rng.below_int(3));
    const bool base = is_moderate(make_ann(h, t, occ));
    // increasing truncation or decreasing height never flips false -> true
    const bool worse_t = is_moderate(make_ann(h, t + 0.2 * rng.uniform(), occ));
    const bool worse_h =
        is_moderate(make_ann(std::max<Scalar>(1.0, h - 10 * rng.uniform()), t, occ));
    if (!base) {
      CHECK_FALSE(worse_t);
      CHECK_FALSE(worse_h);
    }
  }
}
