#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "testutil.hpp"
#include "vdpm/eval.hpp"
#include "vdpm/rng.hpp"

using namespace vdpm;

namespace {

Detection det(const BBox& b, Scalar score) {
  Detection d;
  d.bbox = b;
  d.score = score;
  return d;
}

Annotation gt(const BBox& b, Scalar truncation = 0, Occlusion occ = Occlusion::none,
              const std::string& cls = "Car") {
  Annotation a;
  a.class_label = cls;
  a.bbox = b;
  a.truncation = truncation;
  a.occlusion = occ;
  return a;
}

}  // namespace

TEST_CASE("match basics") {
  const BBox box(0, 0, 40, 40);
  SUBCASE("one det on one moderate gt") {
    const ImageMatches m = match({det(box, 0.9)}, {gt(box)});
    CHECK(m.n_moderate_gt == 1);
    REQUIRE(m.det_labels.size() == 1);
    CHECK(m.det_labels[0] == MatchLabel::TP);
  }
  SUBCASE("two dets on one gt: greedy by score") {
    // higher-scoring det has slightly lower IoU; it still wins the GT
    const BBox close(0, 0, 40, 36);  // IoU 0.9
    const BBox closer(0, 0, 40, 38);
    const ImageMatches m = match({det(close, 0.9), det(closer, 0.8)}, {gt(box)});
    CHECK(m.det_labels[0] == MatchLabel::TP);
    CHECK(m.det_labels[1] == MatchLabel::FP);
  }
  SUBCASE("detection on a heavily truncated gt is ignored") {
    const ImageMatches m = match({det(box, 0.9)}, {gt(box, 0.5)});
    CHECK(m.n_moderate_gt == 0);
    CHECK(m.det_labels[0] == MatchLabel::Ignore);
  }
  SUBCASE("detection on an ignore-class region is ignored") {
    const ImageMatches m = match({det(box, 0.9)}, {gt(box, 0, Occlusion::none, "Van")});
    CHECK(m.n_moderate_gt == 0);
    CHECK(m.det_labels[0] == MatchLabel::Ignore);
  }
  SUBCASE("order stability: permuting detections does not change labels") {
    const BBox far(100, 0, 140, 40);
    const std::vector<Detection> dets{det(box, 0.9), det(far, 0.7), det(BBox(200, 0, 240, 40), 0.5)};
    std::vector<Detection> rev(dets.rbegin(), dets.rend());
    const std::vector<Annotation> gts{gt(box), gt(far)};
    const ImageMatches a = match(dets, gts);
    const ImageMatches b = match(rev, gts);
    CHECK(a.det_labels[0] == b.det_labels[2]);
    CHECK(a.det_labels[1] == b.det_labels[1]);
    CHECK(a.det_labels[2] == b.det_labels[0]);
  }
}

namespace {

// The hand-enumerated protocol fixture: 2 images, 3 moderate GT,
// dets {TP 0.9, FP 0.8, TP 0.7}.
std::vector<EvalInput> fixture_images() {
  std::vector<EvalInput> images(2);
  const BBox g1(0, 0, 40, 40), g2(100, 0, 140, 40), g3(0, 0, 50, 50);
  images[0].gts = {gt(g1), gt(g2)};
  images[0].dets = {det(g1, 0.9), det(BBox(300, 300, 340, 340), 0.8)};
  images[1].gts = {gt(g3)};
  images[1].dets = {det(g3, 0.7)};
  return images;
}

}  // namespace

TEST_CASE("curve reproduces the hand-enumerated sweep") {
  const FppiMrCurve c = curve(fixture_images());
  CHECK(c.n_images == 2);
  CHECK(c.n_gt == 3);
  REQUIRE(c.points.size() == 3);
  // t=0.9: 1 TP, 0 FP; t=0.8: 1 TP, 1 FP; t=0.7: 2 TP, 1 FP
  CHECK(c.points[0].fppi == doctest::Approx(0.0));
  CHECK(c.points[0].mr == doctest::Approx(2.0 / 3));
  CHECK(c.points[1].fppi == doctest::Approx(0.5));
  CHECK(c.points[1].mr == doctest::Approx(2.0 / 3));
  CHECK(c.points[2].fppi == doctest::Approx(0.5));
  CHECK(c.points[2].mr == doctest::Approx(1.0 / 3));

  // FPPI non-decreasing, MR non-increasing along the sweep
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i].fppi >= c.points[i - 1].fppi);
    CHECK(c.points[i].mr <= c.points[i - 1].mr);
  }

  // hand-computed 9-point log-average: 7 samples at 2/3, 2 at 1/3
  CHECK(log_average_mr(c) == doctest::Approx(16.0 / 27).epsilon(1e-12));
}

TEST_CASE("curve edge cases") {
  // perfect detector: single point (0, 0)
  std::vector<EvalInput> perfect(1);
  const BBox g(0, 0, 40, 40);
  perfect[0].gts = {gt(g)};
  perfect[0].dets = {det(g, 1.0)};
  const FppiMrCurve pc = curve(perfect);
  REQUIRE(pc.points.size() == 1);
  CHECK(pc.points[0].fppi == 0.0);
  CHECK(pc.points[0].mr == 0.0);

  // no detections: MR 1 at FPPI 0
  std::vector<EvalInput> none(1);
  none[0].gts = {gt(g)};
  const FppiMrCurve nc = curve(none);
  REQUIRE(nc.points.size() == 1);
  CHECK(nc.points[0].fppi == 0.0);
  CHECK(nc.points[0].mr == 1.0);
  CHECK(log_average_mr(nc) == 1.0);

  // zero moderate GT
  std::vector<EvalInput> empty_gt(1);
  empty_gt[0].gts = {gt(g, 0.9)};
  CHECK_THROWS_AS(curve(empty_gt), EmptyGroundTruth);
}

TEST_CASE("TP + missed equals moderate GT count at every threshold") {
  Rng rng(71);
  std::vector<EvalInput> images(4);
  int total_gt = 0;
  for (auto& im : images) {
    const int n = 1 + rng.below_int(3);
    for (int i = 0; i < n; ++i) {
      const Scalar x = 200 * rng.uniform(), y = 100 * rng.uniform();
      const BBox b(x, y, x + 40, y + 30);
      im.gts.push_back(gt(b));
      ++total_gt;
      if (rng.uniform() < 0.7) im.dets.push_back(det(b, rng.uniform()));
      if (rng.uniform() < 0.5)
        im.dets.push_back(det(BBox(x + 500, y, x + 540, y + 30), rng.uniform()));
    }
  }
  const FppiMrCurve c = curve(images);
  for (const FppiMrPoint& p : c.points) {
    const Scalar tp = (1 - p.mr) * c.n_gt;
    const Scalar missed = p.mr * c.n_gt;
    CHECK(tp + missed == doctest::Approx(c.n_gt));
  }
}

TEST_CASE("ignore-matched detections leave the curve unchanged") {
  std::vector<EvalInput> base = fixture_images();
  std::vector<EvalInput> extra = fixture_images();
  // an extra detection sitting on a non-moderate (truncated) GT
  const BBox ignored(400, 0, 440, 40);
  extra[0].gts.push_back(gt(ignored, 0.8));
  extra[0].dets.push_back(det(ignored, 0.85));
  base[0].gts.push_back(gt(ignored, 0.8));

  const FppiMrCurve a = curve(base);
  const FppiMrCurve b = curve(extra);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].fppi == b.points[i].fppi);
    CHECK(a.points[i].mr == b.points[i].mr);
  }
}

TEST_CASE("log_average_mr constants") {
  FppiMrCurve flat;
  flat.points = {{0.0, 0.4, 9.9}};
  CHECK(log_average_mr(flat) == doctest::Approx(0.4));
}

TEST_CASE("aggregate mean and std") {
  FppiMrCurve a, b;
  a.points = {{0.0, 0.2, 0}};
  b.points = {{0.0, 0.4, 0}};
  const AggregateCurves agg = aggregate({a, b});
  CHECK(agg.mean(0) == doctest::Approx(0.3));
  CHECK(agg.stddev(0) == doctest::Approx(std::sqrt(0.02)).epsilon(1e-9));  // 0.1414...
  CHECK(agg.stddev(agg.stddev.size() - 1) == doctest::Approx(0.14142135623730953).epsilon(1e-9));

  const AggregateCurves single = aggregate({a});
  CHECK(single.stddev.cwiseAbs().maxCoeff() == 0.0);
  CHECK(single.mean(0) == doctest::Approx(0.2));

  const AggregateCurves same = aggregate({a, a, a});
  CHECK(same.stddev.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("curves csv round trip and svg validity") {
  const std::string dir = testutil::scratch_dir("curves");
  FppiMrCurve a, b, c;
  a.points = {{0.0, 0.8, 0.9}, {0.5, 0.4, 0.2}, {2.0, 0.25, -0.5}};
  b.points = {{0.0, 0.7, 0.8}, {1.0, 0.3, 0.1}};
  c.points = {{0.0, 0.5, 0.5}};
  std::vector<ExperimentCurves> exps;
  exps.push_back({"SA-SSVM", {a, b}});
  exps.push_back({"SRC", {c}});
  write_curves_csv(dir + "/c.csv", exps);

  const CsvCurves back = read_curves_csv(dir + "/c.csv");
  REQUIRE(back.experiments.size() == 2);
  CHECK(back.experiments[0].label == "SA-SSVM");
  CHECK(back.experiments[0].per_run.rows() == 2);
  CHECK(back.experiments[1].per_run.rows() == 1);
  REQUIRE(back.grid.size() == aggregation_grid().size());

  const AggregateCurves agg = aggregate({a, b});
  for (int i = 0; i < agg.mean.size(); ++i) {
    CHECK(back.experiments[0].mean(i) == doctest::Approx(agg.mean(i)).epsilon(1e-12));
    CHECK(back.experiments[0].stddev(i) == doctest::Approx(agg.stddev(i)).epsilon(1e-12));
    CHECK(back.experiments[0].per_run(0, i) == doctest::Approx(agg.per_run(0, i)).epsilon(1e-12));
  }

  // resampling a grid-sampled curve at the same grid is the identity
  FppiMrCurve regrid;
  for (std::size_t i = 0; i < back.grid.size(); ++i)
    regrid.points.push_back({back.grid[i], back.experiments[0].mean(static_cast<int>(i)), 0});
  const FppiMrCurve mc = mean_curve(agg);
  CHECK(log_average_mr(regrid) == doctest::Approx(log_average_mr(mc)).epsilon(1e-12));

  // SVG: well-formed tag nesting, legend carries the log-average values
  write_plot_svg(dir + "/c.svg", exps, "demo");
  std::ifstream in(dir + "/c.svg");
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("<svg") != std::string::npos);
  CHECK(text.find("</svg>") != std::string::npos);
  CHECK(text.find("SA-SSVM (") != std::string::npos);
  std::vector<std::string> stack;
  std::size_t pos = 0;
  bool balanced = true;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    if (text.compare(pos, 2, "<?") == 0) {
      pos = text.find('>', pos);
      continue;
    }
    const std::size_t end = text.find('>', pos);
    REQUIRE(end != std::string::npos);
    std::string tag = text.substr(pos + 1, end - pos - 1);
    if (tag.back() == '/') {
      // self-closing
    } else if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name)
        balanced = false;
      else
        stack.pop_back();
    } else {
      stack.push_back(tag.substr(0, tag.find_first_of(" \t")));
    }
    pos = end;
  }
  CHECK(balanced);
  CHECK(stack.empty());
}

TEST_CASE("step interpolation clamps at curve ends") {
  FppiMrCurve c;
  c.points = {{0.1, 0.8, 0}, {1.0, 0.3, 0}};
  CHECK(sample_mr(c, 0.01) == doctest::Approx(0.8));  // below first point
  CHECK(sample_mr(c, 0.5) == doctest::Approx(0.8));
  CHECK(sample_mr(c, 1.0) == doctest::Approx(0.3));
  CHECK(sample_mr(c, 10.0) == doctest::Approx(0.3));  // above last point
}
