#include <doctest.h>

#include <cstdint>
#include <fstream>

#include "testutil.hpp"
#include "vdpm/hog.hpp"
#include "vdpm/rng.hpp"

using namespace vdpm;

namespace {

Image random_image(Rng& rng, int rows, int cols) {
  Image img(rows, cols);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) img(y, x) = rng.below_int(256);
  return img;
}

}  // namespace

TEST_CASE("constant image has zero orientation channels") {
  Image img(48, 64);
  img.setConstant(128);
  const FeatureLevel lvl = compute_cells(img, HogConfig{});
  CHECK(lvl.rows() == 6);
  CHECK(lvl.cols == 8);
  CHECK(lvl.dim == 31);
  for (int y = 0; y < lvl.rows(); ++y)
    for (int x = 0; x < lvl.cols; ++x)
      for (int k = 0; k < 27; ++k)  // orientation channels (signed + unsigned)
        CHECK(lvl.at(y, x, k) == 0.0);
}

TEST_CASE("vertical step edge concentrates energy in the horizontal-gradient bins") {
  Image img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img(y, x) = x < 8 ? 0 : 255;
  HogConfig cfg;
  const FeatureLevel lvl = compute_cells(img, cfg);
  REQUIRE(lvl.rows() == 2);
  REQUIRE(lvl.cols == 2);
  // gradient +x at the edge: angle 0 -> signed bin 0, unsigned bin 0
  Scalar edge_energy = 0, other_energy = 0;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int b = 0; b < 18; ++b) {
        if (b == 0)
          edge_energy += lvl.at(y, x, b);
        else
          other_energy += lvl.at(y, x, b);
      }
  CHECK(edge_energy > 0);
  CHECK(other_energy == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("too-small image raises") {
  Image img(8, 40);
  img.setConstant(0);
  CHECK_THROWS_AS(compute_cells(img, HogConfig{}), ImageTooSmall);
}

TEST_CASE("features are bounded and finite for random 8-bit input") {
  Rng rng(23);
  const Image img = random_image(rng, 40, 56);
  const FeatureLevel lvl = compute_cells(img, HogConfig{});
  // signed/unsigned <= 0.5*4*0.2 = 0.4; texture <= 0.2357*18*0.2
  for (int y = 0; y < lvl.rows(); ++y)
    for (int x = 0; x < lvl.cols; ++x)
      for (int k = 0; k < lvl.dim; ++k) {
        const Scalar v = lvl.at(y, x, k);
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= (k < 27 ? 0.4 + 1e-12 : 0.2357 * 18 * 0.2 + 1e-12));
      }
}

TEST_CASE("pyramid octave structure") {
  Rng rng(29);
  const Image img = random_image(rng, 480, 640);

  HogConfig cfg;
  cfg.interval = 10;
  const HogPyramid pyr = build_pyramid(img, cfg, 3, 3);
  REQUIRE(pyr.num_levels() > cfg.interval);
  CHECK(pyr.levels[0].rows() == 120);
  CHECK(pyr.levels[0].cols == 160);
  CHECK(pyr.levels[0].scale == doctest::Approx(2.0));
  for (int l = 0; l + cfg.interval < pyr.num_levels(); ++l)
    CHECK(pyr.levels[l + cfg.interval].scale / pyr.levels[l].scale ==
          doctest::Approx(0.5).epsilon(1e-12));

  HogConfig fast;
  fast.interval = 1;
  const HogPyramid p1 = build_pyramid(resize_bilinear(img, 120, 160), fast, 3, 3);
  for (int l = 0; l + 1 < p1.num_levels(); ++l)
    CHECK(p1.levels[l + 1].scale / p1.levels[l].scale == doctest::Approx(0.5));

  // level count is deterministic in image size / config
  const HogPyramid again = build_pyramid(img, cfg, 3, 3);
  CHECK(again.num_levels() == pyr.num_levels());
}

TEST_CASE("horizontal flip permutes channels") {
  Rng rng(31);
  const Image img = random_image(rng, 48, 64);  // cell-aligned
  const HogConfig cfg;
  const FeatureLevel a = compute_cells(img, cfg);
  const FeatureLevel b = compute_cells(flip_horizontal(img), cfg);
  const auto perm = flip_channel_permutation();

  // involution
  for (int k = 0; k < 31; ++k) CHECK(perm[perm[k]] == k);

  Scalar max_err = 0;
  for (int y = 0; y < a.rows(); ++y)
    for (int x = 0; x < a.cols; ++x)
      for (int k = 0; k < a.dim; ++k)
        max_err = std::max(max_err,
                           std::abs(b.at(y, a.cols - 1 - x, k) - a.at(y, x, perm[k])));
  CHECK(max_err < 1e-9);
}

TEST_CASE("flip_filter matches flipped-image features") {
  Rng rng(37);
  const Image img = random_image(rng, 24, 40);
  const HogConfig cfg;
  const FeatureLevel a = compute_cells(img, cfg);
  const FeatureLevel b = compute_cells(flip_horizontal(img), cfg);
  const MatrixRM flipped = flip_filter(a.cells, a.cols, a.dim);
  CHECK((flipped - b.cells).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("dump_level layout") {
  Rng rng(41);
  const Image img = random_image(rng, 16, 24);
  const FeatureLevel lvl = compute_cells(img, HogConfig{});
  const std::string path = testutil::scratch_dir("dump") + "/level.bin";
  dump_level(lvl, path);

  std::ifstream in(path, std::ios::binary);
  std::int32_t hdr[3];
  in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  REQUIRE(in.good());
  CHECK(hdr[0] == lvl.rows());
  CHECK(hdr[1] == lvl.cols);
  CHECK(hdr[2] == lvl.dim);
  std::vector<float> data(static_cast<std::size_t>(hdr[0]) * hdr[1] * hdr[2]);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(4 * data.size()));
  REQUIRE(in.good());
  CHECK(data[0] == doctest::Approx(static_cast<float>(lvl.at(0, 0, 0))));
  CHECK(data.back() ==
        doctest::Approx(static_cast<float>(lvl.at(lvl.rows() - 1, lvl.cols - 1, lvl.dim - 1))));
}
