#include <doctest.h>

#include <fstream>

#include "testutil.hpp"
#include "vdpm/model.hpp"
#include "vdpm/rng.hpp"

using namespace vdpm;

TEST_CASE("partition covers the vector with the expected block count") {
  Rng rng(1);
  // 6x12 roots comfortably host 8 parts at double resolution
  DpmModel m = testutil::random_model(rng, 3, 8, 31, 6, 12);
  const auto [w, part] = vectorize(m);
  CHECK(part.num_blocks() == 27);  // 3 * (1 + 8)
  CHECK(part.total_size == w.size());

  int covered = 0;
  int expect_offset = 0;
  for (const Block& b : part.blocks) {
    CHECK(b.offset == expect_offset);
    expect_offset += b.size;
    covered += b.size;
  }
  CHECK(covered == part.total_size);
}

TEST_CASE("vectorize/devectorize round trip is exact") {
  Rng rng(2);
  DpmModel m = testutil::random_model(rng, 2, 3, 5);
  const auto [w, part] = vectorize(m);
  const DpmModel back = devectorize(w, part, m);
  const auto [w2, part2] = vectorize(back);
  CHECK((w - w2).cwiseAbs().maxCoeff() == 0);
  CHECK(part2.total_size == part.total_size);

  // zero model -> zero vector of layout length
  DpmModel zero = m;
  for (auto& c : zero.components) {
    c.root.setZero();
    c.bias = 0;
    for (auto& p : c.parts) {
      p.filter.setZero();
      p.deform.setZero();
    }
  }
  CHECK(vectorize(zero).first.cwiseAbs().maxCoeff() == 0);
  CHECK(vectorize(zero).first.size() == w.size());
}

TEST_CASE("devectorize rejects wrong lengths") {
  Rng rng(3);
  DpmModel m = testutil::random_model(rng, 1, 2, 4);
  const auto [w, part] = vectorize(m);
  VectorX bad = VectorX::Zero(w.size() + 1);
  CHECK_THROWS_AS(devectorize(bad, part, m), LayoutError);
}

TEST_CASE("model file round trip is bit exact") {
  Rng rng(4);
  DpmModel m = testutil::random_model(rng, 2, 4, 31, 4, 7);
  m.threshold = -0.375;
  m.hog.cell_size = 8;
  m.hog.interval = 5;
  const std::string path = testutil::scratch_dir("model") + "/m.vdpm";
  save_model(m, path);
  const DpmModel back = load_model(path);
  CHECK(back.threshold == m.threshold);
  CHECK(back.hog.interval == 5);
  CHECK(back.components.size() == m.components.size());
  const auto [w, p1] = vectorize(m);
  const auto [w2, p2] = vectorize(back);
  REQUIRE(w.size() == w2.size());
  CHECK((w - w2).cwiseAbs().maxCoeff() == 0);
  for (std::size_t c = 0; c < m.components.size(); ++c)
    for (std::size_t pi = 0; pi < m.components[c].parts.size(); ++pi) {
      CHECK(back.components[c].parts[pi].anchor_x == m.components[c].parts[pi].anchor_x);
      CHECK(back.components[c].parts[pi].anchor_y == m.components[c].parts[pi].anchor_y);
    }
}

TEST_CASE("corrupt model files raise FormatError") {
  const std::string dir = testutil::scratch_dir("badmodel");
  {
    std::ofstream out(dir + "/bad.vdpm", std::ios::binary);
    out << "NOPE this is not a model";
  }
  CHECK_THROWS_AS(load_model(dir + "/bad.vdpm"), FormatError);

  Rng rng(5);
  DpmModel m = testutil::random_model(rng, 1, 1, 4);
  save_model(m, dir + "/ok.vdpm");
  // truncate
  std::ifstream in(dir + "/ok.vdpm", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  {
    std::ofstream out(dir + "/trunc.vdpm", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_model(dir + "/trunc.vdpm"), FormatError);
}

TEST_CASE("deformation_bounds hits every part's deformation weights") {
  Rng rng(6);
  DpmModel m = testutil::random_model(rng, 2, 3, 4);
  const auto bounds = deformation_bounds(m, 0.01);
  CHECK(bounds.size() == 2 * 3 * 4);
  const auto [w, part] = vectorize(m);
  for (const LowerBound& b : bounds) {
    CHECK(b.index >= 0);
    CHECK(b.index < w.size());
  }
  // applying the bounds then devectorizing yields convex deformations
  VectorX v = w;
  for (const LowerBound& b : bounds) v(b.index) = std::max(v(b.index), b.bound);
  const DpmModel proj = devectorize(v, m);
  for (const auto& c : proj.components)
    for (const auto& p : c.parts) {
      CHECK(p.deform(0) >= 0);
      CHECK(p.deform(1) >= 0);
      CHECK(p.deform(2) >= 0.01);
      CHECK(p.deform(3) >= 0.01);
    }
}
