#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "testutil.hpp"
#include "vdpm/synth.hpp"
#include "vdpm/train.hpp"

using namespace vdpm;

namespace {

// batch subgradient descent run to convergence; the solver oracle
Scalar batch_oracle_objective(const std::vector<HingeSample>& samples, Scalar C, int dim) {
  VectorX w = VectorX::Zero(dim);
  Scalar best = hinge_objective(w, nullptr, samples, C);
  for (int it = 1; it <= 20000; ++it) {
    const VectorX g = hinge_subgradient(w, nullptr, samples, C);
    w -= (0.5 / std::sqrt(Scalar(it))) * g;
    best = std::min(best, hinge_objective(w, nullptr, samples, C));
  }
  return best;
}

std::vector<HingeSample> toy_separable(Rng& rng, int n) {
  // separable with margin: w* = (1,1,0) gives y*(w.phi) >= 1
  std::vector<HingeSample> samples;
  for (int i = 0; i < n; ++i) {
    const Scalar y = i % 2 ? 1.0 : -1.0;
    VectorX phi(3);
    phi << y * (0.5 + rng.uniform()), y * (0.5 + rng.uniform()), 1.0;
    HingeSample s;
    s.offset = 0;
    s.phi = phi;
    s.y = y;
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace

TEST_CASE("ssvm_sgd reaches the batch oracle on separable toy data") {
  Rng rng(81);
  const auto samples = toy_separable(rng, 40);
  SgdConfig cfg;
  cfg.epochs = 400;
  cfg.eta0 = 0.1;
  cfg.t0_factor = 2.0;
  const Scalar C = 0.5;
  const VectorX w = ssvm_sgd(VectorX::Zero(3), nullptr, samples, C, cfg, Rng(7));

  int errors = 0;
  for (const auto& s : samples)
    if (s.y * dot_block(w, s) <= 0) ++errors;
  CHECK(errors == 0);

  const Scalar got = hinge_objective(w, nullptr, samples, C);
  const Scalar want = batch_oracle_objective(samples, C, 3);
  CHECK(got <= want * 1.01 + 1e-9);
  CHECK(got >= want * 0.8);  // sanity: oracle actually converged
}

TEST_CASE("C to zero drives w to zero") {
  Rng rng(82);
  const auto samples = toy_separable(rng, 20);
  SgdConfig cfg;
  cfg.epochs = 300;
  cfg.eta0 = 0.05;
  const VectorX w = ssvm_sgd(VectorX::Ones(3), nullptr, samples, 1e-9, cfg, Rng(9));
  CHECK(w.norm() < 1e-3);
}

TEST_CASE("sgd is deterministic given the seed") {
  Rng rng(83);
  const auto samples = toy_separable(rng, 30);
  SgdConfig cfg;
  cfg.epochs = 5;
  const VectorX a = ssvm_sgd(VectorX::Zero(3), nullptr, samples, 0.3, cfg, Rng(4));
  const VectorX b = ssvm_sgd(VectorX::Zero(3), nullptr, samples, 0.3, cfg, Rng(4));
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hinge subgradient matches finite differences at smooth points") {
  Rng rng(84);
  for (int trial = 0; trial < 25; ++trial) {
    const int dim = 6;
    std::vector<HingeSample> samples;
    for (int i = 0; i < 8; ++i) {
      HingeSample s;
      s.offset = 0;
      s.phi = VectorX::NullaryExpr(dim, [&](Eigen::Index) { return rng.normal(); });
      s.y = rng.uniform() < 0.5 ? 1.0 : -1.0;
      samples.push_back(std::move(s));
    }
    VectorX prior = VectorX::NullaryExpr(dim, [&](Eigen::Index) { return rng.normal(); });
    VectorX w = VectorX::NullaryExpr(dim, [&](Eigen::Index) { return rng.normal(); });
    // keep away from hinge kinks
    bool smooth = true;
    for (const auto& s : samples)
      if (std::abs(1 - s.y * dot_block(w, s)) < 1e-3) smooth = false;
    if (!smooth) continue;

    const Scalar C = 0.7;
    const VectorX g = hinge_subgradient(w, &prior, samples, C);
    const VectorX fd = oracles::finite_difference(
        [&](const VectorX& v) { return hinge_objective(v, &prior, samples, C); }, w);
    CHECK((g - fd).norm() / std::max<Scalar>(1.0, fd.norm()) < 1e-4);
  }
}

TEST_CASE("solver projects deformation bounds") {
  Rng rng(85);
  std::vector<HingeSample> samples;
  HingeSample s;
  s.offset = 0;
  s.phi = VectorX::Ones(4);
  s.y = -1;  // pushes weights negative
  samples.push_back(s);
  SgdConfig cfg;
  cfg.epochs = 10;
  std::vector<LowerBound> bounds{{2, 0.01}, {3, 0.01}};
  const VectorX w = ssvm_sgd(VectorX::Zero(4), nullptr, samples, 5.0, cfg, Rng(2), bounds);
  CHECK(w(2) >= 0.01);
  CHECK(w(3) >= 0.01);
  CHECK(w(0) < 0.01);  // unbounded coordinates did move down
}

TEST_CASE("init_components fixtures") {
  HogConfig hog;
  SUBCASE("identical boxes for every component") {
    std::vector<BBox> boxes(9, BBox(0, 0, 64, 32));
    const ComponentInit init = init_components(boxes, 3, hog);
    REQUIRE(init.shapes.size() == 3);
    for (const auto& s : init.shapes) {
      CHECK(s.rows == init.shapes[0].rows);
      CHECK(s.cols == init.shapes[0].cols);
    }
  }
  SUBCASE("three aspect clusters fall into three groups") {
    std::vector<BBox> boxes;
    for (int i = 0; i < 6; ++i) boxes.push_back(BBox(0, 0, 32, 64));   // aspect 0.5
    for (int i = 0; i < 6; ++i) boxes.push_back(BBox(0, 0, 48, 48));   // aspect 1.0
    for (int i = 0; i < 6; ++i) boxes.push_back(BBox(0, 0, 96, 48));   // aspect 2.0
    const ComponentInit init = init_components(boxes, 3, hog);
    CHECK(static_cast<Scalar>(init.shapes[0].cols) / init.shapes[0].rows ==
          doctest::Approx(0.5).epsilon(0.3));
    CHECK(static_cast<Scalar>(init.shapes[1].cols) / init.shapes[1].rows ==
          doctest::Approx(1.0).epsilon(0.3));
    CHECK(static_cast<Scalar>(init.shapes[2].cols) / init.shapes[2].rows ==
          doctest::Approx(2.0).epsilon(0.3));
    // group assignment follows sorted aspect order
    for (int i = 0; i < 6; ++i) CHECK(init.assignment[i] == 0);
    for (int i = 12; i < 18; ++i) CHECK(init.assignment[i] == 2);
  }
  SUBCASE("too few positives") {
    std::vector<BBox> boxes(2, BBox(0, 0, 64, 32));
    CHECK_THROWS_AS(init_components(boxes, 3, hog), DataTooSmall);
  }
}

TEST_CASE("init_parts placement") {
  const int dim = 4;
  SUBCASE("uniform energy tiles row-major") {
    MatrixRM root = MatrixRM::Ones(6, 6 * dim);  // doubled: 12x12
    bool reduced = false;
    const auto parts = init_parts(root, 6, dim, 4, &reduced);
    REQUIRE(parts.size() == 4);
    CHECK_FALSE(reduced);
    CHECK(parts[0].anchor_y == 0);
    CHECK(parts[0].anchor_x == 0);
    CHECK(parts[1].anchor_y == 0);
    CHECK(parts[1].anchor_x == 6);
    CHECK(parts[2].anchor_y == 6);
    CHECK(parts[2].anchor_x == 0);
    CHECK(parts[3].anchor_y == 6);
    CHECK(parts[3].anchor_x == 6);
  }
  SUBCASE("eight parts do not fit a 12x12 doubled root: reduce with warning") {
    MatrixRM root = MatrixRM::Ones(6, 6 * dim);
    bool reduced = false;
    const auto parts = init_parts(root, 6, dim, 8, &reduced);
    CHECK(parts.size() == 4);
    CHECK(reduced);
  }
  SUBCASE("high-energy corner is covered first") {
    MatrixRM root = MatrixRM::Zero(6, 6 * dim);
    root(5, 5 * dim + 0) = 10.0;  // bottom-right corner cell
    bool reduced = false;
    const auto parts = init_parts(root, 6, dim, 1, &reduced);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].anchor_y == 6);
    CHECK(parts[0].anchor_x == 6);
  }
  SUBCASE("negative weights carry no energy") {
    MatrixRM root = MatrixRM::Constant(6, 6 * dim, -3.0);
    root(0, 0) = 1.0;
    const auto parts = init_parts(root, 6, dim, 1, nullptr);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].anchor_y == 0);
    CHECK(parts[0].anchor_x == 0);
  }
}

namespace {

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.components = 2;
  cfg.parts_per_component = 2;
  cfg.relabel_rounds = 2;
  cfg.sgd.epochs = 4;
  cfg.neg_cache = 300;
  cfg.root_negatives_per_image = 4;
  cfg.hog.interval = 3;
  cfg.seed = 5;
  return cfg;
}

DomainSpec tiny_domain() {
  DomainSpec spec = default_shift_pair().first;
  spec.height_min = 30;
  spec.height_max = 50;
  spec.max_objects = 2;
  spec.seed = 99;
  return spec;
}

}  // namespace

TEST_CASE("placement_phi reproduces the recorded score" * doctest::timeout(120)) {
  const std::string dir = testutil::scratch_dir("phi");
  const Dataset data = generate(tiny_domain(), 6, 160, 96, dir);
  TrainConfig cfg = tiny_train_config();

  DpmModel model = train(data, cfg);
  REQUIRE(model.components.size() == 2);

  const auto [w, part] = vectorize(model);
  const auto assignments = latent_relabel(model, data, cfg);
  int checked = 0;
  for (const auto& la : assignments) {
    if (!la.placed) continue;
    HingeSample s;
    s.offset = component_block_offset(model, la.component);
    s.phi = la.phi;
    CHECK(dot_block(w, s) == doctest::Approx(la.score).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("training pipeline on synthetic data" * doctest::timeout(300)) {
  const std::string dir = testutil::scratch_dir("train");
  const Dataset data = generate(tiny_domain(), 10, 160, 96, dir);
  TrainConfig cfg = tiny_train_config();

  std::vector<TrainLogRow> log;
  const DpmModel model = train(data, cfg, &log);
  CHECK_FALSE(log.empty());

  SUBCASE("determinism: same config and data give identical model bytes") {
    const DpmModel again = train(data, cfg);
    const std::string p1 = dir + "/m1.vdpm", p2 = dir + "/m2.vdpm";
    save_model(model, p1);
    save_model(again, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
  }

  SUBCASE("mined negatives never overlap annotations at 0.3") {
    // contract is enforced inside mining; spot-check detections against labels
    const auto negs = mine_hard_negatives(model, data, cfg);
    CHECK(static_cast<int>(negs.size()) <= cfg.neg_cache);
    for (const auto& s : negs) CHECK(s.y == -1.0);
  }

  SUBCASE("relabeling with a better-trained model never scores below an older assignment") {
    TrainConfig cfg1 = cfg;
    cfg1.relabel_rounds = 1;
    const DpmModel early = train(data, cfg1);
    const auto a_early = latent_relabel(early, data, cfg);
    const auto a_late = latent_relabel(model, data, cfg);
    const auto [w_late, part_late] = vectorize(model);
    REQUIRE(a_early.size() == a_late.size());
    for (std::size_t i = 0; i < a_early.size(); ++i) {
      if (!a_early[i].placed || !a_late[i].placed) continue;
      // the relabeled score under the late model dominates the early
      // assignment's feature vector scored by the same late model
      HingeSample s;
      s.offset = component_block_offset(model, a_early[i].component);
      s.phi = a_early[i].phi;  // features are model-independent given placements
      // placements were chosen under `early`, so re-extract against `model`
      // geometry only if component shapes agree (they do: same config/seed path)
      CHECK(a_late[i].score >= dot_block(w_late, s) - 1e-9);
    }
  }
}

TEST_CASE("objective is monotone across relabel rounds with frozen negatives" *
          doctest::timeout(300)) {
  const std::string dir = testutil::scratch_dir("mono");
  const Dataset data = generate(tiny_domain(), 8, 160, 96, dir);
  TrainConfig cfg = tiny_train_config();
  cfg.relabel_rounds = 1;
  DpmModel model = train(data, cfg);

  const auto frozen_negs = mine_hard_negatives(model, data, cfg);
  auto [w, part] = vectorize(model);
  const std::vector<LowerBound> bounds = deformation_bounds(model, cfg.deform_quad_floor);

  Scalar prev = std::numeric_limits<Scalar>::infinity();
  Rng rng(17);
  for (int round = 0; round < 3; ++round) {
    // relabel with the current model
    const DpmModel cur = devectorize(w, model);
    std::vector<HingeSample> samples;
    for (const auto& la : latent_relabel(cur, data, cfg)) {
      if (!la.placed) continue;
      HingeSample s;
      s.offset = component_block_offset(cur, la.component);
      s.phi = la.phi;
      s.y = 1;
      samples.push_back(std::move(s));
    }
    for (const auto& n : frozen_negs) samples.push_back(n);

    const Scalar after_relabel = hinge_objective(w, nullptr, samples, cfg.C);
    CHECK(after_relabel <= prev + 1e-9);

    w = ssvm_sgd(w, nullptr, samples, cfg.C, cfg.sgd, rng.fork(round), bounds);
    const Scalar after_sgd = hinge_objective(w, nullptr, samples, cfg.C);
    CHECK(after_sgd <= after_relabel + 1e-9);
    prev = after_sgd;
  }
}

TEST_CASE("train log csv") {
  const std::string path = testutil::scratch_dir("trainlog") + "/log.csv";
  write_train_log(path, {{1, 1, 0.5, 10, 0.25}, {1, 2, 0.375, 10, 0.2}});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "round,epoch,objective,n_neg,train_error");
  std::getline(in, line);
  CHECK(line == "1,1,0.5,10,0.25");
}
