#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdpm/dataset.hpp"
#include "vdpm/inference.hpp"
#include "vdpm/model.hpp"
#include "vdpm/rng.hpp"

namespace vdpm {

struct SgdConfig {
  int epochs = 10;
  double eta0 = 1e-2;
  double t0_factor = 10.0;  // t0 = t0_factor * N in the schedule eta0/(1+t/t0)
  bool return_best = true;  // keep the best-objective epoch iterate
};

struct TrainConfig {
  int components = 3;
  int parts_per_component = 8;
  double C = 0.001;
  SgdConfig sgd;
  int relabel_rounds = 3;
  int neg_cache = 20000;
  int mine_per_image_cap = 200;  // per-image candidate cap after NMS
  double mine_threshold = -1.0;
  double mine_max_overlap = 0.3;
  double latent_overlap = 0.7;
  double calib_fraction = 0.2;  // held-out slice for threshold calibration
  double calib_fppi = 1.0;
  int root_negatives_per_image = 10;
  bool augment_flip_pretrain = true;
  double deform_quad_floor = 0.01;
  std::uint64_t seed = 0;
  int threads = 1;
  HogConfig hog;
  ClassConfig classes;
  ModerateConfig moderate;
};

// One binary hinge sample. phi is dense within the component block starting
// at `offset` in the flat model vector; everything outside the block is zero.
struct HingeSample {
  int offset = 0;
  VectorX phi;
  Scalar y = 1;
  int component = 0;
};

Scalar dot_block(const VectorX& w, const HingeSample& s);

// J(w) = 0.5*||w - prior||^2 + C * sum_i max(0, 1 - y_i * w.phi_i);
// prior == nullptr means prior 0.
Scalar hinge_objective(const VectorX& w, const VectorX* prior,
                       const std::vector<HingeSample>& samples, Scalar C);
VectorX hinge_subgradient(const VectorX& w, const VectorX* prior,
                          const std::vector<HingeSample>& samples, Scalar C);

struct TrainLogRow {
  int round = 0;
  int epoch = 0;
  Scalar objective = 0;
  int n_neg = 0;
  Scalar train_error = 0;
};

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);

// Stochastic subgradient on J above. Lower bounds (deformation convexity)
// are re-imposed after every step. Deterministic given rng.
VectorX ssvm_sgd(const VectorX& w0, const VectorX* prior, const std::vector<HingeSample>& samples,
                 Scalar C, const SgdConfig& cfg, Rng rng,
                 const std::vector<LowerBound>& bounds = {},
                 std::vector<TrainLogRow>* log = nullptr, int log_round = 0, int log_n_neg = 0);

struct RootShape {
  int rows = 0;
  int cols = 0;
};

struct ComponentInit {
  std::vector<RootShape> shapes;
  std::vector<int> assignment;  // positive index -> component
};

// Aspect-ratio split into equal-count groups; per group the root is the
// median aspect ratio at roughly the 20th-percentile box area, min 3x3 cells.
ComponentInit init_components(const std::vector<BBox>& positives, int n_components,
                              const HogConfig& hog);

// Greedy non-overlapping 6x6 windows on the 2x-upsampled root, by positive
// energy sum(max(w,0)^2), row-major tie break. May return fewer than
// requested; *reduced reports that.
std::vector<PartSpec> init_parts(const MatrixRM& root, int root_cols, int dim, int n_parts,
                                 bool* reduced = nullptr);

struct LatentAssignment {
  int entry = -1;
  int ann = -1;
  int component = -1;
  int level = -1;
  int y = 0;
  int x = 0;
  Scalar score = 0;
  bool placed = false;
  VectorX phi;
};

// Best-scoring placement per moderate positive among root placements with
// IoU >= latent_overlap; unplaceable positives come back placed=false.
std::vector<LatentAssignment> latent_relabel(const DpmModel& m, const Dataset& data,
                                             const TrainConfig& cfg);

// detect at mine_threshold, keep hits under mine_max_overlap IoU with every
// annotation, sort by (score desc, image, position), truncate to neg_cache.
std::vector<HingeSample> mine_hard_negatives(const DpmModel& m, const Dataset& data,
                                             const TrainConfig& cfg);

// Feature vector of a root placement: root cells, bias 1, per part its cells
// at the recorded placement and (-|dx|,-|dy|,-dx^2,-dy^2). Satisfies
// dot_block(w, sample) == score_component value at (y,x).
VectorX placement_phi(const DpmModel& m, int component, const FeatureLevel& root_feats,
                      const FeatureLevel& part_feats, int y, int x,
                      const std::vector<PartPlacement>& parts);

int component_block_offset(const DpmModel& m, int component);

Scalar calibrate_threshold(const DpmModel& m, const Dataset& slice, const TrainConfig& cfg);

// Full pipeline: component init by aspect, per-component root SVM on warped
// positives, part init, then relabel/mine/solve rounds. Threshold calibrated
// to FPPI = calib_fppi on the held-out slice.
DpmModel train(const Dataset& data, const TrainConfig& cfg,
               std::vector<TrainLogRow>* log = nullptr);

}  // namespace vdpm
