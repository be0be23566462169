#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vdpm/hog.hpp"
#include "vdpm/types.hpp"

namespace vdpm {

// One part: 6x6-cell appearance filter, anchor in part-level cells relative
// to the doubled root position, and a convex quadratic deformation cost
// d = (d_dx, d_dy, d_dx2, d_dy2) applied to |dx|,|dy|,dx^2,dy^2.
struct PartSpec {
  MatrixRM filter;  // rows x (cols*dim), cell-major
  int cols = 0;
  int anchor_x = 0;
  int anchor_y = 0;
  Eigen::Vector4d deform{0, 0, 0.1, 0.1};

  int rows() const { return static_cast<int>(filter.rows()); }
};

struct Component {
  MatrixRM root;  // rows x (cols*dim)
  int root_cols = 0;
  Scalar bias = 0;
  std::vector<PartSpec> parts;

  int root_rows() const { return static_cast<int>(root.rows()); }
};

struct DpmModel {
  std::vector<Component> components;
  HogConfig hog;
  int feature_dim = HogConfig::kFeatureDim;
  Scalar threshold = 0;  // detect() operating point

  int min_root_rows() const;
  int min_root_cols() const;
};

enum class BlockKind { RootAppearance, PartAppearanceDeformation };

struct Block {
  int offset = 0;
  int size = 0;
  BlockKind kind = BlockKind::RootAppearance;
  int component = 0;
  int part = -1;  // -1 for root blocks
};

// Disjoint blocks covering [0, total_size): per component the root filter
// plus bias, then per part its filter plus the 4 deformation weights.
struct StructurePartition {
  std::vector<Block> blocks;
  int total_size = 0;

  int num_blocks() const { return static_cast<int>(blocks.size()); }
};

StructurePartition partition_of(const DpmModel& m);
std::pair<VectorX, StructurePartition> vectorize(const DpmModel& m);
DpmModel devectorize(const VectorX& w, const StructurePartition& partition, const DpmModel& templ);
DpmModel devectorize(const VectorX& w, const DpmModel& templ);

// Versioned binary container; see docs/model-format.md.
void save_model(const DpmModel& m, const std::string& path);
DpmModel load_model(const std::string& path);

DpmModel flip_model(const DpmModel& m);

// Indices of deformation weights in the flat vector together with their
// lower bounds (quadratic terms >= floor, linear terms >= 0).
struct LowerBound {
  int index;
  Scalar bound;
};
std::vector<LowerBound> deformation_bounds(const DpmModel& m, Scalar quad_floor = 0.01);

}  // namespace vdpm
