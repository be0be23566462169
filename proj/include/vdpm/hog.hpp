#pragma once

#include <array>
#include <string>
#include <vector>

#include "vdpm/image.hpp"
#include "vdpm/types.hpp"

namespace vdpm {

// 31-channel HOG-style cell descriptor: 18 contrast-sensitive orientation
// channels, 9 contrast-insensitive ones, and 4 block-normalization energies.
struct HogConfig {
  int cell_size = 8;
  int interval = 10;  // pyramid levels per octave

  static constexpr int kSignedBins = 18;
  static constexpr int kUnsignedBins = 9;
  static constexpr int kNormalizers = 4;
  static constexpr int kFeatureDim = kSignedBins + kUnsignedBins + kNormalizers;  // 31
};

// Cell grid stored cell-major: row y is cells.row(y) and cell (y,x) occupies
// columns [x*dim, (x+1)*dim). A filter row then correlates against one
// contiguous span.
struct FeatureLevel {
  MatrixRM cells;
  int cols = 0;
  int dim = 0;
  Scalar scale = 1;  // image-to-level resize factor

  int rows() const { return static_cast<int>(cells.rows()); }
  Scalar at(int y, int x, int k) const { return cells(y, x * dim + k); }
};

// Levels ordered fine to coarse; scale(l) = 2*2^(-l/interval). Level 0 is the
// 2x upsampled octave; roots are scored at levels >= interval with parts one
// octave finer (level - interval).
struct HogPyramid {
  std::vector<FeatureLevel> levels;
  int interval = 10;

  int num_levels() const { return static_cast<int>(levels.size()); }
};

FeatureLevel compute_cells(const Image& img, const HogConfig& cfg);

// Level l of the pyramid on its own (resize + compute_cells); identical to
// build_pyramid's level l.
FeatureLevel compute_pyramid_level(const Image& img, const HogConfig& cfg, int level);

HogPyramid build_pyramid(const Image& img, const HogConfig& cfg, int min_root_rows = 3,
                         int min_root_cols = 3);

// Self-inverse channel permutation p with
//   features(flip(img)) at cell (y, cols-1-x, c) == features(img) at (y, x, p[c]).
std::array<int, HogConfig::kFeatureDim> flip_channel_permutation();

// Mirrors a cell-major filter (rows x wcols*dim) under the permutation above.
MatrixRM flip_filter(const MatrixRM& w, int wcols, int dim);

// Debug dump: rows, cols, dim as little-endian int32, then row-major float32.
void dump_level(const FeatureLevel& level, const std::string& path);

}  // namespace vdpm
