#pragma once

#include <filesystem>
#include <string>

#include "vdpm/hog.hpp"
#include "vdpm/model.hpp"
#include "vdpm/rng.hpp"
#include "vdpm/synth.hpp"

namespace testutil {

using vdpm::MatrixRM;
using vdpm::Rng;
using vdpm::Scalar;

inline MatrixRM random_matrix(Rng& rng, int rows, int cols, Scalar scale = 1.0) {
  MatrixRM m(rows, cols);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) m(y, x) = scale * (2 * rng.uniform() - 1);
  return m;
}

inline vdpm::FeatureLevel random_level(Rng& rng, int rows, int cols, int dim, Scalar scale = 1.0) {
  vdpm::FeatureLevel lvl;
  lvl.cells = random_matrix(rng, rows, cols * dim, scale);
  lvl.cols = cols;
  lvl.dim = dim;
  lvl.scale = 1.0;
  return lvl;
}

// Small random model; dim can be tiny to keep oracles fast.
inline vdpm::DpmModel random_model(Rng& rng, int components, int parts, int dim, int root_rows = 3,
                                   int root_cols = 4) {
  vdpm::DpmModel m;
  m.feature_dim = dim;
  m.hog.cell_size = 8;
  m.hog.interval = 1;
  for (int c = 0; c < components; ++c) {
    vdpm::Component comp;
    comp.root_cols = root_cols;
    comp.root = random_matrix(rng, root_rows, root_cols * dim);
    comp.bias = 2 * rng.uniform() - 1;
    for (int p = 0; p < parts; ++p) {
      vdpm::PartSpec part;
      part.cols = 2;
      part.filter = random_matrix(rng, 2, 2 * dim);
      part.anchor_x = rng.below_int(2 * root_cols - 2);
      part.anchor_y = rng.below_int(2 * root_rows - 2);
      part.deform << 0.05 * rng.uniform(), 0.05 * rng.uniform(), 0.05 + rng.uniform(),
          0.05 + rng.uniform();
      comp.parts.push_back(std::move(part));
    }
    m.components.push_back(std::move(comp));
  }
  return m;
}

// Unique scratch directory under the build tree.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vdpm-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testutil
