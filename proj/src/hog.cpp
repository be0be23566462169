#include "vdpm/hog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "vdpm/errors.hpp"

namespace vdpm {

namespace {

constexpr Scalar kTwoPi = 6.283185307179586476925287;
constexpr Scalar kTruncation = 0.2;
constexpr Scalar kTextureScale = 0.2357;  // 1/sqrt(18)
constexpr Scalar kNormEps = 1e-10;

}  // namespace

FeatureLevel compute_cells(const Image& img, const HogConfig& cfg) {
  const int cs = cfg.cell_size;
  const int rows = static_cast<int>(img.rows());
  const int cols = static_cast<int>(img.cols());
  if (rows < 2 * cs || cols < 2 * cs)
    throw ImageTooSmall("image " + std::to_string(cols) + "x" + std::to_string(rows) +
                        " smaller than 2 cells");

  const int cy = rows / cs;
  const int cx = cols / cs;
  constexpr int kSigned = HogConfig::kSignedBins;
  constexpr int kUnsigned = HogConfig::kUnsignedBins;
  constexpr int kDim = HogConfig::kFeatureDim;

  // Orientation votes, bilinear in space and linear across adjacent bins.
  MatrixRM hist = MatrixRM::Zero(cy, cx * kSigned);
  const Scalar bin_scale = kSigned / kTwoPi;
  for (int y = 1; y < rows - 1; ++y) {
    for (int x = 1; x < cols - 1; ++x) {
      const Scalar gx = img(y, x + 1) - img(y, x - 1);
      const Scalar gy = img(y + 1, x) - img(y - 1, x);
      const Scalar mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0) continue;
      Scalar a = std::atan2(gy, gx);
      if (a < 0) a += kTwoPi;
      Scalar ob = a * bin_scale;
      if (ob >= kSigned) ob -= kSigned;
      int o0 = static_cast<int>(ob);
      if (o0 >= kSigned) o0 = kSigned - 1;
      const Scalar of = ob - o0;
      const int o1 = (o0 + 1) % kSigned;

      const Scalar px = (x + Scalar(0.5)) / cs - Scalar(0.5);
      const Scalar py = (y + Scalar(0.5)) / cs - Scalar(0.5);
      const int ix0 = static_cast<int>(std::floor(px));
      const int iy0 = static_cast<int>(std::floor(py));
      const Scalar vx = px - ix0;
      const Scalar vy = py - iy0;

      for (int dy = 0; dy < 2; ++dy) {
        const int ccy = iy0 + dy;
        if (ccy < 0 || ccy >= cy) continue;
        const Scalar wy = dy ? vy : 1 - vy;
        for (int dx = 0; dx < 2; ++dx) {
          const int ccx = ix0 + dx;
          if (ccx < 0 || ccx >= cx) continue;
          const Scalar w = mag * wy * (dx ? vx : 1 - vx);
          hist(ccy, ccx * kSigned + o0) += w * (1 - of);
          hist(ccy, ccx * kSigned + o1) += w * of;
        }
      }
    }
  }

  // Unsigned-orientation cell energies for block normalization.
  MatrixRM energy = MatrixRM::Zero(cy, cx);
  for (int y = 0; y < cy; ++y)
    for (int x = 0; x < cx; ++x) {
      Scalar e = 0;
      for (int b = 0; b < kUnsigned; ++b) {
        const Scalar u = hist(y, x * kSigned + b) + hist(y, x * kSigned + b + kUnsigned);
        e += u * u;
      }
      energy(y, x) = e;
    }

  FeatureLevel out;
  out.cols = cx;
  out.dim = kDim;
  out.cells = MatrixRM::Zero(cy, cx * kDim);

  const auto E = [&](int y, int x) {
    y = std::clamp(y, 0, cy - 1);
    x = std::clamp(x, 0, cx - 1);
    return energy(y, x);
  };

  for (int y = 0; y < cy; ++y) {
    for (int x = 0; x < cx; ++x) {
      // Normalizer order: (-1,-1), (-1,+1), (+1,-1), (+1,+1).
      Scalar inv_norm[HogConfig::kNormalizers];
      int n = 0;
      for (const int dy : {-1, +1})
        for (const int dx : {-1, +1}) {
          const Scalar s = E(y, x) + E(y + dy, x) + E(y, x + dx) + E(y + dy, x + dx);
          inv_norm[n++] = Scalar(1) / std::sqrt(s + kNormEps);
        }

      Scalar texture[HogConfig::kNormalizers] = {0, 0, 0, 0};
      Scalar* cell = out.cells.row(y).data() + x * kDim;
      for (int b = 0; b < kSigned; ++b) {
        const Scalar s = hist(y, x * kSigned + b);
        Scalar acc = 0;
        for (int i = 0; i < HogConfig::kNormalizers; ++i) {
          const Scalar h = std::min(s * inv_norm[i], kTruncation);
          acc += h;
          texture[i] += h;
        }
        cell[b] = Scalar(0.5) * acc;
      }
      for (int b = 0; b < kUnsigned; ++b) {
        const Scalar u = hist(y, x * kSigned + b) + hist(y, x * kSigned + b + kUnsigned);
        Scalar acc = 0;
        for (int i = 0; i < HogConfig::kNormalizers; ++i) acc += std::min(u * inv_norm[i], kTruncation);
        cell[kSigned + b] = Scalar(0.5) * acc;
      }
      for (int i = 0; i < HogConfig::kNormalizers; ++i)
        cell[kSigned + kUnsigned + i] = kTextureScale * texture[i];
    }
  }
  return out;
}

FeatureLevel compute_pyramid_level(const Image& img, const HogConfig& cfg, int level) {
  const Scalar scale = Scalar(2) * std::pow(Scalar(2), -Scalar(level) / cfg.interval);
  const int rows = static_cast<int>(std::lround(img.rows() * scale));
  const int cols = static_cast<int>(std::lround(img.cols() * scale));
  FeatureLevel out = compute_cells(resize_bilinear(img, rows, cols), cfg);
  out.scale = scale;
  return out;
}

HogPyramid build_pyramid(const Image& img, const HogConfig& cfg, int min_root_rows,
                         int min_root_cols) {
  HogPyramid pyr;
  pyr.interval = cfg.interval;
  for (int l = 0; l <= 200; ++l) {
    const Scalar scale = Scalar(2) * std::pow(Scalar(2), -Scalar(l) / cfg.interval);
    const int rows = static_cast<int>(std::lround(img.rows() * scale));
    const int cols = static_cast<int>(std::lround(img.cols() * scale));
    if (rows < 2 * cfg.cell_size || cols < 2 * cfg.cell_size) break;
    if (rows / cfg.cell_size < min_root_rows || cols / cfg.cell_size < min_root_cols) break;
    pyr.levels.push_back(compute_pyramid_level(img, cfg, l));
  }
  return pyr;
}

std::array<int, HogConfig::kFeatureDim> flip_channel_permutation() {
  std::array<int, HogConfig::kFeatureDim> p{};
  constexpr int kS = HogConfig::kSignedBins;
  constexpr int kU = HogConfig::kUnsignedBins;
  for (int b = 0; b < kS; ++b) p[b] = (kU - b + kS) % kS;
  for (int b = 0; b < kU; ++b) p[kS + b] = kS + (kU - b) % kU;
  // normalizer blocks swap left/right: (dy,-1) <-> (dy,+1)
  p[kS + kU + 0] = kS + kU + 1;
  p[kS + kU + 1] = kS + kU + 0;
  p[kS + kU + 2] = kS + kU + 3;
  p[kS + kU + 3] = kS + kU + 2;
  return p;
}

MatrixRM flip_filter(const MatrixRM& w, int wcols, int dim) {
  const auto p = flip_channel_permutation();
  MatrixRM out(w.rows(), w.cols());
  for (int y = 0; y < w.rows(); ++y)
    for (int x = 0; x < wcols; ++x)
      for (int k = 0; k < dim; ++k) out(y, x * dim + k) = w(y, (wcols - 1 - x) * dim + p[k]);
  return out;
}

void dump_level(const FeatureLevel& level, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature dump: " + path);
  const std::int32_t hdr[3] = {static_cast<std::int32_t>(level.rows()),
                               static_cast<std::int32_t>(level.cols),
                               static_cast<std::int32_t>(level.dim)};
  out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  for (int y = 0; y < level.rows(); ++y)
    for (int i = 0; i < level.cells.cols(); ++i) {
      const float v = static_cast<float>(level.cells(y, i));
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

}  // namespace vdpm
