#pragma once

#include <string>

#include "vdpm/geometry.hpp"
#include "vdpm/types.hpp"

namespace vdpm {

// Reads binary PGM (P5) or PPM (P6); color is converted to luma
// 0.299R + 0.587G + 0.114B.
Image load_image(const std::string& path);

// 8-bit binary PGM; values rounded and clamped to [0,255].
void save_pgm(const Image& img, const std::string& path);

Image resize_bilinear(const Image& img, int rows, int cols);

// Separable Gaussian, kernel radius ceil(3*sigma). sigma <= 0 is identity.
Image gaussian_blur(const Image& img, Scalar sigma);

Image flip_horizontal(const Image& img);

// Bilinear resample of a source region (clamped at borders) to a fixed size.
Image warp_crop(const Image& img, const BBox& box, int rows, int cols);

}  // namespace vdpm
