#include "vdpm/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <vector>

#include "vdpm/errors.hpp"

namespace vdpm {

namespace {

// Skips whitespace and '#' comments in PNM headers.
int next_pnm_int(std::istream& in) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) throw FormatError("bad PNM header");
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  return v;
}

}  // namespace

Image load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw FormatError("unsupported image format (need P5/P6 PNM): " + path);
  const bool color = magic[1] == '6';
  const int cols = next_pnm_int(in);
  const int rows = next_pnm_int(in);
  const int maxval = next_pnm_int(in);
  if (rows <= 0 || cols <= 0 || maxval <= 0 || maxval > 255)
    throw FormatError("bad PNM dimensions: " + path);

  const std::size_t n = static_cast<std::size_t>(rows) * cols * (color ? 3 : 1);
  std::vector<unsigned char> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("truncated image: " + path);

  Image img(rows, cols);
  if (color) {
    for (int y = 0; y < rows; ++y)
      for (int x = 0; x < cols; ++x) {
        const std::size_t o = 3 * (static_cast<std::size_t>(y) * cols + x);
        img(y, x) = 0.299 * buf[o] + 0.587 * buf[o + 1] + 0.114 * buf[o + 2];
      }
  } else {
    for (int y = 0; y < rows; ++y)
      for (int x = 0; x < cols; ++x) img(y, x) = buf[static_cast<std::size_t>(y) * cols + x];
  }
  return img;
}

void save_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(img.rows()) * img.cols());
  for (int y = 0; y < img.rows(); ++y)
    for (int x = 0; x < img.cols(); ++x) {
      const Scalar v = std::round(img(y, x));
      buf[static_cast<std::size_t>(y) * img.cols() + x] =
          static_cast<unsigned char>(std::clamp<Scalar>(v, 0, 255));
    }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("short write: " + path);
}

Image resize_bilinear(const Image& img, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw DataError("resize to empty image");
  if (rows == img.rows() && cols == img.cols()) return img;
  Image out(rows, cols);
  const Scalar sy = static_cast<Scalar>(img.rows()) / rows;
  const Scalar sx = static_cast<Scalar>(img.cols()) / cols;
  for (int y = 0; y < rows; ++y) {
    Scalar fy = (y + Scalar(0.5)) * sy - Scalar(0.5);
    fy = std::clamp<Scalar>(fy, 0, img.rows() - 1);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min<int>(y0 + 1, img.rows() - 1);
    const Scalar wy = fy - y0;
    for (int x = 0; x < cols; ++x) {
      Scalar fx = (x + Scalar(0.5)) * sx - Scalar(0.5);
      fx = std::clamp<Scalar>(fx, 0, img.cols() - 1);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min<int>(x0 + 1, img.cols() - 1);
      const Scalar wx = fx - x0;
      out(y, x) = (1 - wy) * ((1 - wx) * img(y0, x0) + wx * img(y0, x1)) +
                  wy * ((1 - wx) * img(y1, x0) + wx * img(y1, x1));
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, Scalar sigma) {
  if (sigma <= 0) return img;
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<Scalar> k(2 * radius + 1);
  Scalar sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-Scalar(i) * i / (2 * sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;

  const int rows = static_cast<int>(img.rows()), cols = static_cast<int>(img.cols());
  Image tmp(rows, cols), out(rows, cols);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      Scalar acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, cols - 1);
        acc += k[i + radius] * img(y, xx);
      }
      tmp(y, x) = acc;
    }
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      Scalar acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, rows - 1);
        acc += k[i + radius] * tmp(yy, x);
      }
      out(y, x) = acc;
    }
  return out;
}

Image flip_horizontal(const Image& img) {
  return img.rowwise().reverse();
}

Image warp_crop(const Image& img, const BBox& box, int rows, int cols) {
  Image out(rows, cols);
  const Scalar sy = box.height() / rows;
  const Scalar sx = box.width() / cols;
  for (int y = 0; y < rows; ++y) {
    Scalar fy = box.top + (y + Scalar(0.5)) * sy - Scalar(0.5);
    fy = std::clamp<Scalar>(fy, 0, img.rows() - 1);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min<int>(y0 + 1, img.rows() - 1);
    const Scalar wy = fy - y0;
    for (int x = 0; x < cols; ++x) {
      Scalar fx = box.left + (x + Scalar(0.5)) * sx - Scalar(0.5);
      fx = std::clamp<Scalar>(fx, 0, img.cols() - 1);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min<int>(x0 + 1, img.cols() - 1);
      const Scalar wx = fx - x0;
      out(y, x) = (1 - wy) * ((1 - wx) * img(y0, x0) + wx * img(y0, x1)) +
                  wy * ((1 - wx) * img(y1, x0) + wx * img(y1, x1));
    }
  }
  return out;
}

}  // namespace vdpm
