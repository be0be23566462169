#include "vdpm/inference.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vdpm {

ScoreMap correlate(const MatrixRM& filter, int filter_cols, const FeatureLevel& level) {
  ScoreMap out;
  const int fh = static_cast<int>(filter.rows());
  const int fw = filter_cols;
  const int oh = level.rows() - fh + 1;
  const int ow = level.cols - fw + 1;
  if (oh <= 0 || ow <= 0) return out;

  const int dim = level.dim;
  const int span = fw * dim;
  out.values = MatrixRM::Zero(oh, ow);
  for (int y = 0; y < oh; ++y) {
    Scalar* orow = out.values.row(y).data();
    for (int i = 0; i < fh; ++i) {
      const Scalar* frow = filter.row(i).data();
      const Scalar* lrow = level.cells.row(y + i).data();
      for (int x = 0; x < ow; ++x) {
        orow[x] += Eigen::Map<const VectorX>(frow, span)
                       .dot(Eigen::Map<const VectorX>(lrow + x * dim, span));
      }
    }
  }
  return out;
}

GdtResult gdt(const ScoreMap& scores, const Eigen::Vector4d& d) {
  const Scalar dx = d(0), dy = d(1), dx2 = d(2), dy2 = d(3);
  if (!(dx >= 0) || !(dy >= 0) || !(dx2 > 0) || !(dy2 > 0))
    throw DeformationError("non-convex deformation cost");

  GdtResult res;
  const int rows = scores.rows();
  const int cols = scores.cols();
  res.transformed.level = scores.level;
  res.transformed.values.resize(rows, cols);
  res.arg_y.resize(rows, cols);
  res.arg_x.resize(rows, cols);
  if (rows == 0 || cols == 0) return res;

  const int n = std::max(rows, cols);
  std::vector<Scalar> buf_in(n), buf_out(n), z(n + 1);
  std::vector<int> arg(n), v(n);

  // rows first: max over x'
  MatrixRM row_pass(rows, cols);
  IntGrid row_arg(rows, cols);
  for (int y = 0; y < rows; ++y) {
    dt1d<Scalar>(scores.values.row(y).data(), cols, dx, dx2, buf_out.data(), arg.data(), z.data(),
                 v.data());
    for (int x = 0; x < cols; ++x) {
      row_pass(y, x) = buf_out[x];
      row_arg(y, x) = arg[x];
    }
  }
  // then columns: max over y'
  for (int x = 0; x < cols; ++x) {
    for (int y = 0; y < rows; ++y) buf_in[y] = row_pass(y, x);
    dt1d<Scalar>(buf_in.data(), rows, dy, dy2, buf_out.data(), arg.data(), z.data(), v.data());
    for (int y = 0; y < rows; ++y) {
      res.transformed.values(y, x) = buf_out[y];
      const int ybest = arg[y];
      res.arg_y(y, x) = ybest;
      res.arg_x(y, x) = row_arg(ybest, x);
    }
  }
  return res;
}

namespace {

ComponentScore score_component_impl(const Component& c, const HogPyramid& pyr, int root_level,
                                    bool keep_parts) {
  if (root_level < pyr.interval || root_level >= pyr.num_levels())
    throw DataError("root level " + std::to_string(root_level) + " out of range");

  ComponentScore out;
  out.part_level = root_level - pyr.interval;
  const FeatureLevel& root_feats = pyr.levels[root_level];
  out.score = correlate(c.root, c.root_cols, root_feats);
  out.score.level = root_level;
  if (out.score.empty()) return out;
  out.score.values.array() += c.bias;

  if (c.parts.empty()) return out;
  const FeatureLevel& part_feats = pyr.levels[out.part_level];
  for (const PartSpec& p : c.parts) {
    PartScore ps;
    ScoreMap corr = correlate(p.filter, p.cols, part_feats);
    ps.corr_rows = corr.rows();
    ps.corr_cols = corr.cols();
    if (!corr.empty()) {
      corr.level = out.part_level;
      ps.dt = gdt(corr, p.deform);
    }
    for (int y = 0; y < out.score.rows(); ++y) {
      for (int x = 0; x < out.score.cols(); ++x) {
        const int py = 2 * y + p.anchor_y;
        const int px = 2 * x + p.anchor_x;
        if (py >= 0 && py < ps.corr_rows && px >= 0 && px < ps.corr_cols)
          out.score.values(y, x) += ps.dt.transformed.values(py, px);
        else
          out.score.values(y, x) += kNegInfScore;
      }
    }
    if (keep_parts) out.parts.push_back(std::move(ps));
  }
  return out;
}

}  // namespace

ScoreMap score_component(const Component& c, const HogPyramid& pyr, int root_level) {
  return score_component_impl(c, pyr, root_level, false).score;
}

ComponentScore score_component_full(const Component& c, const HogPyramid& pyr, int root_level) {
  return score_component_impl(c, pyr, root_level, true);
}

PyramidScores score_pyramid(const DpmModel& m, const HogPyramid& pyr) {
  PyramidScores out;
  out.interval = pyr.interval;
  const int n_root_levels = std::max(0, pyr.num_levels() - pyr.interval);
  out.at.resize(n_root_levels);
  for (int l = 0; l < n_root_levels; ++l) {
    out.at[l].reserve(m.components.size());
    for (const Component& c : m.components)
      out.at[l].push_back(score_component_full(c, pyr, l + pyr.interval));
  }
  return out;
}

BBox root_box(const DpmModel& m, int component, Scalar level_scale, int y, int x) {
  const Component& c = m.components[component];
  const Scalar px_per_cell = m.hog.cell_size / level_scale;
  return BBox(x * px_per_cell, y * px_per_cell, (x + c.root_cols) * px_per_cell,
              (y + c.root_rows()) * px_per_cell);
}

std::vector<Detection> nms(std::vector<Detection> dets, Scalar overlap) {
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& d : dets) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (iou(d.bbox, k.bbox) >= overlap) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> collect_detections(const DpmModel& m, const HogPyramid& pyr,
                                          const PyramidScores& scores, Scalar threshold) {
  std::vector<Detection> dets;
  for (int rl = pyr.interval; rl < pyr.num_levels(); ++rl) {
    const Scalar scale = pyr.levels[rl].scale;
    for (std::size_t ci = 0; ci < m.components.size(); ++ci) {
      const ComponentScore& cs = scores.get(rl, static_cast<int>(ci));
      const Component& comp = m.components[ci];
      for (int y = 0; y < cs.score.rows(); ++y) {
        for (int x = 0; x < cs.score.cols(); ++x) {
          const Scalar s = cs.score.values(y, x);
          if (s < threshold || s <= kNegInfScore / 2) continue;
          Detection d;
          d.bbox = root_box(m, static_cast<int>(ci), scale, y, x);
          d.score = s;
          d.component = static_cast<int>(ci);
          d.level = rl;
          d.cell_y = y;
          d.cell_x = x;
          d.parts.reserve(comp.parts.size());
          for (std::size_t pi = 0; pi < comp.parts.size(); ++pi) {
            const PartScore& ps = cs.parts[pi];
            const int ay = 2 * y + comp.parts[pi].anchor_y;
            const int ax = 2 * x + comp.parts[pi].anchor_x;
            PartPlacement pl;
            pl.part = static_cast<int>(pi);
            if (ay >= 0 && ay < ps.corr_rows && ax >= 0 && ax < ps.corr_cols) {
              pl.y = ps.dt.arg_y(ay, ax);
              pl.x = ps.dt.arg_x(ay, ax);
            } else {
              pl.y = -1;
              pl.x = -1;
            }
            d.parts.push_back(pl);
          }
          dets.push_back(std::move(d));
        }
      }
    }
  }
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.level != b.level) return a.level < b.level;
    if (a.component != b.component) return a.component < b.component;
    if (a.bbox.top != b.bbox.top) return a.bbox.top < b.bbox.top;
    return a.bbox.left < b.bbox.left;
  });
  return dets;
}

std::vector<Detection> detect(const Image& img, const DpmModel& m, Scalar threshold,
                              Scalar nms_overlap) {
  const HogPyramid pyr = build_pyramid(img, m.hog, m.min_root_rows(), m.min_root_cols());
  if (pyr.num_levels() <= pyr.interval) return {};
  const PyramidScores scores = score_pyramid(m, pyr);
  return nms(collect_detections(m, pyr, scores, threshold), nms_overlap);
}

std::vector<Detection> detect(const Image& img, const DpmModel& m) {
  return detect(img, m, m.threshold);
}

namespace {

std::string fmt(Scalar v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_detections_csv(const std::string& path,
                          const std::vector<std::pair<std::string, Detection>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write detections: " + path);
  out << "image_id,left,top,right,bottom,score,component\n";
  for (const auto& [id, d] : rows) {
    out << id << ',' << fmt(d.bbox.left) << ',' << fmt(d.bbox.top) << ',' << fmt(d.bbox.right)
        << ',' << fmt(d.bbox.bottom) << ',' << fmt(d.score) << ',' << d.component << '\n';
  }
}

std::vector<std::pair<std::string, Detection>> read_detections_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open detections: " + path);
  std::vector<std::pair<std::string, Detection>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    std::istringstream ss(line);
    std::string tok;
    std::vector<std::string> f;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 7) throw ParseError("detection row needs 7 fields", line_no);
    Detection d;
    try {
      d.bbox = BBox(std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]));
      d.score = std::stod(f[5]);
      d.component = std::stoi(f[6]);
    } catch (const std::exception&) {
      throw ParseError("bad detection row", line_no);
    }
    rows.emplace_back(f[0], std::move(d));
  }
  return rows;
}

}  // namespace vdpm
