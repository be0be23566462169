#include "vdpm/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "vdpm/eval.hpp"
#include "vdpm/image.hpp"
#include "vdpm/parallel.hpp"

namespace vdpm {

Scalar dot_block(const VectorX& w, const HingeSample& s) {
  return w.segment(s.offset, s.phi.size()).dot(s.phi);
}

Scalar hinge_objective(const VectorX& w, const VectorX* prior,
                       const std::vector<HingeSample>& samples, Scalar C) {
  Scalar reg = prior ? (w - *prior).squaredNorm() : w.squaredNorm();
  Scalar loss = 0;
  for (const HingeSample& s : samples) loss += std::max(Scalar(0), 1 - s.y * dot_block(w, s));
  return Scalar(0.5) * reg + C * loss;
}

VectorX hinge_subgradient(const VectorX& w, const VectorX* prior,
                          const std::vector<HingeSample>& samples, Scalar C) {
  VectorX g = prior ? VectorX(w - *prior) : w;
  for (const HingeSample& s : samples) {
    if (s.y * dot_block(w, s) < 1) g.segment(s.offset, s.phi.size()) -= (C * s.y) * s.phi;
  }
  return g;
}

namespace {

void project(VectorX& w, const std::vector<LowerBound>& bounds) {
  for (const LowerBound& b : bounds)
    if (w(b.index) < b.bound) w(b.index) = b.bound;
}

Scalar train_error(const VectorX& w, const std::vector<HingeSample>& samples) {
  if (samples.empty()) return 0;
  int wrong = 0;
  for (const HingeSample& s : samples)
    if (s.y * dot_block(w, s) <= 0) ++wrong;
  return static_cast<Scalar>(wrong) / samples.size();
}

}  // namespace

VectorX ssvm_sgd(const VectorX& w0, const VectorX* prior, const std::vector<HingeSample>& samples,
                 Scalar C, const SgdConfig& cfg, Rng rng, const std::vector<LowerBound>& bounds,
                 std::vector<TrainLogRow>* log, int log_round, int log_n_neg) {
  const int n = static_cast<int>(samples.size());
  if (n == 0) throw DataTooSmall("no training samples");

  VectorX w = w0;
  project(w, bounds);
  VectorX best = w;
  Scalar best_obj = hinge_objective(w, prior, samples, C);

  // single numeric path: no prior behaves exactly like an all-zero prior
  const VectorX zero_prior = prior ? VectorX() : VectorX::Zero(w.size());
  const VectorX& m = prior ? *prior : zero_prior;

  const Scalar t0 = cfg.t0_factor * n;
  Scalar t = 0;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (const int i : order) {
      const Scalar eta = cfg.eta0 / (1 + t / t0);
      t += 1;
      const HingeSample& s = samples[i];
      const Scalar margin = s.y * dot_block(w, s);
      w += eta * (m - w);
      if (margin < 1) w.segment(s.offset, s.phi.size()) += (eta * C * n * s.y) * s.phi;
      project(w, bounds);
    }
    const Scalar obj = hinge_objective(w, prior, samples, C);
    if (!std::isfinite(obj)) throw SolverError("objective diverged (not finite)");
    if (log) log->push_back({log_round, epoch, obj, log_n_neg, train_error(w, samples)});
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
  }
  return cfg.return_best ? best : w;
}

ComponentInit init_components(const std::vector<BBox>& positives, int n_components,
                              const HogConfig& hog) {
  const int n = static_cast<int>(positives.size());
  if (n < n_components)
    throw DataTooSmall("need at least " + std::to_string(n_components) + " positives, got " +
                       std::to_string(n));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return positives[a].width() / positives[a].height() <
           positives[b].width() / positives[b].height();
  });

  ComponentInit init;
  init.assignment.assign(n, 0);
  for (int g = 0; g < n_components; ++g) {
    const int lo = g * n / n_components;
    const int hi = (g + 1) * n / n_components;
    std::vector<Scalar> aspects, areas;
    for (int i = lo; i < hi; ++i) {
      const BBox& b = positives[order[i]];
      aspects.push_back(b.width() / b.height());
      areas.push_back(b.area());
      init.assignment[order[i]] = g;
    }
    const int m = static_cast<int>(aspects.size());
    // aspects arrive sorted; areas need their own order
    std::sort(areas.begin(), areas.end());
    const Scalar med_aspect = m % 2 ? aspects[m / 2] : (aspects[m / 2 - 1] + aspects[m / 2]) / 2;
    const Scalar area20 = areas[static_cast<int>(std::floor(0.2 * (m - 1)))];

    const Scalar h_px = std::sqrt(area20 / med_aspect);
    const Scalar w_px = med_aspect * h_px;
    RootShape shape;
    shape.rows = std::max(3, static_cast<int>(std::lround(h_px / hog.cell_size)));
    shape.cols = std::max(3, static_cast<int>(std::lround(w_px / hog.cell_size)));
    init.shapes.push_back(shape);
  }
  return init;
}

namespace {

// 2x cell-grid upsampling of a cell-major filter, bilinear per channel.
MatrixRM upsample_root_2x(const MatrixRM& root, int cols, int dim) {
  const int rows = static_cast<int>(root.rows());
  MatrixRM out(2 * rows, 2 * cols * dim);
  for (int y = 0; y < 2 * rows; ++y) {
    Scalar fy = (y + Scalar(0.5)) / 2 - Scalar(0.5);
    fy = std::clamp<Scalar>(fy, 0, rows - 1);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, rows - 1);
    const Scalar wy = fy - y0;
    for (int x = 0; x < 2 * cols; ++x) {
      Scalar fx = (x + Scalar(0.5)) / 2 - Scalar(0.5);
      fx = std::clamp<Scalar>(fx, 0, cols - 1);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, cols - 1);
      const Scalar wx = fx - x0;
      for (int k = 0; k < dim; ++k) {
        out(y, x * dim + k) = (1 - wy) * ((1 - wx) * root(y0, x0 * dim + k) + wx * root(y0, x1 * dim + k)) +
                              wy * ((1 - wx) * root(y1, x0 * dim + k) + wx * root(y1, x1 * dim + k));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<PartSpec> init_parts(const MatrixRM& root, int root_cols, int dim, int n_parts,
                                 bool* reduced) {
  constexpr int kPart = 6;
  if (reduced) *reduced = false;
  const MatrixRM up = upsample_root_2x(root, root_cols, dim);
  const int rows = static_cast<int>(up.rows());
  const int cols = 2 * root_cols;

  MatrixRM energy = MatrixRM::Zero(rows, cols);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      Scalar e = 0;
      for (int k = 0; k < dim; ++k) {
        const Scalar v = std::max(Scalar(0), up(y, x * dim + k));
        e += v * v;
      }
      energy(y, x) = e;
    }

  std::vector<PartSpec> parts;
  if (rows < kPart || cols < kPart) {
    if (reduced) *reduced = true;
    return parts;
  }

  MatrixRM window = MatrixRM::Zero(rows - kPart + 1, cols - kPart + 1);
  for (int y = 0; y + kPart <= rows; ++y)
    for (int x = 0; x + kPart <= cols; ++x)
      window(y, x) = energy.block(y, x, kPart, kPart).sum();

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> taken(rows, cols);
  taken.setConstant(false);

  for (int p = 0; p < n_parts; ++p) {
    int by = -1, bx = -1;
    Scalar bv = 0;
    bool found = false;
    for (int y = 0; y + kPart <= rows; ++y) {
      for (int x = 0; x + kPart <= cols; ++x) {
        if (taken.block(y, x, kPart, kPart).any()) continue;
        if (!found || window(y, x) > bv) {
          found = true;
          bv = window(y, x);
          by = y;
          bx = x;
        }
      }
    }
    if (!found) {
      if (reduced) *reduced = true;
      break;
    }
    taken.block(by, bx, kPart, kPart).setConstant(true);
    PartSpec part;
    part.cols = kPart;
    part.anchor_y = by;
    part.anchor_x = bx;
    part.filter.resize(kPart, kPart * dim);
    for (int i = 0; i < kPart; ++i)
      part.filter.row(i) = up.row(by + i).segment(bx * dim, kPart * dim);
    parts.push_back(std::move(part));
  }
  return parts;
}

int component_block_offset(const DpmModel& m, int component) {
  const StructurePartition part = partition_of(m);
  for (const Block& b : part.blocks)
    if (b.component == component) return b.offset;
  throw LayoutError("component out of range");
}

VectorX placement_phi(const DpmModel& m, int component, const FeatureLevel& root_feats,
                      const FeatureLevel& part_feats, int y, int x,
                      const std::vector<PartPlacement>& parts) {
  const Component& comp = m.components[component];
  const int dim = m.feature_dim;
  const int rw = comp.root_cols;
  const int rh = comp.root_rows();

  int size = rh * rw * dim + 1;
  for (const PartSpec& p : comp.parts) size += static_cast<int>(p.filter.size()) + 4;
  VectorX phi(size);

  int off = 0;
  for (int i = 0; i < rh; ++i) {
    phi.segment(off, rw * dim) = root_feats.cells.row(y + i).segment(x * dim, rw * dim);
    off += rw * dim;
  }
  phi(off++) = 1;  // bias

  for (std::size_t pi = 0; pi < comp.parts.size(); ++pi) {
    const PartSpec& p = comp.parts[pi];
    const PartPlacement& pl = parts.at(pi);
    if (pl.y < 0 || pl.x < 0) throw DataError("unplaced part in feature extraction");
    const int pw = p.cols;
    for (int i = 0; i < p.rows(); ++i) {
      phi.segment(off, pw * dim) = part_feats.cells.row(pl.y + i).segment(pl.x * dim, pw * dim);
      off += pw * dim;
    }
    const Scalar dx = pl.x - (2 * x + p.anchor_x);
    const Scalar dy = pl.y - (2 * y + p.anchor_y);
    phi(off++) = -std::abs(dx);
    phi(off++) = -std::abs(dy);
    phi(off++) = -dx * dx;
    phi(off++) = -dy * dy;
  }
  return phi;
}

namespace {

struct NegMeta {
  int entry = 0;
  int component = 0;
  int level = 0;
  int y = 0;
  int x = 0;
  Scalar score = 0;
  std::vector<PartPlacement> parts;
};

struct ScanOutput {
  std::vector<LatentAssignment> positives;
  std::vector<NegMeta> negatives;
};

bool overlaps_any_annotation(const BBox& b, const std::vector<Annotation>& anns, Scalar thresh) {
  for (const Annotation& a : anns)
    if (iou(b, a.bbox) >= thresh) return true;
  return false;
}

// One pyramid + scoring pass per image; harvests latent positive assignments
// and/or hard-negative candidates from the same score maps.
ScanOutput scan_images(const DpmModel& m, const Dataset& data, const TrainConfig& cfg,
                       bool want_positives, bool want_negatives) {
  const int n = data.num_images();
  std::vector<ScanOutput> slots(n);

  parallel_for(n, cfg.threads, [&](int ei) {
    const DatasetEntry& entry = data.entries[ei];
    const Image img = load_image(entry.image_path);
    const HogPyramid pyr = build_pyramid(img, m.hog, m.min_root_rows(), m.min_root_cols());
    if (pyr.num_levels() <= pyr.interval) {
      if (want_positives) {
        for (std::size_t ai = 0; ai < entry.annotations.size(); ++ai) {
          const Annotation& a = entry.annotations[ai];
          if (is_positive_class(cfg.classes, a.class_label) && is_moderate(a, cfg.moderate)) {
            LatentAssignment la;
            la.entry = ei;
            la.ann = static_cast<int>(ai);
            slots[ei].positives.push_back(std::move(la));
          }
        }
      }
      return;
    }
    const PyramidScores scores = score_pyramid(m, pyr);

    if (want_positives) {
      for (std::size_t ai = 0; ai < entry.annotations.size(); ++ai) {
        const Annotation& a = entry.annotations[ai];
        if (!is_positive_class(cfg.classes, a.class_label) || !is_moderate(a, cfg.moderate))
          continue;
        LatentAssignment best;
        best.entry = ei;
        best.ann = static_cast<int>(ai);
        for (int rl = pyr.interval; rl < pyr.num_levels(); ++rl) {
          const Scalar ppc = m.hog.cell_size / pyr.levels[rl].scale;
          for (std::size_t ci = 0; ci < m.components.size(); ++ci) {
            const ComponentScore& cs = scores.get(rl, static_cast<int>(ci));
            if (cs.score.empty()) continue;
            const Component& comp = m.components[ci];
            const Scalar bw = comp.root_cols * ppc;
            const Scalar bh = comp.root_rows() * ppc;
            // size gate: best possible IoU for these box sizes
            const Scalar inter = std::min(bw, a.bbox.width()) * std::min(bh, a.bbox.height());
            const Scalar uni = bw * bh + a.bbox.area() - inter;
            if (inter / uni < cfg.latent_overlap) continue;

            const int y_lo = std::max(0, static_cast<int>(std::floor((a.bbox.top - bh) / ppc)));
            const int y_hi = std::min(cs.score.rows() - 1,
                                      static_cast<int>(std::ceil(a.bbox.bottom / ppc)));
            const int x_lo = std::max(0, static_cast<int>(std::floor((a.bbox.left - bw) / ppc)));
            const int x_hi = std::min(cs.score.cols() - 1,
                                      static_cast<int>(std::ceil(a.bbox.right / ppc)));
            for (int y = y_lo; y <= y_hi; ++y) {
              for (int x = x_lo; x <= x_hi; ++x) {
                const Scalar s = cs.score.values(y, x);
                if (s <= kNegInfScore / 2) continue;
                if (best.placed && s <= best.score) continue;
                if (iou(root_box(m, static_cast<int>(ci), pyr.levels[rl].scale, y, x), a.bbox) <
                    cfg.latent_overlap)
                  continue;
                best.placed = true;
                best.score = s;
                best.component = static_cast<int>(ci);
                best.level = rl;
                best.y = y;
                best.x = x;
              }
            }
          }
        }
        if (best.placed) {
          const ComponentScore& cs = scores.get(best.level, best.component);
          const Component& comp = m.components[best.component];
          std::vector<PartPlacement> placements;
          for (std::size_t pi = 0; pi < comp.parts.size(); ++pi) {
            const PartScore& ps = cs.parts[pi];
            const int ay = 2 * best.y + comp.parts[pi].anchor_y;
            const int ax = 2 * best.x + comp.parts[pi].anchor_x;
            // the finite-score gate already excludes out-of-range anchors
            if (ay < 0 || ay >= ps.corr_rows || ax < 0 || ax >= ps.corr_cols)
              throw DataError("latent placement with out-of-range part anchor");
            placements.push_back({static_cast<int>(pi), ps.dt.arg_y(ay, ax), ps.dt.arg_x(ay, ax)});
          }
          best.phi = placement_phi(m, best.component, pyr.levels[best.level],
                                   pyr.levels[best.level - pyr.interval], best.y, best.x,
                                   placements);
        }
        slots[ei].positives.push_back(std::move(best));
      }
    }

    if (want_negatives) {
      std::vector<Detection> dets =
          nms(collect_detections(m, pyr, scores, cfg.mine_threshold), 0.5);
      int kept = 0;
      for (const Detection& d : dets) {
        if (kept >= cfg.mine_per_image_cap) break;
        if (overlaps_any_annotation(d.bbox, entry.annotations, cfg.mine_max_overlap)) continue;
        NegMeta nm;
        nm.entry = ei;
        nm.component = d.component;
        nm.level = d.level;
        nm.y = d.cell_y;
        nm.x = d.cell_x;
        nm.score = d.score;
        nm.parts = d.parts;
        slots[ei].negatives.push_back(std::move(nm));
        ++kept;
      }
    }
  });

  ScanOutput merged;
  for (ScanOutput& s : slots) {
    std::move(s.positives.begin(), s.positives.end(), std::back_inserter(merged.positives));
    std::move(s.negatives.begin(), s.negatives.end(), std::back_inserter(merged.negatives));
  }
  return merged;
}

// Deterministic mining order, then truncation (spec contract).
void sort_and_truncate_negatives(std::vector<NegMeta>& negs, int cap) {
  std::sort(negs.begin(), negs.end(), [](const NegMeta& a, const NegMeta& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.entry != b.entry) return a.entry < b.entry;
    if (a.level != b.level) return a.level < b.level;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.component < b.component;
  });
  if (static_cast<int>(negs.size()) > cap) negs.resize(cap);
}

// Features for surviving negatives: rebuild only the levels they touch.
std::vector<HingeSample> extract_negative_samples(const DpmModel& m, const Dataset& data,
                                                  const TrainConfig& cfg,
                                                  const std::vector<NegMeta>& negs) {
  std::map<int, std::vector<int>> by_entry;  // entry -> indices into negs
  for (std::size_t i = 0; i < negs.size(); ++i) by_entry[negs[i].entry].push_back(static_cast<int>(i));

  std::vector<std::pair<int, std::vector<int>>> groups(by_entry.begin(), by_entry.end());
  std::vector<std::vector<HingeSample>> slots(groups.size());

  parallel_for(static_cast<int>(groups.size()), cfg.threads, [&](int gi) {
    const auto& [ei, idxs] = groups[gi];
    const Image img = load_image(data.entries[ei].image_path);
    std::set<int> needed;
    for (const int i : idxs) {
      needed.insert(negs[i].level);
      needed.insert(negs[i].level - m.hog.interval);
    }
    std::map<int, FeatureLevel> feats;
    for (const int l : needed) feats[l] = compute_pyramid_level(img, m.hog, l);
    for (const int i : idxs) {
      const NegMeta& nm = negs[i];
      HingeSample s;
      s.component = nm.component;
      s.offset = component_block_offset(m, nm.component);
      s.phi = placement_phi(m, nm.component, feats[nm.level], feats[nm.level - m.hog.interval],
                            nm.y, nm.x, nm.parts);
      s.y = -1;
      slots[gi].push_back(std::move(s));
    }
  });

  std::vector<HingeSample> out;
  for (auto& s : slots) std::move(s.begin(), s.end(), std::back_inserter(out));
  return out;
}

}  // namespace

std::vector<LatentAssignment> latent_relabel(const DpmModel& m, const Dataset& data,
                                             const TrainConfig& cfg) {
  return scan_images(m, data, cfg, true, false).positives;
}

std::vector<HingeSample> mine_hard_negatives(const DpmModel& m, const Dataset& data,
                                             const TrainConfig& cfg) {
  ScanOutput scan = scan_images(m, data, cfg, false, true);
  sort_and_truncate_negatives(scan.negatives, cfg.neg_cache);
  return extract_negative_samples(m, data, cfg, scan.negatives);
}

Scalar calibrate_threshold(const DpmModel& m, const Dataset& slice, const TrainConfig& cfg) {
  std::vector<EvalInput> inputs(slice.num_images());
  parallel_for(slice.num_images(), cfg.threads, [&](int i) {
    inputs[i].dets = detect(load_image(slice.entries[i].image_path), m, cfg.mine_threshold);
    inputs[i].gts = slice.entries[i].annotations;
  });
  FppiMrCurve c;
  try {
    c = curve(inputs, cfg.classes, cfg.moderate);
  } catch (const EmptyGroundTruth&) {
    return 0;
  }
  Scalar t = c.points.front().threshold;
  for (const FppiMrPoint& p : c.points)
    if (p.fppi <= cfg.calib_fppi) t = p.threshold;
  return t;
}

namespace {

BBox expand_to_aspect(const BBox& b, Scalar aspect) {
  const Scalar cx = (b.left + b.right) / 2;
  const Scalar cy = (b.top + b.bottom) / 2;
  Scalar w = b.width(), h = b.height();
  if (w / h < aspect)
    w = h * aspect;
  else
    h = w / aspect;
  return BBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2);
}

// Warped-crop features at exactly rows x cols cells (1 px border for the
// centered-difference gradients).
FeatureLevel warped_cells(const Image& img, const BBox& box, int rows, int cols,
                          const HogConfig& hog) {
  const Image crop = warp_crop(img, box, rows * hog.cell_size + 2, cols * hog.cell_size + 2);
  return compute_cells(crop, hog);
}

VectorX root_phi(const FeatureLevel& feats, int rows, int cols, int dim) {
  VectorX phi(rows * cols * dim + 1);
  int off = 0;
  for (int i = 0; i < rows; ++i) {
    phi.segment(off, cols * dim) = feats.cells.row(i).segment(0, cols * dim);
    off += cols * dim;
  }
  phi(off) = 1;
  return phi;
}

}  // namespace

DpmModel train(const Dataset& data, const TrainConfig& cfg, std::vector<TrainLogRow>* log) {
  if (data.entries.empty()) throw DataTooSmall("empty dataset");
  Rng root_rng(cfg.seed);

  // held-out slice for threshold calibration
  const int n_calib = static_cast<int>(std::floor(cfg.calib_fraction * data.num_images()));
  Dataset train_part, calib_part;
  train_part.name = data.name;
  calib_part.name = data.name + "-calib";
  for (int i = 0; i < data.num_images(); ++i)
    (i < data.num_images() - n_calib ? train_part : calib_part).entries.push_back(data.entries[i]);

  struct PosRef {
    int entry;
    int ann;
  };
  std::vector<PosRef> pos_refs;
  std::vector<BBox> pos_boxes;
  for (int ei = 0; ei < train_part.num_images(); ++ei) {
    const auto& anns = train_part.entries[ei].annotations;
    for (std::size_t ai = 0; ai < anns.size(); ++ai)
      if (is_positive_class(cfg.classes, anns[ai].class_label) &&
          is_moderate(anns[ai], cfg.moderate)) {
        pos_refs.push_back({ei, static_cast<int>(ai)});
        pos_boxes.push_back(anns[ai].bbox);
      }
  }

  const ComponentInit init = init_components(pos_boxes, cfg.components, cfg.hog);

  DpmModel model;
  model.hog = cfg.hog;
  model.feature_dim = HogConfig::kFeatureDim;
  const int dim = model.feature_dim;

  // per-component root SVM on warped positives vs random windows
  for (int c = 0; c < cfg.components; ++c) {
    const RootShape shape = init.shapes[c];
    const Scalar aspect = static_cast<Scalar>(shape.cols) / shape.rows;
    std::vector<HingeSample> samples;

    std::vector<int> members;
    for (std::size_t i = 0; i < pos_refs.size(); ++i)
      if (init.assignment[i] == c) members.push_back(static_cast<int>(i));

    // group positives by image to load each image once
    std::map<int, std::vector<int>> by_entry;
    for (const int i : members) by_entry[pos_refs[i].entry].push_back(i);
    for (const auto& [ei, idxs] : by_entry) {
      const Image img = load_image(train_part.entries[ei].image_path);
      for (const int i : idxs) {
        const FeatureLevel feats =
            warped_cells(img, expand_to_aspect(pos_boxes[i], aspect), shape.rows, shape.cols, cfg.hog);
        HingeSample s;
        s.offset = 0;
        s.phi = root_phi(feats, shape.rows, shape.cols, dim);
        s.y = 1;
        samples.push_back(std::move(s));
        if (cfg.augment_flip_pretrain) {
          FeatureLevel flipped = feats;
          flipped.cells = flip_filter(feats.cells, feats.cols, dim);
          HingeSample f;
          f.offset = 0;
          f.phi = root_phi(flipped, shape.rows, shape.cols, dim);
          f.y = 1;
          samples.push_back(std::move(f));
        }
      }
    }

    Rng neg_rng = root_rng.fork("pretrain-neg").fork(static_cast<std::uint64_t>(c));
    const int want = cfg.root_negatives_per_image * train_part.num_images();
    int made = 0;
    int last_entry = -1;
    Image img;
    for (int attempt = 0; attempt < 20 * want && made < want; ++attempt) {
      const int ei = neg_rng.below_int(train_part.num_images());
      if (ei != last_entry) {
        img = load_image(train_part.entries[ei].image_path);
        last_entry = ei;
      }
      const Scalar grow = neg_rng.uniform(1.0, 2.5);
      const Scalar bh = shape.rows * cfg.hog.cell_size * grow;
      const Scalar bw = shape.cols * cfg.hog.cell_size * grow;
      if (bw >= img.cols() || bh >= img.rows()) continue;
      const Scalar left = neg_rng.uniform(0, img.cols() - bw);
      const Scalar top = neg_rng.uniform(0, img.rows() - bh);
      const BBox box(left, top, left + bw, top + bh);
      if (overlaps_any_annotation(box, train_part.entries[ei].annotations, cfg.mine_max_overlap))
        continue;
      HingeSample s;
      s.offset = 0;
      s.phi = root_phi(warped_cells(img, box, shape.rows, shape.cols, cfg.hog), shape.rows,
                       shape.cols, dim);
      s.y = -1;
      samples.push_back(std::move(s));
      ++made;
    }

    VectorX w0 = VectorX::Zero(shape.rows * shape.cols * dim + 1);
    const VectorX w = ssvm_sgd(w0, nullptr, samples, cfg.C, cfg.sgd,
                               root_rng.fork("pretrain-sgd").fork(static_cast<std::uint64_t>(c)));
    Component comp;
    comp.root_cols = shape.cols;
    comp.root.resize(shape.rows, shape.cols * dim);
    Eigen::Map<VectorX>(comp.root.data(), comp.root.size()) = w.head(comp.root.size());
    comp.bias = w(comp.root.size());
    model.components.push_back(std::move(comp));
  }

  for (int c = 0; c < cfg.components; ++c) {
    bool reduced = false;
    model.components[c].parts = init_parts(model.components[c].root, model.components[c].root_cols,
                                           dim, cfg.parts_per_component, &reduced);
    if (reduced)
      std::cerr << "warning: component " << c << " hosts only " << model.components[c].parts.size()
                << " of " << cfg.parts_per_component << " parts\n";
  }

  // latent rounds: relabel + mine with the current model, then solve
  for (int round = 1; round <= cfg.relabel_rounds; ++round) {
    ScanOutput scan = scan_images(model, train_part, cfg, true, true);

    std::vector<HingeSample> samples;
    int dropped = 0;
    for (LatentAssignment& la : scan.positives) {
      if (!la.placed) {
        ++dropped;
        continue;
      }
      HingeSample s;
      s.component = la.component;
      s.offset = component_block_offset(model, la.component);
      s.phi = std::move(la.phi);
      s.y = 1;
      samples.push_back(std::move(s));
    }
    if (dropped)
      std::cerr << "warning: round " << round << ": " << dropped << " positives unplaceable\n";
    if (samples.empty()) throw DataTooSmall("no placeable positives");

    sort_and_truncate_negatives(scan.negatives, cfg.neg_cache);
    std::vector<HingeSample> negs = extract_negative_samples(model, train_part, cfg, scan.negatives);
    const int n_neg = static_cast<int>(negs.size());
    std::move(negs.begin(), negs.end(), std::back_inserter(samples));

    auto [w, partition] = vectorize(model);
    (void)partition;
    w = ssvm_sgd(w, nullptr, samples, cfg.C, cfg.sgd, root_rng.fork("round-sgd").fork(round),
                 deformation_bounds(model, cfg.deform_quad_floor), log, round, n_neg);
    model = devectorize(w, model);
  }

  model.threshold =
      calibrate_threshold(model, calib_part.entries.empty() ? train_part : calib_part, cfg);
  return model;
}

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write training log: " + path);
  out << "round,epoch,objective,n_neg,train_error\n";
  char buf[32];
  const auto fmt = [&](Scalar v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  for (const TrainLogRow& r : rows)
    out << r.round << ',' << r.epoch << ',' << fmt(r.objective) << ',' << r.n_neg << ','
        << fmt(r.train_error) << '\n';
}

}  // namespace vdpm
