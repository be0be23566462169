#include "vdpm/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vdpm/errors.hpp"
#include "vdpm/image.hpp"
#include "vdpm/inference.hpp"
#include "vdpm/parallel.hpp"

namespace vdpm {

namespace {

std::string fmt(Scalar v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

ImageMatches match(const std::vector<Detection>& dets, const std::vector<Annotation>& gts,
                   const ClassConfig& classes, const ModerateConfig& moderate,
                   Scalar min_overlap) {
  std::vector<int> moderate_idx, ignore_idx;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const Annotation& a = gts[i];
    if (is_positive_class(classes, a.class_label)) {
      if (is_moderate(a, moderate))
        moderate_idx.push_back(static_cast<int>(i));
      else
        ignore_idx.push_back(static_cast<int>(i));
    } else if (is_ignore_class(classes, a.class_label)) {
      ignore_idx.push_back(static_cast<int>(i));
    }
  }

  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });

  ImageMatches out;
  out.det_labels.assign(dets.size(), MatchLabel::FP);
  out.n_moderate_gt = static_cast<int>(moderate_idx.size());
  std::vector<bool> taken(moderate_idx.size(), false);

  for (const int di : order) {
    const BBox& db = dets[di].bbox;
    int best = -1;
    Scalar best_iou = 0;
    for (std::size_t m = 0; m < moderate_idx.size(); ++m) {
      if (taken[m]) continue;
      const Scalar o = iou(db, gts[moderate_idx[m]].bbox);
      if (o >= min_overlap && o > best_iou) {
        best_iou = o;
        best = static_cast<int>(m);
      }
    }
    if (best >= 0) {
      taken[best] = true;
      out.det_labels[di] = MatchLabel::TP;
      continue;
    }
    for (const int gi : ignore_idx) {
      if (iou(db, gts[gi].bbox) >= min_overlap) {
        out.det_labels[di] = MatchLabel::Ignore;
        break;
      }
    }
  }
  return out;
}

FppiMrCurve curve(const std::vector<EvalInput>& images, const ClassConfig& classes,
                  const ModerateConfig& moderate, Scalar min_overlap) {
  if (images.empty()) throw DataError("curve needs at least one image");

  struct Scored {
    Scalar score;
    MatchLabel label;
  };
  std::vector<Scored> all;
  int n_gt = 0;
  for (const EvalInput& im : images) {
    const ImageMatches mm = match(im.dets, im.gts, classes, moderate, min_overlap);
    n_gt += mm.n_moderate_gt;
    for (std::size_t i = 0; i < im.dets.size(); ++i)
      if (mm.det_labels[i] != MatchLabel::Ignore) all.push_back({im.dets[i].score, mm.det_labels[i]});
  }
  if (n_gt == 0) throw EmptyGroundTruth("no moderate ground truth");

  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });

  FppiMrCurve c;
  c.n_images = static_cast<int>(images.size());
  c.n_gt = n_gt;
  if (all.empty()) {
    c.points.push_back({0, 1, 0});
    return c;
  }

  int tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    const Scalar t = all[i].score;
    while (i < all.size() && all[i].score == t) {
      if (all[i].label == MatchLabel::TP)
        ++tp;
      else
        ++fp;
      ++i;
    }
    FppiMrPoint pt;
    pt.threshold = t;
    pt.fppi = static_cast<Scalar>(fp) / c.n_images;
    pt.mr = Scalar(1) - static_cast<Scalar>(tp) / n_gt;
    c.points.push_back(pt);
  }
  return c;
}

FppiMrCurve evaluate_model(const DpmModel& m, const Dataset& data, Scalar det_threshold,
                           const ClassConfig& classes, const ModerateConfig& moderate,
                           int threads) {
  std::vector<EvalInput> inputs(data.num_images());
  parallel_for(data.num_images(), threads, [&](int i) {
    inputs[i].dets = detect(load_image(data.entries[i].image_path), m, det_threshold);
    inputs[i].gts = data.entries[i].annotations;
  });
  return curve(inputs, classes, moderate);
}

Scalar sample_mr(const FppiMrCurve& c, Scalar fppi) {
  if (c.points.empty()) return 1;
  Scalar v = c.points.front().mr;  // clamp below the first operating point
  for (const FppiMrPoint& p : c.points) {
    if (p.fppi <= fppi) v = p.mr;
  }
  return v;
}

Scalar log_average_mr(const FppiMrCurve& c) {
  Scalar sum = 0;
  for (int i = 0; i < 9; ++i) {
    const Scalar f = std::pow(Scalar(10), Scalar(-2) + Scalar(i) * Scalar(0.25));
    sum += sample_mr(c, f);
  }
  return sum / 9;
}

std::vector<Scalar> aggregation_grid() {
  std::vector<Scalar> g(25);
  for (int i = 0; i < 25; ++i) g[i] = std::pow(Scalar(10), Scalar(-3) + Scalar(i) / Scalar(6));
  return g;
}

AggregateCurves aggregate(const std::vector<FppiMrCurve>& runs) {
  if (runs.empty()) throw DataError("aggregate needs at least one run");
  AggregateCurves agg;
  agg.grid = aggregation_grid();
  const int n = static_cast<int>(runs.size());
  const int g = static_cast<int>(agg.grid.size());
  agg.per_run.resize(n, g);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < g; ++i) agg.per_run(r, i) = sample_mr(runs[r], agg.grid[i]);
  agg.mean.resize(g);
  agg.stddev = VectorX::Zero(g);
  for (int i = 0; i < g; ++i) {
    bool all_equal = true;
    for (int r = 1; r < n; ++r)
      if (agg.per_run(r, i) != agg.per_run(0, i)) all_equal = false;
    if (all_equal) {
      agg.mean(i) = agg.per_run(0, i);  // identical runs: exact mean, zero std
      continue;
    }
    const Scalar m = agg.per_run.col(i).mean();
    agg.mean(i) = m;
    Scalar s = 0;
    for (int r = 0; r < n; ++r) s += (agg.per_run(r, i) - m) * (agg.per_run(r, i) - m);
    agg.stddev(i) = std::sqrt(s / (n - 1));
  }
  return agg;
}

FppiMrCurve mean_curve(const AggregateCurves& agg) {
  FppiMrCurve c;
  for (std::size_t i = 0; i < agg.grid.size(); ++i)
    c.points.push_back({agg.grid[i], agg.mean(static_cast<int>(i)), 0});
  return c;
}

void write_curves_csv(const std::string& path, const std::vector<ExperimentCurves>& experiments) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write curves: " + path);
  const auto grid = aggregation_grid();

  out << "# vdpm-curves v1\n";
  std::vector<AggregateCurves> aggs;
  for (const auto& e : experiments) {
    aggs.push_back(aggregate(e.runs));
    const FppiMrCurve mc = mean_curve(aggs.back());
    const Scalar plain = aggs.back().mean.mean();
    out << "# experiment " << e.label << " runs=" << e.runs.size()
        << " log_avg_mr=" << fmt(log_average_mr(mc)) << " plain_mean_mr=" << fmt(plain);
    out << " run_log_avg=";
    for (std::size_t r = 0; r < e.runs.size(); ++r)
      out << (r ? ";" : "") << fmt(log_average_mr(e.runs[r]));
    out << "\n";
  }

  out << "fppi";
  for (std::size_t ei = 0; ei < experiments.size(); ++ei) {
    const auto& label = experiments[ei].label;
    out << ',' << label << "_mean," << label << "_std";
    for (Eigen::Index r = 0; r < aggs[ei].per_run.rows(); ++r)
      out << ',' << label << "_run" << (r + 1);
  }
  out << '\n';

  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << fmt(grid[i]);
    for (const auto& agg : aggs) {
      out << ',' << fmt(agg.mean(static_cast<int>(i))) << ',' << fmt(agg.stddev(static_cast<int>(i)));
      for (Eigen::Index r = 0; r < agg.per_run.rows(); ++r)
        out << ',' << fmt(agg.per_run(r, static_cast<int>(i)));
    }
    out << '\n';
  }
}

CsvCurves read_curves_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open curves: " + path);
  CsvCurves out;
  std::string line;
  std::vector<std::string> columns;
  std::vector<std::vector<Scalar>> data;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tok;
    if (columns.empty()) {
      while (std::getline(ss, tok, ',')) columns.push_back(tok);
      continue;
    }
    std::vector<Scalar> row;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    if (row.size() != columns.size()) throw FormatError("ragged curve CSV: " + path);
    data.push_back(std::move(row));
  }
  if (columns.empty() || columns[0] != "fppi") throw FormatError("bad curve CSV header: " + path);

  for (const auto& row : data) out.grid.push_back(row[0]);

  std::size_t col = 1;
  while (col < columns.size()) {
    const std::string& mean_col = columns[col];
    const auto pos = mean_col.rfind("_mean");
    if (pos == std::string::npos) throw FormatError("unexpected column " + mean_col);
    CsvExperiment e;
    e.label = mean_col.substr(0, pos);
    const std::size_t std_col = col + 1;
    std::size_t run_end = col + 2;
    while (run_end < columns.size() && columns[run_end].rfind(e.label + "_run", 0) == 0) ++run_end;
    const int n_runs = static_cast<int>(run_end - col - 2);
    e.mean.resize(static_cast<int>(data.size()));
    e.stddev.resize(static_cast<int>(data.size()));
    e.per_run.resize(n_runs, static_cast<int>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      e.mean(static_cast<int>(i)) = data[i][col];
      e.stddev(static_cast<int>(i)) = data[i][std_col];
      for (int r = 0; r < n_runs; ++r) e.per_run(r, static_cast<int>(i)) = data[i][col + 2 + r];
    }
    out.experiments.push_back(std::move(e));
    col = run_end;
  }
  return out;
}

namespace {

const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct PlotTransform {
  Scalar x0, x1, y0, y1;  // data range (log10)
  Scalar px0, px1, py0, py1;

  Scalar x(Scalar fppi) const {
    const Scalar lx = std::log10(std::max(fppi, Scalar(1e-12)));
    return px0 + (lx - x0) / (x1 - x0) * (px1 - px0);
  }
  Scalar y(Scalar mr) const {
    const Scalar ly = std::log10(std::clamp(mr, Scalar(1e-12), Scalar(1)));
    return py1 - (ly - y0) / (y1 - y0) * (py1 - py0);
  }
};

}  // namespace

void write_plot_svg(const std::string& path, const std::vector<ExperimentCurves>& experiments,
                    const std::string& title) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write plot: " + path);

  const int W = 640, H = 480;
  PlotTransform tr{-3, 1, std::log10(Scalar(0.02)), 0, 70, W - 20, 40, H - 50};

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<rect x=\"" << fmt(tr.px0) << "\" y=\"" << fmt(tr.py0) << "\" width=\""
      << fmt(tr.px1 - tr.px0) << "\" height=\"" << fmt(tr.py1 - tr.py0)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
        << "</text>\n";

  for (int d = -3; d <= 1; ++d) {
    const Scalar x = tr.x(std::pow(Scalar(10), Scalar(d)));
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(tr.py0) << "\" x2=\"" << fmt(x)
        << "\" y2=\"" << fmt(tr.py1) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(tr.py1 + 18)
        << "\" text-anchor=\"middle\" font-size=\"12\">1e" << d << "</text>\n";
  }
  for (const Scalar v : {0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0}) {
    const Scalar y = tr.y(v);
    out << "<line x1=\"" << fmt(tr.px0) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(tr.px1)
        << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(tr.px0 - 6) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-size=\"12\">" << fmt(v) << "</text>\n";
  }
  out << "<text x=\"" << (tr.px0 + tr.px1) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">false positives per image</text>\n";
  out << "<text x=\"16\" y=\"" << (tr.py0 + tr.py1) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << (tr.py0 + tr.py1) / 2 << ")\">miss rate</text>\n";

  int color = 0;
  std::vector<std::pair<std::string, std::string>> legend;  // label, color
  for (const auto& e : experiments) {
    const AggregateCurves agg = aggregate(e.runs);
    const char* c = kPalette[color % 6];
    ++color;

    if (e.runs.size() > 1) {
      std::ostringstream band;
      for (std::size_t i = 0; i < agg.grid.size(); ++i)
        band << fmt(tr.x(agg.grid[i])) << ','
             << fmt(tr.y(agg.mean(static_cast<int>(i)) + agg.stddev(static_cast<int>(i)))) << ' ';
      for (std::size_t i = agg.grid.size(); i-- > 0;)
        band << fmt(tr.x(agg.grid[i])) << ','
             << fmt(tr.y(std::max(agg.mean(static_cast<int>(i)) - agg.stddev(static_cast<int>(i)),
                                  Scalar(1e-6))))
             << ' ';
      out << "<polygon points=\"" << band.str() << "\" fill=\"" << c
          << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }

    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < agg.grid.size(); ++i)
      out << fmt(tr.x(agg.grid[i])) << ',' << fmt(tr.y(agg.mean(static_cast<int>(i)))) << ' ';
    out << "\"/>\n";

    std::ostringstream lab;
    lab << e.label << " (" << fmt(std::round(log_average_mr(mean_curve(agg)) * 10000) / 10000 * 100)
        << "%)";
    legend.emplace_back(lab.str(), c);
  }

  const Scalar lx = tr.px0 + 12, ly = tr.py0 + 10;
  out << "<rect x=\"" << fmt(lx - 6) << "\" y=\"" << fmt(ly - 4) << "\" width=\"210\" height=\""
      << fmt(Scalar(legend.size()) * 18 + 8) << "\" fill=\"white\" stroke=\"#999999\"/>\n";
  for (std::size_t i = 0; i < legend.size(); ++i) {
    const Scalar y = ly + 12 + Scalar(i) * 18;
    out << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(y - 4) << "\" x2=\"" << fmt(lx + 24)
        << "\" y2=\"" << fmt(y - 4) << "\" stroke=\"" << legend[i].second
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(lx + 30) << "\" y=\"" << fmt(y) << "\" font-size=\"12\">"
        << legend[i].first << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace vdpm
