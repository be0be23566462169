#pragma once

#include <string>
#include <vector>

#include "vdpm/dataset.hpp"
#include "vdpm/geometry.hpp"
#include "vdpm/model.hpp"

namespace vdpm {

enum class MatchLabel { TP, FP, Ignore };

struct ImageMatches {
  std::vector<MatchLabel> det_labels;  // aligned with the input detections
  int n_moderate_gt = 0;
};

// Greedy per-image matching by descending score: best-IoU unmatched moderate
// ground truth at IoU >= 0.5 is a TP; otherwise IoU >= 0.5 with any ignore
// box (non-moderate positive or ignore-class region) marks the detection
// Ignore; everything else is a FP.
ImageMatches match(const std::vector<Detection>& dets, const std::vector<Annotation>& gts,
                   const ClassConfig& classes = {}, const ModerateConfig& moderate = {},
                   Scalar min_overlap = 0.5);

struct FppiMrPoint {
  Scalar fppi = 0;
  Scalar mr = 1;
  Scalar threshold = 0;
};

// Operating points from a sweep over distinct detection scores, ordered by
// descending threshold (FPPI non-decreasing, MR non-increasing).
struct FppiMrCurve {
  std::vector<FppiMrPoint> points;
  int n_images = 0;
  int n_gt = 0;
};

struct EvalInput {
  std::vector<Detection> dets;
  std::vector<Annotation> gts;
};

FppiMrCurve curve(const std::vector<EvalInput>& images, const ClassConfig& classes = {},
                  const ModerateConfig& moderate = {}, Scalar min_overlap = 0.5);

// detect at det_threshold on every image of the dataset, then curve().
FppiMrCurve evaluate_model(const DpmModel& m, const Dataset& data, Scalar det_threshold,
                           const ClassConfig& classes = {}, const ModerateConfig& moderate = {},
                           int threads = 1);

// Step interpolation (value of the rightmost point with fppi <= query),
// clamped at the curve ends.
Scalar sample_mr(const FppiMrCurve& c, Scalar fppi);

// Caltech log-average miss rate: mean of MR sampled at 9 log-spaced FPPI
// values in [1e-2, 1e0].
Scalar log_average_mr(const FppiMrCurve& c);

std::vector<Scalar> aggregation_grid();  // 25 log-spaced FPPI values in [1e-3, 1e1]

struct AggregateCurves {
  std::vector<Scalar> grid;
  MatrixRM per_run;  // runs x grid
  VectorX mean;
  VectorX stddev;  // sample std, 0 for a single run
};

AggregateCurves aggregate(const std::vector<FppiMrCurve>& runs);

// Mean curve over the aggregation grid, usable with log_average_mr.
FppiMrCurve mean_curve(const AggregateCurves& agg);

struct ExperimentCurves {
  std::string label;
  std::vector<FppiMrCurve> runs;
};

// CSV with the aggregation grid plus mean/std/per-run miss-rate columns per
// experiment; header comments carry the log-average and plain-mean summaries.
void write_curves_csv(const std::string& path, const std::vector<ExperimentCurves>& experiments);

struct CsvExperiment {
  std::string label;
  MatrixRM per_run;
  VectorX mean;
  VectorX stddev;
};

struct CsvCurves {
  std::vector<Scalar> grid;
  std::vector<CsvExperiment> experiments;
};

CsvCurves read_curves_csv(const std::string& path);

// Log-log FPPI vs miss-rate plot with a std band per multi-run experiment;
// legend shows the log-average MR of each mean curve.
void write_plot_svg(const std::string& path, const std::vector<ExperimentCurves>& experiments,
                    const std::string& title = "");

}  // namespace vdpm
